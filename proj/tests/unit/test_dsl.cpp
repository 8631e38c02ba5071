#include <doctest.h>

#include <random>
#include <sstream>
#include <string>

#include "blockflow/dsl.hpp"
#include "blockflow/errors.hpp"
#include "blockflow/session.hpp"

using namespace blockflow;

namespace {

std::string run_text(const std::string& script, std::uint64_t seed = 0,
                     Precision precision = Precision::Single) {
  SessionConfig c;
  c.engine.precision = precision;
  Session s(c);
  std::ostringstream out;
  run_program(parse_script(script), s, out, {seed});
  return out.str();
}

std::string parse_error(const std::string& script) {
  try {
    parse_script(script);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("dsl") {
  TEST_CASE("the MADD example parses into four statements") {
    Program p = parse_script("A=[1,2;3,4];\nB=[1,2;3,4];\nC=MADD(A,B);\nPRINT(C)");
    REQUIRE(p.size() == 4);
    CHECK(p[0].kind == Statement::Kind::Literal);
    CHECK(p[0].rows == 2);
    CHECK(p[0].cols == 2);
    CHECK(p[0].values == std::vector<double>{1, 2, 3, 4});
    CHECK(p[2].kind == Statement::Kind::Op);
    CHECK(p[2].op == Opcode::MAdd);
    CHECK(p[2].args == std::vector<std::string>{"A", "B"});
    CHECK(p[3].kind == Statement::Kind::Print);
    CHECK(p[3].target == "C");
    CHECK(p[3].line == 4);
  }

  TEST_CASE("the MADD example prints its sum") {
    CHECK(run_text("A=[1,2;3,4];\nB=[1,2;3,4];\nC=MADD(A,B);\nPRINT(C)") ==
          "C =\n2 4\n6 8\n");
  }

  TEST_CASE("comments and blank programs") {
    CHECK(parse_script("# comment only").empty());
    CHECK(parse_script("").empty());
    CHECK(run_text("\n\n# nothing\n").empty());
  }

  TEST_CASE("literals span lines and take signed numbers") {
    Program p = parse_script("X = [1, -2.5;\n  3e2, +4]\nY = SADD(X, -1.5)");
    REQUIRE(p.size() == 2);
    CHECK(p[0].values == std::vector<double>{1, -2.5, 300, 4});
    CHECK(p[1].scalar == -1.5);
  }

  TEST_CASE("arity errors name the opcode and position") {
    std::string msg = parse_error("A=[1]\nC=MADD(A)");
    CHECK(msg.find("MADD takes 2 arguments (matrix, matrix), got 1") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(parse_error("A=[1]\nC=SADD(A)").find("SADD takes 2 arguments (matrix, number)") !=
          std::string::npos);
  }

  TEST_CASE("names must be bound before use") {
    std::string msg = parse_error("C = MADD(A, A)");
    CHECK(msg.find("line 1, column 10") != std::string::npos);
    CHECK(msg.find("'A'") != std::string::npos);
    CHECK_FALSE(parse_error("PRINT(Q)").empty());
  }

  TEST_CASE("unknown functions and reserved names") {
    CHECK(parse_error("A=[1]\nB=FOO(A)").find("unknown function") != std::string::npos);
    CHECK_FALSE(parse_error("MADD=[1]").empty());
    CHECK_FALSE(parse_error("A=[1,2;3]").empty());
    CHECK_FALSE(parse_error("A=[1] B=[2]").empty());
  }

  TEST_CASE("shape errors carry the statement position") {
    try {
      run_text("A=[1,2]\nB=[1;2;3]\nC=MMUL(A,B)");
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("line 3, column 1") != std::string::npos);
    }
  }

  TEST_CASE("RAND is reproducible from the seed") {
    const std::string script = "R = RAND(3, 4)\nPRINT(R)";
    CHECK(run_text(script, 7) == run_text(script, 7));
    CHECK(run_text(script, 7) != run_text(script, 8));
    // First draw of mt19937_64 seeded with 0, computed independently.
    std::mt19937_64 rng(0);
    double first = static_cast<double>(rng() >> 11) / 9007199254740992.0;
    std::string text = run_text("R = RAND(1, 1)\nPRINT(R)", 0, Precision::Double);
    CHECK(std::stod(text.substr(4)) == first);
  }

  TEST_CASE("format_matrix prints shortest float text") {
    std::vector<double> v{0.1, -1, 2.5, 1e-7};
    Matrix m = make_matrix(Precision::Single, 2, 2, 4, v);
    CHECK(format_matrix(m) == "0.1 -1\n2.5 1e-07\n");
  }
}
