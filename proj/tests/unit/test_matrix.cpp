#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "blockflow/errors.hpp"
#include "blockflow/matrix.hpp"
#include "blockflow/numfmt.hpp"
#include "blockflow/reference.hpp"

using namespace blockflow;

TEST_SUITE("matrix") {
  TEST_CASE("pad_dims rounds both extents up to the divisor") {
    CHECK(pad_dims(100, 100, 4) == std::pair<std::size_t, std::size_t>{100, 100});
    CHECK(pad_dims(7, 5, 4) == std::pair<std::size_t, std::size_t>{8, 8});
    CHECK(pad_dims(1, 9216, 1) == std::pair<std::size_t, std::size_t>{1, 9216});
    CHECK_THROWS_AS(pad_dims(0, 3, 4), std::invalid_argument);
    CHECK_THROWS_AS(pad_dims(3, 3, 0), std::invalid_argument);
    CHECK_THROWS_AS(pad_dims(-1, 3, 2), std::invalid_argument);
  }

  TEST_CASE("pad_dims invariants") {
    for (std::int64_t d : {1, 2, 3, 4, 8}) {
      for (std::int64_t n = 1; n <= 40; ++n) {
        auto [pn, pm] = pad_dims(n, 41 - n, d);
        CHECK(pn % d == 0);
        CHECK(pm % d == 0);
        CHECK(pn >= std::size_t(n));
        CHECK(pn < std::size_t(n + d));
        CHECK(pm >= std::size_t(41 - n));
        CHECK(pm < std::size_t(41 - n + d));
      }
    }
  }

  TEST_CASE("make_matrix pads with zeros") {
    std::vector<double> eye{1, 0, 0, 1};
    Matrix a = make_matrix(Precision::Double, 2, 2, 2, eye);
    CHECK(a.padded_rows() == 2);
    CHECK(a.padded_cols() == 2);

    std::vector<double> ones(9, 1.0);
    Matrix b = make_matrix(Precision::Single, 3, 3, 4, ones);
    CHECK(b.padded_rows() == 4);
    CHECK(b.padded_cols() == 4);
    std::size_t zeros = 0;
    for (float v : b.storage<float>()) zeros += v == 0.0f;
    CHECK(zeros == 7);
    CHECK(b.pads_are_zero());

    std::vector<double> row{1, 2, 3, 4, 5};
    Matrix c = make_matrix(Precision::Single, 1, 5, 4, row);
    CHECK(c.padded_rows() == 4);
    CHECK(c.padded_cols() == 8);
    CHECK(c.storage<float>().size() == 32);
    CHECK(c.logical_values() == row);

    CHECK_THROWS_AS(make_matrix(Precision::Single, 2, 2, 4, row), ShapeError);
  }

  TEST_CASE("zero_pads restores the pad invariant") {
    Matrix m(Precision::Double, 3, 3, 4);
    m.storage<double>()[15] = 7.0;
    CHECK_FALSE(m.pads_are_zero());
    m.zero_pads();
    CHECK(m.pads_are_zero());
  }

  TEST_CASE("reference MADD of the two-by-two example") {
    std::vector<double> v{1, 2, 3, 4};
    Matrix a = make_matrix(Precision::Single, 2, 2, 4, v);
    const Matrix* ops[] = {&a, &a};
    Matrix c = reference_eval(Opcode::MAdd, ops);
    CHECK(c.logical_values() == std::vector<double>{2, 4, 6, 8});
    CHECK(c.pads_are_zero());
  }

  TEST_CASE("reference identities") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(9), eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (double& v : x) v = u(rng);
    Matrix X = make_matrix(Precision::Double, 3, 3, 4, x);
    Matrix I = make_matrix(Precision::Double, 3, 3, 4, eye);
    const Matrix* ops[] = {&I, &X};
    CHECK(reference_eval(Opcode::MMul, ops) == X);

    Matrix z(Precision::Single, 2, 2, 4);
    const Matrix* one[] = {&z};
    CHECK(reference_eval(Opcode::Sin, one) == z);
  }

  TEST_CASE("reference rejects shape mismatches") {
    Matrix a(Precision::Single, 2, 2, 4), b(Precision::Single, 3, 3, 4);
    const Matrix* ops[] = {&a, &b};
    CHECK_THROWS_AS(reference_eval(Opcode::MAdd, ops), ShapeError);
    CHECK_THROWS_AS(reference_eval(Opcode::MMul, ops), ShapeError);
    Shape shapes[] = {{2, 3}, {3, 5}};
    CHECK(result_shape(Opcode::MMul, shapes) == Shape{2, 5});
  }

  TEST_CASE("reference keeps pads zero for every opcode") {
    std::vector<double> v{1.5, -2, 0, 3, 0.25, -0.75};
    Matrix a = make_matrix(Precision::Double, 2, 3, 4, v);
    Matrix at = make_matrix(Precision::Double, 3, 2, 4, v);
    for (Opcode op : kAllOpcodes) {
      std::vector<const Matrix*> ops{&a};
      if (arity(op) == 2) ops.push_back(op == Opcode::MMul ? &at : &a);
      std::optional<double> s;
      if (has_scalar(op)) s = 2.0;
      CAPTURE(name(op));
      CHECK(reference_eval(op, ops, s).pads_are_zero());
    }
  }

  TEST_CASE("format_number is shortest round trip") {
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(0.1f) == "0.1");
    CHECK(format_number(-0.5) == "-0.5");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
  }
}
