#include "blockflow/dsl.hpp"

#include <cctype>
#include <charconv>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include "blockflow/errors.hpp"
#include "blockflow/numfmt.hpp"

namespace blockflow {

namespace {

struct Token {
  enum class Kind { Ident, Number, Punct, Newline, End };
  Kind kind = Kind::End;
  std::string text;
  double number = 0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    int depth = 0;  // newlines inside [...] are whitespace
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == '\n') {
        if (depth == 0) out.push_back(make(Token::Kind::Newline, "\\n"));
        advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        Token t = make(Token::Kind::Ident, "");
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '_')) {
          t.text += text_[pos_];
          advance();
        }
        out.push_back(std::move(t));
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                 ((c == '-' || c == '+') && starts_number(pos_ + 1))) {
        out.push_back(number());
      } else if (std::string_view("=()[],;").find(c) != std::string_view::npos) {
        if (c == '[') ++depth;
        if (c == ']' && depth > 0) --depth;
        out.push_back(make(Token::Kind::Punct, std::string(1, c)));
        advance();
      } else {
        throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
      }
    }
    out.push_back(make(Token::Kind::End, "end of input"));
    return out;
  }

 private:
  bool starts_number(std::size_t at) const {
    if (at >= text_.size()) return false;
    const char c = text_[at];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }

  Token number() {
    Token t = make(Token::Kind::Number, "");
    const std::size_t begin = pos_;
    if (text_[pos_] == '+' || text_[pos_] == '-') advance();
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      advance();
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      advance();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) advance();
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        column_ -= pos_ - save;
        pos_ = save;
      }
    }
    t.text = std::string(text_.substr(begin, pos_ - begin));
    std::string_view body = t.text;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), t.number);
    if (ec != std::errc() || ptr != body.data() + body.size()) {
      throw ParseError("malformed number '" + t.text + "'", t.line, t.column);
    }
    return t;
  }

  Token make(Token::Kind k, std::string text) const {
    Token t;
    t.kind = k;
    t.text = std::move(text);
    t.line = line_;
    t.column = column_;
    return t;
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : t_(std::move(tokens)) {}

  Program run() {
    Program prog;
    for (;;) {
      while (is_punct(";") || peek().kind == Token::Kind::Newline) ++i_;
      if (peek().kind == Token::Kind::End) break;
      prog.push_back(statement());
      if (is_punct(";")) ++i_;
      const Token& end = peek();
      if (end.kind != Token::Kind::Newline && end.kind != Token::Kind::End) {
        fail("expected end of statement, found '" + end.text + "'", end);
      }
    }
    return prog;
  }

 private:
  Statement statement() {
    const Token& first = expect_ident("statement");
    Statement st;
    st.line = first.line;
    st.column = first.column;
    if (first.text == "PRINT") {
      st.kind = Statement::Kind::Print;
      expect("(");
      st.target = bound_name();
      expect(")");
      return st;
    }
    if (reserved(first.text)) fail("'" + first.text + "' is reserved and cannot be bound", first);
    st.target = first.text;
    expect("=");
    expression(st);
    bound_.insert(st.target);
    return st;
  }

  void expression(Statement& st) {
    const Token& t = peek();
    if (is_punct("[")) {
      literal(st);
      return;
    }
    if (t.kind != Token::Kind::Ident) fail("expected a literal or a function call", t);
    ++i_;
    if (!is_punct("(")) {
      fail("expected '(' after '" + t.text + "'", peek());
    }
    if (t.text == "RAND") {
      st.kind = Statement::Kind::Rand;
      expect("(");
      st.rows = positive_int();
      expect(",");
      st.cols = positive_int();
      expect(")");
      return;
    }
    auto op = parse_opcode(t.text);
    if (!op) fail("unknown function '" + t.text + "'", t);
    st.kind = Statement::Kind::Op;
    st.op = *op;
    expect("(");
    std::vector<Token> args;
    if (!is_punct(")")) {
      args.push_back(next());
      while (is_punct(",")) {
        ++i_;
        args.push_back(next());
      }
    }
    const Token& close = peek();
    if (!is_punct(")")) fail("expected ')' or ','", close);
    ++i_;

    const std::size_t want = arity(*op) + (has_scalar(*op) ? 1 : 0);
    if (args.size() != want) {
      std::string form = has_scalar(*op) ? "(matrix, number)"
                         : arity(*op) == 2 ? "(matrix, matrix)"
                                           : "(matrix)";
      fail(std::string(name(*op)) + " takes " + std::to_string(want) + " argument" +
               (want == 1 ? "" : "s") + " " + form + ", got " + std::to_string(args.size()),
           t);
    }
    for (std::size_t a = 0; a < arity(*op); ++a) {
      if (args[a].kind != Token::Kind::Ident) {
        fail(std::string(name(*op)) + " argument " + std::to_string(a + 1) +
                 " must be a matrix name",
             args[a]);
      }
      require_bound(args[a]);
      st.args.push_back(args[a].text);
    }
    if (has_scalar(*op)) {
      const Token& s = args.back();
      if (s.kind != Token::Kind::Number) {
        fail(std::string(name(*op)) + " expects a number as its last argument", s);
      }
      st.scalar = s.number;
    }
  }

  void literal(Statement& st) {
    st.kind = Statement::Kind::Literal;
    const Token& open = next();
    std::vector<std::vector<double>> rows(1);
    for (;;) {
      const Token& t = next();
      if (t.kind != Token::Kind::Number) fail("expected a number in matrix literal", t);
      rows.back().push_back(t.number);
      if (is_punct(",")) {
        ++i_;
      } else if (is_punct(";")) {
        ++i_;
        rows.emplace_back();
      } else if (is_punct("]")) {
        ++i_;
        break;
      } else {
        fail("expected ',', ';' or ']' in matrix literal", peek());
      }
    }
    st.rows = rows.size();
    st.cols = rows.front().size();
    for (const auto& r : rows) {
      if (r.size() != st.cols) fail("matrix literal rows differ in length", open);
      st.values.insert(st.values.end(), r.begin(), r.end());
    }
  }

  std::size_t positive_int() {
    const Token& t = next();
    if (t.kind != Token::Kind::Number || t.number < 1 || t.number != static_cast<double>(
                                                                       static_cast<std::size_t>(t.number))) {
      fail("expected a positive integer", t);
    }
    return static_cast<std::size_t>(t.number);
  }

  std::string bound_name() {
    const Token& t = expect_ident("name");
    require_bound(t);
    return t.text;
  }

  void require_bound(const Token& t) {
    if (!bound_.count(t.text)) fail("undefined identifier '" + t.text + "'", t);
  }

  static bool reserved(const std::string& s) {
    return s == "PRINT" || s == "RAND" || parse_opcode(s).has_value();
  }

  const Token& expect_ident(const char* what) {
    const Token& t = next();
    if (t.kind != Token::Kind::Ident) fail(std::string("expected ") + what + ", found '" + t.text + "'", t);
    return t;
  }

  void expect(const char* p) {
    const Token& t = next();
    if (t.kind != Token::Kind::Punct || t.text != p) {
      fail(std::string("expected '") + p + "', found '" + t.text + "'", t);
    }
  }

  bool is_punct(const char* p) const {
    return peek().kind == Token::Kind::Punct && peek().text == p;
  }
  const Token& peek() const { return t_[i_]; }
  const Token& next() {
    const Token& t = t_[i_];
    if (t.kind != Token::Kind::End) ++i_;
    return t;
  }
  [[noreturn]] static void fail(const std::string& what, const Token& at) {
    throw ParseError(what, at.line, at.column);
  }

  std::vector<Token> t_;
  std::size_t i_ = 0;
  std::set<std::string> bound_;
};

}  // namespace

Program parse_script(std::string_view text) { return Parser(Lexer(text).run()).run(); }

std::string format_matrix(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      if (m.precision() == Precision::Single) {
        out += format_number(m.storage<float>()[r * m.padded_cols() + c]);
      } else {
        out += format_number(m.storage<double>()[r * m.padded_cols() + c]);
      }
    }
    out += '\n';
  }
  return out;
}

void run_program(const Program& program, Session& session, std::ostream& out,
                 const InterpreterOptions& options) {
  const EngineConfig& cfg = session.config().engine;
  std::mt19937_64 rng(options.seed);
  std::unordered_map<std::string, Handle> env;

  for (const Statement& st : program) {
    try {
      switch (st.kind) {
        case Statement::Kind::Literal:
          env[st.target] =
              session.constant(make_matrix(cfg.precision, st.rows, st.cols, cfg.divisor, st.values));
          break;
        case Statement::Kind::Rand: {
          std::vector<double> v(st.rows * st.cols);
          for (double& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          env[st.target] = session.constant(make_matrix(cfg.precision, st.rows, st.cols, cfg.divisor, v));
          break;
        }
        case Statement::Kind::Op: {
          std::vector<Handle> args;
          for (const std::string& a : st.args) args.push_back(env.at(a));
          env[st.target] = session.apply(st.op, args, st.scalar);
          break;
        }
        case Statement::Kind::Print: {
          auto value = session.force(env.at(st.target));
          out << st.target << " =\n" << format_matrix(*value);
          break;
        }
      }
    } catch (const ShapeError& e) {
      throw ShapeError("line " + std::to_string(st.line) + ", column " +
                       std::to_string(st.column) + ": " + e.what());
    }
  }
  out.flush();
  session.wait_idle();
}

}  // namespace blockflow
