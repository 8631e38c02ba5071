#include <string>
#include <vector>

#include "blockflow/numfmt.hpp"
#include "blockflow/scheduler.hpp"

namespace blockflow {

namespace {

struct Term {
  double coef;
  std::string var;
};

class LpWriter {
 public:
  void comment(const std::string& s) { out_ += "\\ " + s + "\n"; }
  void line(const std::string& s) { out_ += s + "\n"; }

  // Zero coefficients are dropped; long rows wrap every few terms.
  void row(const std::string& name, const std::vector<Term>& terms, const char* sense,
           double rhs) {
    std::string s = " " + name + ":";
    std::size_t written = 0;
    for (const Term& t : terms) {
      if (t.coef == 0.0) continue;
      if (written > 0 && written % 8 == 0) s += "\n   ";
      s += t.coef < 0 ? " - " : " + ";
      double mag = t.coef < 0 ? -t.coef : t.coef;
      if (mag != 1.0) s += format_number(mag) + " ";
      s += t.var;
      ++written;
    }
    if (written == 0) return;
    s += std::string(" ") + sense + " " + format_number(rhs);
    line(s);
  }

  std::string str() && { return std::move(out_); }

 private:
  std::string out_;
};

std::string t(std::size_t i) { return "t_" + std::to_string(i + 1); }
std::string x(std::size_t i, std::size_t j) {
  return "x_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
}
std::string xs(std::size_t j) { return "x_s_" + std::to_string(j + 1); }
std::string y(std::size_t i, std::size_t j) {
  return "y_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
}

}  // namespace

std::string emit_ilp(const CostedGraph& g, std::size_t workers) {
  const std::size_t n = g.size();
  double U = 0.0;
  for (std::size_t i = 0; i < n; ++i) U += g.cost(i).total();

  LpWriter w;
  w.comment("makespan model: " + std::to_string(n) + " instructions");
  w.comment("num_processors = " + std::to_string(workers));
  w.comment("U = " + format_number(U));
  w.line("Minimize");
  w.line(" obj: z");
  w.line("Subject To");

  for (std::size_t i = 0; i < n; ++i) {
    w.row("makespan_" + std::to_string(i + 1), {{1, t(i)}, {-1, "z"}}, "<=",
          -g.cost(i).total());
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : g.successors(i)) {
      w.row("precedence_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
            {{1, t(i)}, {-1, t(j)}}, "<=", -g.cost(i).total());
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    const std::string sj = std::to_string(j + 1);
    std::vector<Term> df, ex, wb;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      const StageTimes& c = g.cost(i);
      df.push_back({1, y(i, j)});
      df.push_back({c.df, x(i, j)});
      ex.push_back({1, y(i, j)});
      ex.push_back({c.df_ex(), x(i, j)});
      wb.push_back({1, y(i, j)});
      wb.push_back({c.total(), x(i, j)});
    }
    df.push_back({-1, t(j)});
    ex.push_back({-1, t(j)});
    wb.push_back({-1, t(j)});
    w.row("stream_df_" + sj, df, "<=", 0.0);
    w.row("stream_ex_" + sj, ex, "<=", g.cost(j).df);
    w.row("stream_wb_" + sj, wb, "<=", g.cost(j).df_ex());
  }

  std::vector<Term> starts;
  for (std::size_t i = 0; i < n; ++i) starts.push_back({1, xs(i)});
  w.row("num_processors", starts, "<=", static_cast<double>(workers));

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Term> out;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) out.push_back({1, x(i, j)});
    }
    w.row("successors_" + std::to_string(i + 1), out, "<=", 1.0);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Term> in{{1, xs(j)}};
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) in.push_back({1, x(i, j)});
    }
    w.row("predecessors_" + std::to_string(j + 1), in, "=", 1.0);
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::string ij = std::to_string(i + 1) + "_" + std::to_string(j + 1);
      w.row("linearize_t1_" + ij, {{1, y(i, j)}, {-U, x(i, j)}}, "<=", 0.0);
      w.row("linearize_t2_" + ij, {{1, t(i)}, {U, x(i, j)}, {-1, y(i, j)}}, "<=", U);
      w.row("linearize_t3_" + ij, {{1, y(i, j)}, {-1, t(i)}}, "<=", 0.0);
    }
  }

  w.line("Bounds");
  w.line(" z >= 0");
  for (std::size_t i = 0; i < n; ++i) w.line(" " + t(i) + " >= 0");
  w.line("Binaries");
  for (std::size_t j = 0; j < n; ++j) w.line(" " + xs(j));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) w.line(" " + x(i, j));
    }
  }
  w.line("End");
  return std::move(w).str();
}

}  // namespace blockflow
