#include "blockflow/timemodel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "blockflow/errors.hpp"

namespace blockflow {

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::DataFetch: return "df";
    case Stage::Execute: return "ex";
    case Stage::WriteBack: return "wb";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view s) noexcept {
  if (s == "df") return Stage::DataFetch;
  if (s == "ex") return Stage::Execute;
  if (s == "wb") return Stage::WriteBack;
  return std::nullopt;
}

BasisKind basis_kind(Opcode op, Stage stage) noexcept {
  if (stage != Stage::Execute) return BasisKind::Transfer;
  return op == Opcode::MMul ? BasisKind::MatMul : BasisKind::Elementwise;
}

namespace {

std::size_t expected_dims(BasisKind kind) { return kind == BasisKind::MatMul ? 3 : 2; }

std::string_view kind_name(BasisKind kind) {
  switch (kind) {
    case BasisKind::Transfer: return "transfer";
    case BasisKind::Elementwise: return "elementwise";
    case BasisKind::MatMul: return "matmul";
  }
  return "?";
}

std::vector<std::string> term_names(BasisKind kind) {
  switch (kind) {
    case BasisKind::Transfer: return {"1", "n1", "n2"};
    case BasisKind::Elementwise: return {"1", "n1*n2"};
    case BasisKind::MatMul: return {"1", "n1", "n1*n2*n3"};
  }
  return {};
}

std::vector<double> terms(BasisKind kind, std::span<const double> n) {
  switch (kind) {
    case BasisKind::Transfer: return {1.0, n[0], n[1]};
    case BasisKind::Elementwise: return {1.0, n[0] * n[1]};
    case BasisKind::MatMul: return {1.0, n[0], n[0] * n[1] * n[2]};
  }
  return {};
}

// Solves the k x k system in place by Gaussian elimination with partial
// pivoting. Returns false when a pivot vanishes relative to `scale`.
bool solve_dense(std::vector<std::vector<double>> m, std::vector<double> rhs,
                 std::vector<double>& x, double scale) {
  const std::size_t k = rhs.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r) {
      if (std::fabs(m[r][c]) > std::fabs(m[piv][c])) piv = r;
    }
    if (!(std::fabs(m[piv][c]) > 1e-11 * scale)) return false;
    std::swap(m[piv], m[c]);
    std::swap(rhs[piv], rhs[c]);
    for (std::size_t r = c + 1; r < k; ++r) {
      double f = m[r][c] / m[c][c];
      for (std::size_t cc = c; cc < k; ++cc) m[r][cc] -= f * m[c][cc];
      rhs[r] -= f * rhs[c];
    }
  }
  x.assign(k, 0.0);
  for (std::size_t c = k; c-- > 0;) {
    double acc = rhs[c];
    for (std::size_t cc = c + 1; cc < k; ++cc) acc -= m[c][cc] * x[cc];
    x[c] = acc / m[c][c];
  }
  return true;
}

struct Design {
  std::vector<std::vector<double>> rows;  // basis terms per sample
  std::vector<double> y;
};

// Normal equations on column-scaled terms, followed by two rounds of
// iterative refinement on the residual.
std::vector<double> least_squares(const Design& d, const std::string& label) {
  const std::size_t k = d.rows.front().size();
  if (d.rows.size() < k) {
    throw RankDeficientError(label + ": " + std::to_string(d.rows.size()) +
                             " samples for " + std::to_string(k) + " coefficients");
  }
  std::vector<double> scale(k, 0.0);
  for (const auto& r : d.rows) {
    for (std::size_t c = 0; c < k; ++c) scale[c] = std::max(scale[c], std::fabs(r[c]));
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (scale[c] == 0.0) throw RankDeficientError(label + ": basis term is identically zero");
  }
  std::vector<std::vector<double>> gram(k, std::vector<double>(k, 0.0));
  for (const auto& r : d.rows) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) gram[i][j] += (r[i] / scale[i]) * (r[j] / scale[j]);
    }
  }
  const double gram_scale = static_cast<double>(d.rows.size());

  auto solve_for = [&](const std::vector<double>& target) {
    std::vector<double> rhs(k, 0.0);
    for (std::size_t s = 0; s < d.rows.size(); ++s) {
      for (std::size_t i = 0; i < k; ++i) rhs[i] += (d.rows[s][i] / scale[i]) * target[s];
    }
    std::vector<double> x;
    if (!solve_dense(gram, rhs, x, gram_scale)) {
      throw RankDeficientError(label + ": design matrix is rank deficient");
    }
    return x;
  };

  std::vector<double> a = solve_for(d.y);
  for (int round = 0; round < 2; ++round) {
    std::vector<double> r(d.y.size());
    for (std::size_t s = 0; s < d.rows.size(); ++s) {
      double pred = 0.0;
      for (std::size_t i = 0; i < k; ++i) pred += (d.rows[s][i] / scale[i]) * a[i];
      r[s] = d.y[s] - pred;
    }
    std::vector<double> corr = solve_for(r);
    for (std::size_t i = 0; i < k; ++i) a[i] += corr[i];
  }
  for (std::size_t i = 0; i < k; ++i) a[i] /= scale[i];
  return a;
}

double dot(std::span<const double> a, std::span<const double> g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * g[i];
  return acc;
}

}  // namespace

std::vector<double> basis(Opcode op, Stage stage, std::span<const double> dims) {
  BasisKind kind = basis_kind(op, stage);
  if (dims.size() != expected_dims(kind)) {
    throw std::invalid_argument(std::string(name(op)) + " " + std::string(to_string(stage)) +
                                " expects " + std::to_string(expected_dims(kind)) +
                                " size terms, got " + std::to_string(dims.size()));
  }
  return terms(kind, dims);
}

std::string TimeModel::class_of(Opcode op, Stage stage) {
  if (stage != Stage::Execute) return std::string(kTransferClass);
  return std::string(name(op));
}

void TimeModel::set(const std::string& cls, Stage stage, StageModel model) {
  classes_[cls][stage] = std::move(model);
}

const StageModel* TimeModel::find(const std::string& cls, Stage stage) const {
  auto it = classes_.find(cls);
  if (it == classes_.end()) return nullptr;
  auto jt = it->second.find(stage);
  return jt == it->second.end() ? nullptr : &jt->second;
}

double TimeModel::estimate(Opcode op, Stage stage, std::span<const double> dims) const {
  const std::string cls = class_of(op, stage);
  const StageModel* m = find(cls, stage);
  if (!m) {
    throw std::out_of_range("time model has no " + cls + "/" +
                            std::string(to_string(stage)) + " coefficients");
  }
  std::vector<double> g = basis(op, stage, dims);
  if (g.size() != m->a.size()) {
    throw std::out_of_range("coefficient count mismatch for " + cls);
  }
  return std::max(0.0, dot(m->a, g));
}

StageTimes TimeModel::estimate_instruction(Opcode op, std::span<const Shape> distinct_operands,
                                           std::span<const Shape> operand_slots,
                                           Shape result) const {
  if (operand_slots.size() != arity(op)) {
    throw std::invalid_argument(std::string(name(op)) + " needs " + std::to_string(arity(op)) +
                                " operand slot(s), got " + std::to_string(operand_slots.size()));
  }
  StageTimes t;
  for (const Shape& s : distinct_operands) {
    double n[2] = {static_cast<double>(s.rows), static_cast<double>(s.cols)};
    t.df += estimate(op, Stage::DataFetch, n);
  }
  double r[2] = {static_cast<double>(result.rows), static_cast<double>(result.cols)};
  t.wb = estimate(op, Stage::WriteBack, r);
  const Shape& a = operand_slots[0];
  if (op == Opcode::MMul) {
    double n[3] = {static_cast<double>(a.rows), static_cast<double>(a.cols),
                   static_cast<double>(operand_slots[1].cols)};
    t.ex = estimate(op, Stage::Execute, n);
  } else {
    double n[2] = {static_cast<double>(a.rows), static_cast<double>(a.cols)};
    t.ex = estimate(op, Stage::Execute, n);
  }
  return t;
}

std::string TimeModel::to_json() const {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (const auto& [cls, stages] : classes_) {
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [stage, m] : stages) {
      c[std::string(to_string(stage))] = {
          {"kind", kind_name(m.basis)},
          {"basis", term_names(m.basis)},
          {"a", m.a},
          {"residual", m.residual},
          {"samples", m.samples},
      };
    }
    root[cls] = std::move(c);
  }
  return root.dump(2);
}

TimeModel TimeModel::from_json(std::string_view text) {
  auto root = nlohmann::json::parse(text);
  TimeModel model;
  for (const auto& [cls, stages] : root.items()) {
    for (const auto& [stage_name, entry] : stages.items()) {
      auto stage = parse_stage(stage_name);
      if (!stage) throw std::runtime_error("unknown stage '" + stage_name + "' in coefficients");
      StageModel m;
      if (cls == kTransferClass) {
        m.basis = BasisKind::Transfer;
      } else {
        auto op = parse_opcode(cls);
        if (!op) throw std::runtime_error("unknown class '" + cls + "' in coefficients");
        m.basis = basis_kind(*op, *stage);
      }
      m.a = entry.at("a").get<std::vector<double>>();
      if (m.a.size() != term_names(m.basis).size()) {
        throw std::runtime_error("wrong coefficient count for " + cls + "/" + stage_name);
      }
      m.residual = entry.value("residual", 0.0);
      m.samples = entry.value("samples", std::size_t{0});
      model.set(cls, *stage, std::move(m));
    }
  }
  return model;
}

namespace {

using GroupKey = std::tuple<std::string, Stage>;

std::map<GroupKey, std::vector<const ProfileSample*>> trimmed_groups(
    std::span<const ProfileSample> samples) {
  // Repetitions of one measurement: same opcode, stage and size.
  std::map<std::tuple<Opcode, Stage, std::vector<double>>, std::vector<const ProfileSample*>>
      reps;
  for (const ProfileSample& s : samples) reps[{s.op, s.stage, s.dims}].push_back(&s);

  std::map<GroupKey, std::vector<const ProfileSample*>> groups;
  for (auto& [key, list] : reps) {
    if (list.size() >= 2) {
      auto worst = std::max_element(list.begin(), list.end(), [](auto* x, auto* y) {
        return x->duration_ns < y->duration_ns;
      });
      list.erase(worst);
    }
    const auto& [op, stage, dims] = key;
    auto& g = groups[{TimeModel::class_of(op, stage), stage}];
    g.insert(g.end(), list.begin(), list.end());
  }
  return groups;
}

}  // namespace

double residual_sum(std::span<const ProfileSample> samples, const std::string& cls,
                    Stage stage, std::span<const double> a) {
  double r = 0.0;
  for (const ProfileSample& s : samples) {
    if (s.stage != stage || TimeModel::class_of(s.op, s.stage) != cls) continue;
    double e = dot(a, basis(s.op, s.stage, s.dims)) - s.duration_ns;
    r += e * e;
  }
  return r;
}

TimeModel fit(std::span<const ProfileSample> samples) {
  TimeModel model;
  for (const auto& [key, group] : trimmed_groups(samples)) {
    const auto& [cls, stage] = key;
    const std::string label = cls + "/" + std::string(to_string(stage));
    Design d;
    for (const ProfileSample* s : group) {
      d.rows.push_back(basis(s->op, s->stage, s->dims));
      d.y.push_back(s->duration_ns);
    }
    StageModel m;
    m.basis = basis_kind(group.front()->op, stage);
    m.a = least_squares(d, label);
    m.samples = group.size();
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
      double e = dot(m.a, d.rows[i]) - d.y[i];
      m.residual += e * e;
    }
    model.set(cls, stage, std::move(m));
  }
  return model;
}

std::string samples_to_csv(std::span<const ProfileSample> samples) {
  std::ostringstream out;
  out << "opcode,stage,n1,n2,n3,duration_ns\n";
  out << std::setprecision(17);
  for (const ProfileSample& s : samples) {
    out << name(s.op) << ',' << to_string(s.stage) << ',' << s.dims.at(0) << ','
        << s.dims.at(1) << ',';
    if (s.dims.size() > 2) out << s.dims[2];
    out << ',' << s.duration_ns << '\n';
  }
  return out.str();
}

std::vector<ProfileSample> samples_from_csv(std::string_view text) {
  std::vector<ProfileSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("opcode,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    auto bad = [&](const std::string& why) {
      return std::runtime_error("profile CSV line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 6) throw bad("expected 6 fields");
    auto op = parse_opcode(f[0]);
    if (!op) throw bad("unknown opcode '" + f[0] + "'");
    auto stage = parse_stage(f[1]);
    if (!stage) throw bad("unknown stage '" + f[1] + "'");
    ProfileSample s;
    s.op = *op;
    s.stage = *stage;
    try {
      s.dims.push_back(std::stod(f[2]));
      s.dims.push_back(std::stod(f[3]));
      if (!f[4].empty()) s.dims.push_back(std::stod(f[4]));
      s.duration_ns = std::stod(f[5]);
    } catch (const std::exception&) {
      throw bad("malformed number");
    }
    if (s.dims.size() != expected_dims(basis_kind(s.op, s.stage))) {
      throw bad("wrong number of size terms");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace blockflow
