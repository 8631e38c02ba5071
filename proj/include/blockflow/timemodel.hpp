#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blockflow/matrix.hpp"
#include "blockflow/opcode.hpp"

namespace blockflow {

enum class Stage { DataFetch, Execute, WriteBack };

std::string_view to_string(Stage s) noexcept;  // "df", "ex", "wb"
std::optional<Stage> parse_stage(std::string_view s) noexcept;

/// One measured stage duration. `dims` is (rows, cols) of the transferred
/// block for df/wb and of the operand block for element-wise execute, and
/// (n1, n2, n3) for a block product n1 x n2 times n2 x n3.
struct ProfileSample {
  Opcode op = Opcode::MAdd;
  Stage stage = Stage::Execute;
  std::vector<double> dims;
  double duration_ns = 0.0;
};

/// Per-instruction stage durations.
struct StageTimes {
  double df = 0.0;
  double ex = 0.0;
  double wb = 0.0;

  double df_ex() const noexcept { return df + ex; }
  double total() const noexcept { return df + ex + wb; }
};

enum class BasisKind { Transfer, Elementwise, MatMul };

BasisKind basis_kind(Opcode op, Stage stage) noexcept;

/// Polynomial terms g_k(n): transfer [1, n1, n2]; element-wise execute
/// [1, n1*n2]; block product execute [1, n1, n1*n2*n3].
/// Throws std::invalid_argument when dims has the wrong arity.
std::vector<double> basis(Opcode op, Stage stage, std::span<const double> dims);

struct StageModel {
  BasisKind basis = BasisKind::Transfer;
  std::vector<double> a;
  double residual = 0.0;
  std::size_t samples = 0;
};

/// Coefficient sets keyed by class: "transfer" holds the shared df and wb
/// models, every opcode name holds its own execute model.
class TimeModel {
 public:
  static constexpr std::string_view kTransferClass = "transfer";

  static std::string class_of(Opcode op, Stage stage);

  void set(const std::string& cls, Stage stage, StageModel model);
  const StageModel* find(const std::string& cls, Stage stage) const;
  bool has(Opcode op, Stage stage) const { return find(class_of(op, stage), stage) != nullptr; }

  /// dot(a, basis(op, stage, dims)) clamped to >= 0. Throws
  /// std::out_of_range when the class/stage has no fitted model.
  double estimate(Opcode op, Stage stage, std::span<const double> dims) const;

  /// Stage durations of one block instruction. Data fetch sums the transfer
  /// estimate over the distinct operand blocks; write back uses the result.
  /// Throws std::invalid_argument when the slots do not match the arity.
  StageTimes estimate_instruction(Opcode op, std::span<const Shape> distinct_operands,
                                  std::span<const Shape> operand_slots,
                                  Shape result) const;

  const std::map<std::string, std::map<Stage, StageModel>>& classes() const noexcept {
    return classes_;
  }

  std::string to_json() const;
  static TimeModel from_json(std::string_view text);

 private:
  std::map<std::string, std::map<Stage, StageModel>> classes_;
};

/// Ordinary least squares per class and stage. For every (opcode, stage,
/// size) group with two or more repetitions the largest duration is dropped
/// first. Throws RankDeficientError naming the class and stage when its
/// design matrix lacks full column rank.
TimeModel fit(std::span<const ProfileSample> samples);

/// Sum of squared residuals of `a` on the samples of one class/stage.
double residual_sum(std::span<const ProfileSample> samples, const std::string& cls,
                    Stage stage, std::span<const double> a);

std::string samples_to_csv(std::span<const ProfileSample> samples);
/// Throws std::runtime_error with the offending line on malformed input.
std::vector<ProfileSample> samples_from_csv(std::string_view text);

/// Coefficients calibrated on the development machine; used when no
/// coefficients file is given.
const TimeModel& default_time_model();

}  // namespace blockflow
