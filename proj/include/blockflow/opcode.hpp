#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace blockflow {

/// Matrix instructions understood by every layer of the runtime.
enum class Opcode {
  MAdd,
  MSub,
  MMul,
  EMul,
  EDiv,
  EPow,
  SAdd,
  SSub,
  SMul,
  Abs,
  Mod,
  Sin,
  Cos,
  Sign,
  Round,
  Eq,
  Neq,
};

inline constexpr std::size_t kOpcodeCount = 17;

inline constexpr std::array<Opcode, kOpcodeCount> kAllOpcodes = {
    Opcode::MAdd, Opcode::MSub, Opcode::MMul, Opcode::EMul, Opcode::EDiv,
    Opcode::EPow, Opcode::SAdd, Opcode::SSub, Opcode::SMul, Opcode::Abs,
    Opcode::Mod,  Opcode::Sin,  Opcode::Cos,  Opcode::Sign, Opcode::Round,
    Opcode::Eq,   Opcode::Neq};

struct OpcodeInfo {
  std::string_view name;  // DSL spelling
  std::size_t arity;      // matrix operands
  bool has_scalar;
  bool preserves_zero;  // f(0[,0]) == 0, so pads survive the kernel
};

constexpr OpcodeInfo info(Opcode op) noexcept {
  switch (op) {
    case Opcode::MAdd: return {"MADD", 2, false, true};
    case Opcode::MSub: return {"MSUB", 2, false, true};
    case Opcode::MMul: return {"MMUL", 2, false, true};
    case Opcode::EMul: return {"EMUL", 2, false, true};
    case Opcode::EDiv: return {"EDIV", 2, false, false};
    case Opcode::EPow: return {"EPOW", 2, false, false};
    case Opcode::SAdd: return {"SADD", 1, true, false};
    case Opcode::SSub: return {"SSUB", 1, true, false};
    case Opcode::SMul: return {"SMUL", 1, true, true};
    case Opcode::Abs: return {"ABS", 1, false, true};
    case Opcode::Mod: return {"MOD", 1, true, false};
    case Opcode::Sin: return {"SIN", 1, false, true};
    case Opcode::Cos: return {"COS", 1, false, false};
    case Opcode::Sign: return {"SIGN", 1, false, true};
    case Opcode::Round: return {"ROUND", 1, false, true};
    case Opcode::Eq: return {"EQ", 2, false, false};
    case Opcode::Neq: return {"NEQ", 2, false, false};
  }
  return {"?", 0, false, false};
}

constexpr std::string_view name(Opcode op) noexcept { return info(op).name; }
constexpr std::size_t arity(Opcode op) noexcept { return info(op).arity; }
constexpr bool has_scalar(Opcode op) noexcept { return info(op).has_scalar; }

std::optional<Opcode> parse_opcode(std::string_view spelling) noexcept;

}  // namespace blockflow
