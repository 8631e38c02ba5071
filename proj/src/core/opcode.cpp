#include "blockflow/opcode.hpp"

namespace blockflow {

std::optional<Opcode> parse_opcode(std::string_view spelling) noexcept {
  for (Opcode op : kAllOpcodes) {
    if (name(op) == spelling) return op;
  }
  return std::nullopt;
}

}  // namespace blockflow
