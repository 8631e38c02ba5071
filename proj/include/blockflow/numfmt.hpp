#pragma once

#include <string>

namespace blockflow {

/// Shortest decimal text that parses back to the same double; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_number(double v);
std::string format_number(float v);

}  // namespace blockflow
