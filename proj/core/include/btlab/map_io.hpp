#pragma once

#include <iosfwd>
#include <string>

#include "btlab/maps.hpp"

namespace btlab {

// Text format:
//   BTLAB-MAP v1
//   n r h half d
//   mask i1 … in v1 … vd      (one line per active node, lexicographic order)
// mask is the integer NodeMask code; reals use shortest round-trip decimal.
void write_map(std::ostream& os, const DiscreteMap& u);
void write_map(const std::string& path, const DiscreteMap& u);
DiscreteMap read_map(std::istream& is);
DiscreteMap read_map(const std::string& path);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace btlab
