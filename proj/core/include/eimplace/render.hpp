#pragma once

#include <string>

#include "eimplace/netlist.hpp"
#include "eimplace/placement_env.hpp"

namespace eim {

// Deterministic SVG view of a layout: square canvas, grid lines, one filled
// rect per placed macro labeled by id, pins as dots. Throws ValidationError
// when the layout does not match the netlist.
std::string render_layout_svg(const Netlist& n, const Layout& layout);

}  // namespace eim
