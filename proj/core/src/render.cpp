#include "eimplace/render.hpp"

#include <sstream>

#include "eimplace/errors.hpp"
#include "eimplace/io.hpp"

namespace eim {

namespace {

constexpr int kCellPx = 32;
constexpr int kMarginPx = 8;

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                          "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

}  // namespace

std::string render_layout_svg(const Netlist& n, const Layout& layout) {
  if (layout.netlist_name != n.name)
    throw ValidationError("layout names netlist '" + layout.netlist_name + "' but got '" + n.name +
                          "'");
  if (layout.grid_n != n.grid_n)
    throw ValidationError("layout grid does not match netlist grid");

  const int grid = n.grid_n;
  const int side = grid * kCellPx;
  const int total = side + 2 * kMarginPx;
  // SVG y grows downward; the grid's y grows upward.
  auto ypx = [&](double y) { return kMarginPx + side - y * kCellPx; };
  auto xpx = [&](double x) { return kMarginPx + x * kCellPx; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << total
      << "\" viewBox=\"0 0 " << total << " " << total << "\">\n";
  svg << "  <rect x=\"" << kMarginPx << "\" y=\"" << kMarginPx << "\" width=\"" << side
      << "\" height=\"" << side << "\" fill=\"#ffffff\" stroke=\"#222222\" stroke-width=\"2\"/>\n";
  for (int i = 1; i < grid; ++i) {
    const int x = kMarginPx + i * kCellPx;
    svg << "  <line x1=\"" << x << "\" y1=\"" << kMarginPx << "\" x2=\"" << x << "\" y2=\""
        << (kMarginPx + side) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "  <line x1=\"" << kMarginPx << "\" y1=\"" << x << "\" x2=\"" << (kMarginPx + side)
        << "\" y2=\"" << x << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
  }
  for (const auto& p : layout.placements) {
    if (p.macro_id < 0 || p.macro_id >= static_cast<int>(n.macros.size()))
      throw ValidationError("layout places unknown macro " + std::to_string(p.macro_id));
    const Macro& m = n.macros[p.macro_id];
    const char* color = kPalette[p.macro_id % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const double top = ypx(p.y + m.height_cells);
    svg << "  <rect x=\"" << io::format_fixed(xpx(p.x), 1) << "\" y=\"" << io::format_fixed(top, 1)
        << "\" width=\"" << m.width_cells * kCellPx << "\" height=\"" << m.height_cells * kCellPx
        << "\" fill=\"" << color
        << "\" fill-opacity=\"0.8\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
    svg << "  <text x=\"" << io::format_fixed(xpx(p.x + m.width_cells / 2.0), 1) << "\" y=\""
        << io::format_fixed(ypx(p.y + m.height_cells / 2.0) + 5.0, 1)
        << "\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\" fill=\"#111111\">"
        << p.macro_id << "</text>\n";
    for (const PinOffset& pin : m.pins) {
      svg << "  <circle cx=\"" << io::format_fixed(xpx(p.x + pin.dx), 1) << "\" cy=\""
          << io::format_fixed(ypx(p.y + pin.dy), 1)
          << "\" r=\"3\" fill=\"#222222\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace eim
