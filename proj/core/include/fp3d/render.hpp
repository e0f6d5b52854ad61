#pragma once

#include "fp3d/geometry.hpp"
#include "fp3d/netlist.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fp3d {

/// Anchor per module id; nullopt for unplaced modules.
using Placement = std::vector<std::optional<Anchor>>;

inline constexpr int kSvgCellSize = 10;

/// One panel per layer, left to right, one labeled <rect> per placed
/// module. Throws std::invalid_argument for out-of-bounds or overlapping
/// modules.
std::string render_svg(const Netlist &netlist, const CanvasConfig &cfg, const Placement &placement);

/// {"<module>": {"x":..,"y":..,"z":..}, ...} for placed modules, id order.
std::string placement_to_json(const Netlist &netlist, const Placement &placement);
/// Throws ParseError on malformed input or unknown module names.
Placement placement_from_json(const Netlist &netlist, std::string_view text);

/// Cell-by-cell legality check; returns a description of the first problem.
std::optional<std::string> placement_problem(const Netlist &netlist, const CanvasConfig &cfg,
                                             const Placement &placement);

} // namespace fp3d
