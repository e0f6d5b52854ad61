#include "fp3d/render.hpp"

#include <cstdint>
#include <sstream>

#include "json.hpp"

namespace fp3d {

namespace {

std::string xml_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

int name_hue(std::string_view name)
{
    std::uint32_t h = 2166136261u;
    for (unsigned char c : name) {
        h ^= c;
        h *= 16777619u;
    }
    return int(h % 360u);
}

} // namespace

std::optional<std::string> placement_problem(const Netlist &netlist, const CanvasConfig &cfg,
                                             const Placement &placement)
{
    if (placement.size() != netlist.modules.size())
        return "placement covers " + std::to_string(placement.size()) + " modules, netlist has " +
               std::to_string(netlist.modules.size());
    std::vector<int> owner(cfg.cell_count(), -1);
    for (const auto &m : netlist.modules) {
        const auto &a = placement[m.id];
        if (!a)
            continue;
        if (a->x < 0 || a->y < 0 || a->z < 0 || a->x + m.width > cfg.width || a->y + m.height > cfg.height ||
            a->z >= cfg.layers)
            return "module '" + m.name + "' is out of bounds";
        for (int y = a->y; y < a->y + m.height; ++y)
            for (int x = a->x; x < a->x + m.width; ++x) {
                int &cell = owner[cfg.index(x, y, a->z)];
                if (cell >= 0)
                    return "modules '" + netlist.modules[cell].name + "' and '" + m.name + "' overlap";
                cell = m.id;
            }
    }
    return std::nullopt;
}

std::string render_svg(const Netlist &netlist, const CanvasConfig &cfg, const Placement &placement)
{
    if (auto problem = placement_problem(netlist, cfg, placement))
        throw std::invalid_argument("cannot render illegal placement: " + *problem);
    const int cell = kSvgCellSize;
    const int gap = 2 * cell;
    const int top = 2 * cell;
    const int panel_w = cfg.width * cell;
    const int panel_h = cfg.height * cell;
    const int total_w = cfg.layers * panel_w + (cfg.layers + 1) * gap;
    const int total_h = panel_h + top + gap;

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\"" << total_h
       << "\" viewBox=\"0 0 " << total_w << ' ' << total_h << "\">\n";
    for (int z = 0; z < cfg.layers; ++z) {
        const int ox = gap + z * (panel_w + gap);
        os << "  <g class=\"layer\" id=\"layer" << z << "\">\n"
           << "    <text x=\"" << ox << "\" y=\"" << top - cell / 2 << "\" font-size=\"" << cell
           << "\">layer " << z << "</text>\n"
           << "    <path d=\"M" << ox << ' ' << top << " h" << panel_w << " v" << panel_h << " h-" << panel_w
           << " Z\" fill=\"#f8f8f8\" stroke=\"#333\"/>\n";
        for (const auto &m : netlist.modules) {
            const auto &a = placement[m.id];
            if (!a || a->z != z)
                continue;
            // Canvas y grows upward; SVG y grows downward.
            const int x = ox + a->x * cell;
            const int y = top + (cfg.height - a->y - m.height) * cell;
            os << "    <rect class=\"module\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << m.width * cell
               << "\" height=\"" << m.height * cell << "\" fill=\"hsl(" << name_hue(m.name)
               << ",60%,70%)\" stroke=\"#222\"/>\n"
               << "    <text x=\"" << x + m.width * cell / 2 << "\" y=\"" << y + m.height * cell / 2
               << "\" font-size=\"" << cell * 0.8 << "\" text-anchor=\"middle\" dominant-baseline=\"middle\">"
               << xml_escape(m.name) << "</text>\n";
        }
        os << "  </g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string placement_to_json(const Netlist &netlist, const Placement &placement)
{
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto &m : netlist.modules)
        if (m.id < int(placement.size()) && placement[m.id]) {
            const auto &a = *placement[m.id];
            doc[m.name] = {{"x", a.x}, {"y", a.y}, {"z", a.z}};
        }
    return doc.dump(2) + "\n";
}

Placement placement_from_json(const Netlist &netlist, std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("invalid placement JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError("placement must be an object of module name -> {x,y,z}");
    Placement out(netlist.modules.size());
    for (const auto &[name, pos] : doc.items()) {
        auto id = netlist.find(name);
        if (!id)
            throw ParseError("placement names unknown module '" + name + "'");
        if (!pos.is_object() || !pos.contains("x") || !pos.contains("y") || !pos.contains("z") ||
            !pos["x"].is_number_integer() || !pos["y"].is_number_integer() || !pos["z"].is_number_integer())
            throw ParseError("placement of '" + name + "' needs integer x, y, z");
        out[*id] = Anchor{pos["x"].get<int>(), pos["y"].get<int>(), pos["z"].get<int>()};
    }
    return out;
}

} // namespace fp3d
