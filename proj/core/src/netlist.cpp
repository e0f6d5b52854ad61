#include "fp3d/netlist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace fp3d {

using ordered_json = nlohmann::ordered_json;

ParseError::ParseError(const std::string &what, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line)
{
}

std::optional<int> Netlist::find(std::string_view module_name) const
{
    for (const auto &m : modules)
        if (m.name == module_name)
            return m.id;
    return std::nullopt;
}

void NetCountMatrix::add(int a, int b)
{
    if (a == b)
        return;
    ++counts_[static_cast<std::size_t>(a) * n_ + b];
    ++counts_[static_cast<std::size_t>(b) * n_ + a];
}

int NetCountMatrix::degree(int a) const
{
    int d = 0;
    for (int b = 0; b < n_; ++b)
        d += (*this)(a, b) > 0 ? 1 : 0;
    return d;
}

int NetCountMatrix::max_degree() const
{
    int best = 0;
    for (int a = 0; a < n_; ++a)
        best = std::max(best, degree(a));
    return best;
}

NetCountMatrix net_count_matrix(const Netlist &netlist)
{
    NetCountMatrix m(netlist.size());
    for (const auto &net : netlist.nets)
        for (std::size_t i = 0; i < net.pins.size(); ++i)
            for (std::size_t j = i + 1; j < net.pins.size(); ++j)
                m.add(net.pins[i], net.pins[j]);
    return m;
}

std::vector<std::string> validate(const Netlist &netlist, const CanvasConfig &cfg)
{
    std::vector<std::string> out;
    if (netlist.modules.empty())
        out.push_back("netlist has no modules");
    std::set<std::string> names;
    for (std::size_t i = 0; i < netlist.modules.size(); ++i) {
        const auto &m = netlist.modules[i];
        if (m.id != static_cast<int>(i))
            out.push_back("module '" + m.name + "' has id " + std::to_string(m.id) + ", expected " +
                          std::to_string(i));
        if (!names.insert(m.name).second)
            out.push_back("duplicate module name '" + m.name + "'");
        if (m.width < 1 || m.height < 1)
            out.push_back("module '" + m.name + "' has a dimension < 1");
        else if (m.width > cfg.width || m.height > cfg.height)
            out.push_back("module '" + m.name + "' (" + std::to_string(m.width) + "x" + std::to_string(m.height) +
                          ") does not fit the " + cfg.to_string() + " canvas");
    }
    for (const auto &net : netlist.nets) {
        std::set<int> seen;
        for (int p : net.pins) {
            if (p < 0 || p >= netlist.size())
                out.push_back("net " + std::to_string(net.id) + " references unknown module id " + std::to_string(p));
            else if (!seen.insert(p).second)
                out.push_back("net " + std::to_string(net.id) + " repeats module id " + std::to_string(p));
        }
        if (net.pins.size() < 2)
            out.push_back("net " + std::to_string(net.id) + " has fewer than 2 pins");
    }
    return out;
}

// ---------------------------------------------------------------------------
// GSRC bookshelf

namespace {

struct Line
{
    int number;
    std::vector<std::string> tokens;
};

std::vector<Line> tokenize_lines(std::string_view text, bool strip_punct)
{
    std::vector<Line> lines;
    int number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string raw(text.substr(pos, end - pos));
        ++number;
        pos = end + 1;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        if (strip_punct)
            for (char &c : raw)
                if (c == '(' || c == ')' || c == ',')
                    c = ' ';
        std::istringstream is(raw);
        Line line{number, {}};
        for (std::string tok; is >> tok;)
            line.tokens.push_back(tok);
        if (!line.tokens.empty())
            lines.push_back(std::move(line));
        if (end == text.size())
            break;
    }
    return lines;
}

double parse_number(const std::string &tok, int line)
{
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v))
            throw ParseError("bad number '" + tok + "'", line);
        return v;
    } catch (const std::logic_error &) {
        throw ParseError("bad number '" + tok + "'", line);
    }
}

bool is_count_line(const Line &l) { return l.tokens.size() >= 2 && l.tokens[1] == ":"; }

struct RawBlock
{
    std::string name;
    double width;
    double height;
};

} // namespace

Netlist parse_gsrc(std::string_view blocks_text, std::string_view nets_text, const CanvasConfig &canvas)
{
    auto blines = tokenize_lines(blocks_text, true);
    if (blines.empty() || blines[0].tokens.size() < 2 || blines[0].tokens[0] != "UCSC" ||
        blines[0].tokens[1] != "blocks")
        throw ParseError("malformed header, expected 'UCSC blocks'", blines.empty() ? 1 : blines[0].number);

    std::vector<RawBlock> blocks;
    std::set<std::string> terminals;
    std::set<std::string> block_names;
    std::map<std::string, long> declared;
    for (std::size_t i = 1; i < blines.size(); ++i) {
        const auto &l = blines[i];
        const auto &t = l.tokens;
        if (is_count_line(l)) {
            if (t.size() != 3)
                throw ParseError("malformed count line", l.number);
            declared[t[0]] = static_cast<long>(parse_number(t[2], l.number));
            continue;
        }
        if (t.size() < 2)
            throw ParseError("malformed block line", l.number);
        const std::string &name = t[0];
        if (block_names.count(name) || terminals.count(name))
            throw ParseError("duplicate block name '" + name + "'", l.number);
        const std::string &kind = t[1];
        if (kind == "terminal") {
            terminals.insert(name);
        } else if (kind == "hardrectilinear") {
            if (t.size() < 3)
                throw ParseError("missing vertex count", l.number);
            auto nverts = static_cast<std::size_t>(parse_number(t[2], l.number));
            if (t.size() != 3 + 2 * nverts)
                throw ParseError("vertex count does not match coordinates", l.number);
            if (nverts != 4)
                throw ParseError("non-rectangular outline for '" + name + "'", l.number);
            std::set<double> xs, ys;
            std::set<std::pair<double, double>> pts;
            for (std::size_t v = 0; v < nverts; ++v) {
                double x = parse_number(t[3 + 2 * v], l.number);
                double y = parse_number(t[4 + 2 * v], l.number);
                xs.insert(x);
                ys.insert(y);
                pts.insert({x, y});
            }
            if (xs.size() != 2 || ys.size() != 2 || pts.size() != 4)
                throw ParseError("non-rectangular outline for '" + name + "'", l.number);
            blocks.push_back({name, *xs.rbegin() - *xs.begin(), *ys.rbegin() - *ys.begin()});
            block_names.insert(name);
        } else if (kind == "softrectangular") {
            if (t.size() != 5)
                throw ParseError("malformed soft block", l.number);
            double area = parse_number(t[2], l.number);
            if (area <= 0)
                throw ParseError("soft block area must be positive", l.number);
            double side = std::sqrt(area);
            blocks.push_back({name, side, side});
            block_names.insert(name);
        } else {
            throw ParseError("unknown block kind '" + kind + "'", l.number);
        }
    }
    if (blocks.empty())
        throw ParseError("no blocks declared");
    auto check_count = [&](const char *key, long actual) {
        if (auto it = declared.find(key); it != declared.end() && it->second != actual)
            throw ParseError(std::string(key) + " declares " + std::to_string(it->second) + " but " +
                             std::to_string(actual) + " found");
    };
    check_count("NumTerminals", static_cast<long>(terminals.size()));

    double max_dim = 0.0;
    for (const auto &b : blocks)
        max_dim = std::max({max_dim, b.width, b.height});
    if (max_dim <= 0.0)
        throw ParseError("all blocks are degenerate");
    const double target = std::ceil(canvas.width / 4.0);
    const double scale = target / max_dim;
    auto to_cells = [&](double d) { return std::max(1, static_cast<int>(std::ceil(d * scale - 1e-9))); };

    Netlist out;
    std::unordered_map<std::string, int> ids;
    for (const auto &b : blocks) {
        int id = static_cast<int>(out.modules.size());
        ids[b.name] = id;
        out.modules.push_back({id, b.name, to_cells(b.width), to_cells(b.height)});
    }

    auto nlines = tokenize_lines(nets_text, false);
    if (nlines.empty() || nlines[0].tokens.size() < 2 || nlines[0].tokens[0] != "UCLA" ||
        nlines[0].tokens[1] != "nets")
        throw ParseError("malformed header, expected 'UCLA nets'", nlines.empty() ? 1 : nlines[0].number);
    long declared_nets = -1;
    std::size_t i = 1;
    long parsed_nets = 0;
    while (i < nlines.size()) {
        const auto &l = nlines[i];
        const auto &t = l.tokens;
        if (t[0] == "NumNets" && is_count_line(l) && t.size() == 3) {
            declared_nets = static_cast<long>(parse_number(t[2], l.number));
            ++i;
            continue;
        }
        if (t[0] == "NumPins" && is_count_line(l)) {
            ++i;
            continue;
        }
        if (t[0] != "NetDegree" || t.size() < 3 || t[1] != ":")
            throw ParseError("expected 'NetDegree :'", l.number);
        auto degree = static_cast<std::size_t>(parse_number(t[2], l.number));
        ++parsed_nets;
        ++i;
        std::vector<int> pins;
        for (std::size_t p = 0; p < degree; ++p, ++i) {
            if (i >= nlines.size())
                throw ParseError("net truncated: expected " + std::to_string(degree) + " pins", l.number);
            const std::string &pin = nlines[i].tokens[0];
            if (auto it = ids.find(pin); it != ids.end()) {
                if (std::find(pins.begin(), pins.end(), it->second) == pins.end())
                    pins.push_back(it->second);
            } else if (!terminals.count(pin)) {
                throw ParseError("unknown pin name '" + pin + "'", nlines[i].number);
            }
        }
        if (pins.size() >= 2)
            out.nets.push_back({static_cast<int>(out.nets.size()), std::move(pins)});
    }
    if (declared_nets >= 0 && declared_nets != parsed_nets)
        throw ParseError("NumNets declares " + std::to_string(declared_nets) + " but " +
                         std::to_string(parsed_nets) + " found");
    return out;
}

// ---------------------------------------------------------------------------
// Canonical JSON

Netlist parse_canonical(std::string_view text)
{
    ordered_json doc;
    try {
        doc = ordered_json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError("schema: top level must be an object");
    for (const char *key : {"name", "modules", "nets"})
        if (!doc.contains(key))
            throw ParseError(std::string("schema: missing field '") + key + "'");
    if (!doc["name"].is_string() || !doc["modules"].is_array() || !doc["nets"].is_array())
        throw ParseError("schema: 'name' must be a string, 'modules' and 'nets' arrays");

    Netlist out;
    out.name = doc["name"].get<std::string>();
    std::unordered_map<std::string, int> ids;
    for (const auto &m : doc["modules"]) {
        if (!m.is_object() || !m.contains("name") || !m.contains("w") || !m.contains("h") || !m["name"].is_string() ||
            !m["w"].is_number_integer() || !m["h"].is_number_integer())
            throw ParseError("schema: module entries need string 'name' and integer 'w', 'h'");
        Module mod;
        mod.id = static_cast<int>(out.modules.size());
        mod.name = m["name"].get<std::string>();
        auto w = m["w"].get<long long>();
        auto h = m["h"].get<long long>();
        if (w < 1)
            throw ParseError("module '" + mod.name + "': width must be >=1");
        if (h < 1)
            throw ParseError("module '" + mod.name + "': height must be >=1");
        if (w > 1'000'000 || h > 1'000'000)
            throw ParseError("module '" + mod.name + "': dimension too large");
        mod.width = static_cast<int>(w);
        mod.height = static_cast<int>(h);
        if (!ids.emplace(mod.name, mod.id).second)
            throw ParseError("duplicate module name '" + mod.name + "'");
        out.modules.push_back(std::move(mod));
    }
    if (out.modules.empty())
        throw ParseError("schema: 'modules' must be nonempty");
    for (const auto &n : doc["nets"]) {
        if (!n.is_array())
            throw ParseError("schema: each net must be an array of module names");
        Net net;
        net.id = static_cast<int>(out.nets.size());
        for (const auto &pin : n) {
            if (!pin.is_string())
                throw ParseError("schema: net pins must be module names");
            auto it = ids.find(pin.get<std::string>());
            if (it == ids.end())
                throw ParseError("net " + std::to_string(net.id) + " references unknown module '" +
                                 pin.get<std::string>() + "'");
            if (std::find(net.pins.begin(), net.pins.end(), it->second) == net.pins.end())
                net.pins.push_back(it->second);
        }
        if (net.pins.size() < 2)
            throw ParseError("net " + std::to_string(net.id) + " has fewer than 2 pins");
        out.nets.push_back(std::move(net));
    }
    return out;
}

std::string serialize_canonical(const Netlist &netlist)
{
    ordered_json doc;
    doc["name"] = netlist.name;
    doc["modules"] = ordered_json::array();
    for (const auto &m : netlist.modules)
        doc["modules"].push_back({{"name", m.name}, {"w", m.width}, {"h", m.height}});
    doc["nets"] = ordered_json::array();
    for (const auto &net : netlist.nets) {
        ordered_json pins = ordered_json::array();
        for (int p : net.pins)
            pins.push_back(netlist.modules.at(p).name);
        doc["nets"].push_back(std::move(pins));
    }
    return doc.dump(2) + "\n";
}

std::string content_hash(const Netlist &netlist)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : serialize_canonical(netlist)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Netlist make_toy3()
{
    Netlist n;
    n.name = "toy3";
    n.modules = {{0, "A", 2, 2}, {1, "B", 2, 1}, {2, "C", 1, 1}};
    n.nets = {{0, {0, 1}}, {1, {1, 2}}, {2, {0, 1}}};
    return n;
}

Netlist random_netlist(int modules, int nets, int max_side, std::uint64_t seed)
{
    if (modules < 1 || max_side < 1 || nets < 0)
        throw std::invalid_argument("random_netlist: need modules >= 1, max_side >= 1, nets >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> side(1, max_side);
    Netlist n;
    n.name = "rand" + std::to_string(modules) + "_" + std::to_string(seed);
    for (int i = 0; i < modules; ++i) {
        int w = side(rng);
        int h = side(rng);
        n.modules.push_back({i, "m" + std::to_string(i), w, h});
    }
    if (modules < 2)
        return n;
    std::uniform_int_distribution<int> degree(2, std::min(4, modules));
    std::vector<int> ids(modules);
    for (int i = 0; i < modules; ++i)
        ids[i] = i;
    for (int k = 0; k < nets; ++k) {
        std::shuffle(ids.begin(), ids.end(), rng);
        int d = degree(rng);
        std::vector<int> pins(ids.begin(), ids.begin() + d);
        std::sort(pins.begin(), pins.end());
        n.nets.push_back({k, std::move(pins)});
    }
    return n;
}

} // namespace fp3d
