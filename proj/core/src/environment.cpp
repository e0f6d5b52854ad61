#include "fp3d/environment.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

namespace fp3d {

double reward_wl(double delta_wirelength, const CanvasConfig &cfg)
{
    const double d = cfg.span();
    return d / (d + delta_wirelength);
}

double heat_kernel(int dx, int dy, int dz)
{
    const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
    if (manhattan == 0)
        return 1.0;
    if (manhattan != 1)
        return 0.0;
    return dz != 0 ? 1.0 : 0.5;
}

void add_net_density(std::vector<double> &map, const CanvasConfig &cfg, std::span<const std::array<int, 3>> centers)
{
    if (centers.size() < 2)
        return;
    std::array<int, 3> lo = centers[0], hi = centers[0];
    for (const auto &c : centers)
        for (int d = 0; d < 3; ++d) {
            lo[d] = std::min(lo[d], c[d]);
            hi[d] = std::max(hi[d], c[d]);
        }
    const double cells = double(hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
    const double weight = 1.0 / cells;
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x)
                map[cfg.index(x, y, z)] += weight;
}

std::vector<double> difference_map(const CanvasState &before, const CanvasState &after)
{
    const auto &b = before.occupancy();
    const auto &a = after.occupancy();
    if (a.size() != b.size())
        throw std::invalid_argument("difference_map: states from different canvases");
    std::vector<double> out(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = (a[i] != kEmptyCell && b[i] == kEmptyCell) ? 1.0 : 0.0;
    return out;
}

Environment::Environment(Netlist netlist, CanvasConfig cfg) : netlist_(std::move(netlist)), cfg_(cfg)
{
    cfg_.check();
    auto problems = validate(netlist_, cfg_);
    if (!problems.empty()) {
        std::string msg = "invalid netlist '" + netlist_.name + "':";
        for (const auto &p : problems)
            msg += " " + p + ";";
        throw std::invalid_argument(msg);
    }
    counts_ = net_count_matrix(netlist_);
    std::vector<int> order(netlist_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return netlist_.modules[a].area() > netlist_.modules[b].area();
    });
    order_ = std::make_shared<const std::vector<int>>(std::move(order));
}

CanvasState Environment::reset() const
{
    CanvasState s;
    s.occupancy_.assign(cfg_.cell_count(), kEmptyCell);
    s.positions_.assign(netlist_.modules.size(), std::nullopt);
    s.order_ = order_;
    return s;
}

std::optional<int> Environment::next_module(const CanvasState &s) const
{
    if (s.t() >= module_count())
        return std::nullopt;
    return (*order_)[s.t()];
}

std::vector<std::uint8_t> Environment::legal_mask(const CanvasState &s) const
{
    std::vector<std::uint8_t> mask(cfg_.cell_count(), 0);
    auto next = next_module(s);
    if (!next)
        return mask;
    const auto &m = netlist_.modules[*next];
    const int W = cfg_.width, H = cfg_.height;
    // Per-layer 2D prefix sums of occupied cells.
    std::vector<int> prefix(static_cast<std::size_t>(W + 1) * (H + 1));
    auto at = [&](int x, int y) -> int & { return prefix[static_cast<std::size_t>(y) * (W + 1) + x]; };
    for (int z = 0; z < cfg_.layers; ++z) {
        std::fill(prefix.begin(), prefix.end(), 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                at(x + 1, y + 1) = at(x, y + 1) + at(x + 1, y) - at(x, y) +
                                   (s.occupancy()[cfg_.index(x, y, z)] != kEmptyCell ? 1 : 0);
        for (int y = 0; y + m.height <= H; ++y)
            for (int x = 0; x + m.width <= W; ++x) {
                int used = at(x + m.width, y + m.height) - at(x, y + m.height) - at(x + m.width, y) + at(x, y);
                if (used == 0)
                    mask[cfg_.index(x, y, z)] = 1;
            }
    }
    return mask;
}

std::vector<Anchor> Environment::legal_actions(const CanvasState &s) const
{
    auto mask = legal_mask(s);
    std::vector<Anchor> out;
    for (int x = 0; x < cfg_.width; ++x)
        for (int y = 0; y < cfg_.height; ++y)
            for (int z = 0; z < cfg_.layers; ++z)
                if (mask[cfg_.index(x, y, z)])
                    out.push_back({x, y, z});
    return out;
}

std::array<std::int64_t, 3> Environment::center2(int module, Anchor a) const
{
    const auto &m = netlist_.modules[module];
    return {2LL * a.x + m.width, 2LL * a.y + m.height, 2LL * a.z};
}

namespace {

std::int64_t distance2(const std::array<std::int64_t, 3> &a, const std::array<std::int64_t, 3> &b)
{
    return std::llabs(a[0] - b[0]) + std::llabs(a[1] - b[1]) + 10 * std::llabs(a[2] - b[2]);
}

} // namespace

std::int64_t Environment::placement_cost2(const CanvasState &s, int module, Anchor a) const
{
    const auto c = center2(module, a);
    std::int64_t total = 0;
    for (int b = 0; b < module_count(); ++b) {
        const int weight = counts_(module, b);
        if (weight == 0 || !s.positions()[b])
            continue;
        total += weight * distance2(c, center2(b, *s.positions()[b]));
    }
    return total;
}

std::int64_t Environment::total_wirelength2(const CanvasState &s) const
{
    std::int64_t total = 0;
    const auto &pos = s.positions();
    for (int a = 0; a < module_count(); ++a) {
        if (!pos[a])
            continue;
        for (int b = a + 1; b < module_count(); ++b)
            if (pos[b] && counts_(a, b) > 0)
                total += counts_(a, b) * distance2(center2(a, *pos[a]), center2(b, *pos[b]));
    }
    return total;
}

std::vector<double> Environment::wl_increase_map(const CanvasState &s) const
{
    std::vector<double> out(cfg_.cell_count(), kIllegalMarker);
    auto next = next_module(s);
    if (!next)
        return out;
    const auto mask = legal_mask(s);
    struct Peer
    {
        int weight;
        std::array<std::int64_t, 3> center;
    };
    std::vector<Peer> peers;
    for (int b = 0; b < module_count(); ++b)
        if (s.positions()[b] && counts_(*next, b) > 0)
            peers.push_back({counts_(*next, b), center2(b, *s.positions()[b])});
    for (int z = 0; z < cfg_.layers; ++z)
        for (int y = 0; y < cfg_.height; ++y)
            for (int x = 0; x < cfg_.width; ++x) {
                const auto idx = cfg_.index(x, y, z);
                if (!mask[idx])
                    continue;
                const auto c = center2(*next, {x, y, z});
                std::int64_t total = 0;
                for (const auto &p : peers)
                    total += p.weight * distance2(c, p.center);
                out[idx] = total / 2.0;
            }
    return out;
}

std::vector<double> Environment::congestion_map(const CanvasState &s) const
{
    std::vector<double> map(cfg_.cell_count(), 0.0);
    std::vector<std::array<int, 3>> centers;
    for (const auto &net : netlist_.nets) {
        centers.clear();
        for (int p : net.pins)
            if (const auto &a = s.positions()[p]) {
                const auto &m = netlist_.modules[p];
                centers.push_back({a->x + m.width / 2, a->y + m.height / 2, a->z});
            }
        add_net_density(map, cfg_, centers);
    }
    return map;
}

std::vector<double> Environment::heat_map(const CanvasState &s) const
{
    std::vector<double> heat(cfg_.cell_count(), 0.0);
    const auto &occ = s.occupancy();
    for (int z = 0; z < cfg_.layers; ++z)
        for (int y = 0; y < cfg_.height; ++y)
            for (int x = 0; x < cfg_.width; ++x) {
                if (occ[cfg_.index(x, y, z)] == kEmptyCell)
                    continue;
                heat[cfg_.index(x, y, z)] += heat_kernel(0, 0, 0);
                static constexpr int offsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                                      {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                for (const auto &o : offsets) {
                    int nx = x + o[0], ny = y + o[1], nz = z + o[2];
                    if (nx < 0 || ny < 0 || nz < 0 || nx >= cfg_.width || ny >= cfg_.height || nz >= cfg_.layers)
                        continue;
                    heat[cfg_.index(nx, ny, nz)] += heat_kernel(o[0], o[1], o[2]);
                }
            }
    return heat;
}

namespace {

double max_of(const std::vector<double> &v)
{
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

} // namespace

double Environment::congestion_penalty(const CanvasState &before, const CanvasState &after) const
{
    return std::max(0.0, max_of(congestion_map(after)) - max_of(congestion_map(before)));
}

double Environment::thermal_penalty(const CanvasState &before, const CanvasState &after) const
{
    return std::max(0.0, max_of(heat_map(after)) - max_of(heat_map(before)));
}

Transition Environment::step(const CanvasState &s, Anchor a) const
{
    auto next = next_module(s);
    if (!next)
        throw IllegalAction(IllegalAction::Reason::episode_done, "episode already complete");
    const auto &m = netlist_.modules[*next];
    if (a.x < 0 || a.y < 0 || a.z < 0 || a.x + m.width > cfg_.width || a.y + m.height > cfg_.height ||
        a.z >= cfg_.layers)
        throw IllegalAction(IllegalAction::Reason::out_of_bounds,
                            "out of bounds: module '" + m.name + "' at (" + std::to_string(a.x) + "," +
                                std::to_string(a.y) + "," + std::to_string(a.z) + ")");
    for (int y = a.y; y < a.y + m.height; ++y)
        for (int x = a.x; x < a.x + m.width; ++x)
            if (int owner = s.occupancy()[cfg_.index(x, y, a.z)]; owner != kEmptyCell)
                throw IllegalAction(IllegalAction::Reason::overlap,
                                    "overlap: module '" + m.name + "' at (" + std::to_string(a.x) + "," +
                                        std::to_string(a.y) + "," + std::to_string(a.z) + ") hits '" +
                                        netlist_.modules[owner].name + "'");

    Transition tr;
    CanvasState &n = tr.state;
    n = s;
    tr.delta_wirelength2 = placement_cost2(s, *next, a);
    for (int y = a.y; y < a.y + m.height; ++y)
        for (int x = a.x; x < a.x + m.width; ++x)
            n.occupancy_[cfg_.index(x, y, a.z)] = *next;
    n.positions_[*next] = a;
    n.t_ = s.t_ + 1;
    n.wirelength2_ = s.wirelength2_ + tr.delta_wirelength2;
    n.max_congestion_ = max_of(congestion_map(n));
    n.max_heat_ = max_of(heat_map(n));
    n.failed_ = false;

    tr.reward.w = reward_wl(tr.delta_wirelength2 / 2.0, cfg_);
    tr.reward.c = std::max(0.0, n.max_congestion_ - s.max_congestion_);
    tr.reward.h = std::max(0.0, n.max_heat_ - s.max_heat_);
    tr.done = n.t_ == module_count();
    if (!tr.done && legal_actions(n).empty())
        n.failed_ = true;
    return tr;
}

FeatureMaps Environment::feature_maps(const CanvasState &s, const CanvasState *previous) const
{
    FeatureMaps maps;
    maps.wl_increase = wl_increase_map(s);
    if (previous)
        maps.diff = difference_map(*previous, s);
    else
        maps.diff.assign(cfg_.cell_count(), 0.0);
    return maps;
}

PlacementMetrics Environment::metrics(const CanvasState &s) const
{
    return {s.wirelength2() / 2.0, s.max_congestion(), s.max_heat()};
}

CanvasState Environment::replay(std::span<const Anchor> actions) const
{
    CanvasState s = reset();
    for (const auto &a : actions)
        s = step(s, a).state;
    return s;
}

} // namespace fp3d
