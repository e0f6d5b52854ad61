#include "fp3d/features.hpp"

#include "fp3d/sldas.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fp3d {

Rtg RtgStats::critic_scale() const
{
    Rtg s{};
    for (int d = 0; d < 3; ++d)
        s[d] = std::max(std::abs(mean[d]), 1e-6);
    return s;
}

Rtg RtgStats::to_critic_units(const Rtg &g) const
{
    const Rtg s = critic_scale();
    return {g[0] / s[0], g[1] / s[1], g[2] / s[2]};
}

Rtg RtgStats::from_critic_units(const Rtg &g) const
{
    const Rtg s = critic_scale();
    return {g[0] * s[0], g[1] * s[1], g[2] * s[2]};
}

int feature_length(const CanvasConfig &cfg) { return 108 * cfg.layers + 13; }

int rtg_feature_offset(const CanvasConfig &cfg) { return 108 * cfg.layers + 6; }

std::pair<int, int> pool_bounds(int tile, int extent)
{
    int lo = tile * extent / kPoolGrid;
    int hi = (tile + 1) * extent / kPoolGrid;
    lo = std::min(lo, extent - 1);
    return {lo, std::max(hi, lo + 1)};
}

namespace {

template <typename CellValue>
void pool_into(std::vector<double> &out, const CanvasConfig &cfg, CellValue value)
{
    for (int z = 0; z < cfg.layers; ++z)
        for (int ty = 0; ty < kPoolGrid; ++ty) {
            const auto [y0, y1] = pool_bounds(ty, cfg.height);
            for (int tx = 0; tx < kPoolGrid; ++tx) {
                const auto [x0, x1] = pool_bounds(tx, cfg.width);
                double sum = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        sum += value(cfg.index(x, y, z));
                out.push_back(sum / double((y1 - y0) * (x1 - x0)));
            }
        }
}

} // namespace

std::vector<double> features(const Environment &env, const CanvasState &s, const FeatureMaps &maps, const Rtg &rtg,
                             const RtgStats &stats, std::optional<Anchor> prev)
{
    const auto &cfg = env.canvas();
    const auto next = env.next_module(s);
    if (!next)
        throw std::invalid_argument("features: episode already complete");
    if (maps.wl_increase.size() != cfg.cell_count() || maps.diff.size() != cfg.cell_count())
        throw std::invalid_argument("features: feature maps do not match the canvas");

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(feature_length(cfg)));
    const auto &occ = s.occupancy();
    const double span = cfg.span();
    pool_into(out, cfg, [&](std::size_t i) { return occ[i] != kEmptyCell ? 1.0 : 0.0; });
    pool_into(out, cfg, [&](std::size_t i) {
        const double v = maps.wl_increase[i];
        return std::isfinite(v) ? span / (span + v) : 0.0;
    });
    pool_into(out, cfg, [&](std::size_t i) { return maps.diff[i]; });

    const auto &netlist = env.netlist();
    const auto &m = netlist.modules[*next];
    const double canvas_area = double(cfg.width) * cfg.height;
    const int max_degree = env.net_counts().max_degree();
    out.push_back(double(m.width) / cfg.width);
    out.push_back(double(m.height) / cfg.height);
    out.push_back(m.area() / canvas_area);
    out.push_back(max_degree > 0 ? double(env.net_counts().degree(*next)) / max_degree : 0.0);

    double total_area = 0.0, unplaced_area = 0.0;
    int unplaced = 0;
    for (const auto &mod : netlist.modules) {
        total_area += mod.area();
        if (!s.positions()[mod.id]) {
            unplaced_area += mod.area();
            ++unplaced;
        }
    }
    out.push_back(double(unplaced) / netlist.size());
    out.push_back(unplaced_area / total_area);

    for (int d = 0; d < 3; ++d) {
        const double z = (rtg[d] - stats.mean[d]) / std::max(stats.stddev[d], 1e-6);
        out.push_back(std::clamp(z, -kRtgFeatureClip, kRtgFeatureClip));
    }
    out.push_back(double(s.t()) / netlist.size());
    const ContinuousAction p = prev ? normalize(*prev, cfg) : ContinuousAction{};
    for (int d = 0; d < 3; ++d)
        out.push_back(p[d]);
    return out;
}

} // namespace fp3d
