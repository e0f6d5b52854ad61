#pragma once

#include "fp3d/environment.hpp"
#include "fp3d/geometry.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace fp3d {

inline constexpr int kPoolGrid = 6;
/// Normalized RTG features are clipped to +-this.
inline constexpr double kRtgFeatureClip = 10.0;

/// Mean and population standard deviation of episode returns.
struct RtgStats
{
    Rtg mean{0.0, 0.0, 0.0};
    Rtg stddev{1.0, 1.0, 1.0};

    /// Per-component divisor for critic targets: max(|mean|, 1e-6).
    [[nodiscard]] Rtg critic_scale() const;
    [[nodiscard]] Rtg to_critic_units(const Rtg &g) const;
    [[nodiscard]] Rtg from_critic_units(const Rtg &g) const;

    friend bool operator==(const RtgStats &, const RtgStats &) = default;
};

/// 108 * Z + 13.
int feature_length(const CanvasConfig &cfg);

/// Half-open cell range covered by pooling tile `tile` of `kPoolGrid` along
/// an axis of `extent` cells. Tiles are never empty.
std::pair<int, int> pool_bounds(int tile, int extent);

/// Layout: pooled occupancy, pooled wirelength-increase map (v -> D/(D+v),
/// illegal -> 0), pooled difference map (each Z x 6 x 6, layer-major), next
/// module (w/W, h/H, area/(W*H), degree/max degree), unplaced modules
/// (count fraction, area fraction), normalized RTG (3), t/n, previous action
/// normalized (3).
std::vector<double> features(const Environment &env, const CanvasState &s, const FeatureMaps &maps, const Rtg &rtg,
                             const RtgStats &stats, std::optional<Anchor> prev);

/// Offset of the normalized-RTG block in the feature vector.
int rtg_feature_offset(const CanvasConfig &cfg);

} // namespace fp3d
