#pragma once

#include "fp3d/geometry.hpp"
#include "fp3d/netlist.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fp3d {

inline constexpr int kEmptyCell = -1;
inline constexpr double kIllegalMarker = std::numeric_limits<double>::infinity();

/// Immutable snapshot of a partially placed canvas. Produced by
/// Environment::reset and Environment::step only.
class CanvasState
{
  public:
    /// Number of modules placed so far.
    [[nodiscard]] int t() const { return t_; }
    /// Module id occupying each cell (`kEmptyCell` when free), indexed by
    /// CanvasConfig::index.
    [[nodiscard]] const std::vector<int> &occupancy() const { return occupancy_; }
    [[nodiscard]] const std::vector<std::optional<Anchor>> &positions() const { return positions_; }
    [[nodiscard]] const std::vector<int> &placed_order() const { return *order_; }

    /// Total wirelength in doubled units (exact).
    [[nodiscard]] std::int64_t wirelength2() const { return wirelength2_; }
    [[nodiscard]] double max_congestion() const { return max_congestion_; }
    [[nodiscard]] double max_heat() const { return max_heat_; }

    /// Set when a mid-episode state has no legal anchor for its next module.
    [[nodiscard]] bool failed() const { return failed_; }

    friend bool operator==(const CanvasState &a, const CanvasState &b)
    {
        return a.t_ == b.t_ && a.occupancy_ == b.occupancy_ && a.positions_ == b.positions_;
    }

  private:
    friend class Environment;

    int t_ = 0;
    std::vector<int> occupancy_;
    std::vector<std::optional<Anchor>> positions_;
    std::shared_ptr<const std::vector<int>> order_;
    std::int64_t wirelength2_ = 0;
    double max_congestion_ = 0.0;
    double max_heat_ = 0.0;
    bool failed_ = false;
};

class IllegalAction : public std::runtime_error
{
  public:
    enum class Reason { out_of_bounds, overlap, episode_done };
    IllegalAction(Reason reason, const std::string &what) : std::runtime_error(what), reason_(reason) {}
    [[nodiscard]] Reason reason() const { return reason_; }

  private:
    Reason reason_;
};

struct Transition
{
    CanvasState state;
    RewardVector reward;
    bool done = false;
    /// Wirelength added by this step, doubled units.
    std::int64_t delta_wirelength2 = 0;
};

/// Per-step spatial features, each Z*H*W in CanvasConfig::index order.
struct FeatureMaps
{
    /// Wirelength increase (reported units) for placing the next module at
    /// each anchor; kIllegalMarker where illegal.
    std::vector<double> wl_increase;
    /// 1 on cells newly occupied by the previous transition.
    std::vector<double> diff;
};

struct PlacementMetrics
{
    double total_wirelength = 0.0; // reported (halved) units
    double max_congestion = 0.0;
    double max_heat = 0.0;
};

/// w = D / (D + delta), D = canvas span. `delta` in reported units.
double reward_wl(double delta_wirelength, const CanvasConfig &cfg);

/// Thermal kernel weight for a cell offset.
double heat_kernel(int dx, int dy, int dz);

/// Adds 1/|box| to every cell of the inclusive bounding box of `centers`
/// (cell coordinates). No-op for fewer than two centers.
void add_net_density(std::vector<double> &map, const CanvasConfig &cfg, std::span<const std::array<int, 3>> centers);

/// 1 exactly on the cells that are occupied in `after` but not in `before`.
std::vector<double> difference_map(const CanvasState &before, const CanvasState &after);

/// Deterministic floorplanning environment over one netlist and canvas.
/// Modules are placed in decreasing-area order (ties by id), one per step.
class Environment
{
  public:
    /// Throws std::invalid_argument listing validation failures.
    Environment(Netlist netlist, CanvasConfig cfg);

    [[nodiscard]] const Netlist &netlist() const { return netlist_; }
    [[nodiscard]] const CanvasConfig &canvas() const { return cfg_; }
    [[nodiscard]] const NetCountMatrix &net_counts() const { return counts_; }
    [[nodiscard]] const std::vector<int> &order() const { return *order_; }
    [[nodiscard]] int module_count() const { return netlist_.size(); }

    [[nodiscard]] CanvasState reset() const;

    /// Module placed by the next step, if any.
    [[nodiscard]] std::optional<int> next_module(const CanvasState &s) const;

    /// Legal anchors for the next module, ascending (x, y, z).
    [[nodiscard]] std::vector<Anchor> legal_actions(const CanvasState &s) const;
    /// 1 at legal anchors, Z*H*W.
    [[nodiscard]] std::vector<std::uint8_t> legal_mask(const CanvasState &s) const;

    /// Places the next module. Throws IllegalAction on out-of-bounds,
    /// overlap, or a finished episode. When the resulting state is not
    /// done and admits no legal anchor, it is marked failed.
    [[nodiscard]] Transition step(const CanvasState &s, Anchor a) const;

    /// From-scratch pairwise wirelength, doubled units.
    [[nodiscard]] std::int64_t total_wirelength2(const CanvasState &s) const;
    [[nodiscard]] double total_wirelength(const CanvasState &s) const { return total_wirelength2(s) / 2.0; }

    [[nodiscard]] std::vector<double> wl_increase_map(const CanvasState &s) const;
    [[nodiscard]] std::vector<double> congestion_map(const CanvasState &s) const;
    [[nodiscard]] std::vector<double> heat_map(const CanvasState &s) const;

    [[nodiscard]] double congestion_penalty(const CanvasState &before, const CanvasState &after) const;
    [[nodiscard]] double thermal_penalty(const CanvasState &before, const CanvasState &after) const;

    /// Maps seen before choosing the next action; `previous` is the state
    /// one step earlier (nullptr at t = 0).
    [[nodiscard]] FeatureMaps feature_maps(const CanvasState &s, const CanvasState *previous) const;

    [[nodiscard]] PlacementMetrics metrics(const CanvasState &s) const;

    /// Module center in doubled units: (2x + w, 2y + h, 2z).
    [[nodiscard]] std::array<std::int64_t, 3> center2(int module, Anchor a) const;

    /// Replays a full or partial action sequence from reset. Throws
    /// IllegalAction if any action is illegal.
    [[nodiscard]] CanvasState replay(std::span<const Anchor> actions) const;

  private:
    [[nodiscard]] std::int64_t placement_cost2(const CanvasState &s, int module, Anchor a) const;

    Netlist netlist_;
    CanvasConfig cfg_;
    NetCountMatrix counts_;
    std::shared_ptr<const std::vector<int>> order_;
};

} // namespace fp3d
