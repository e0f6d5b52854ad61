#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fp3d {

/// Discrete placement canvas: Z stacked layers of H x W cells.
struct CanvasConfig
{
    int width = 48;
    int height = 48;
    int layers = 3;

    /// Largest 3D Manhattan distance between two cells, with the 10x
    /// vertical weight. Normalizes the wirelength score.
    [[nodiscard]] double span() const { return (width - 1) + (height - 1) + 10.0 * (layers - 1); }

    [[nodiscard]] std::size_t cell_count() const
    {
        return static_cast<std::size_t>(width) * height * layers;
    }

    [[nodiscard]] std::size_t index(int x, int y, int z) const
    {
        return (static_cast<std::size_t>(z) * height + y) * width + x;
    }

    /// Throws std::invalid_argument unless W,H >= 4 and Z >= 1.
    void check() const;

    /// "WxHxZ", e.g. "48x48x3".
    [[nodiscard]] std::string to_string() const;
    static CanvasConfig parse(const std::string &text);

    friend bool operator==(const CanvasConfig &, const CanvasConfig &) = default;
};

/// Minimum-x, minimum-y corner of a module footprint on layer z.
struct Anchor
{
    int x = 0;
    int y = 0;
    int z = 0;

    friend auto operator<=>(const Anchor &, const Anchor &) = default;
};

/// Per-step reward (w, c, h): wirelength score, congestion penalty,
/// thermal penalty.
struct RewardVector
{
    double w = 0.0;
    double c = 0.0;
    double h = 0.0;

    friend bool operator==(const RewardVector &, const RewardVector &) = default;
};

/// A return-to-go triple, ordered (w, c, h).
using Rtg = std::array<double, 3>;

inline Rtg to_rtg(const RewardVector &r) { return {r.w, r.c, r.h}; }

} // namespace fp3d
