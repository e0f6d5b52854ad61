#pragma once

// Continuous-to-discrete action machinery: a proposal in [0,1]^3 is
// projected onto its k nearest legal anchors, and the critic's return
// predictions pick one of them.

#include "fp3d/geometry.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fp3d {

struct ContinuousAction
{
    std::array<double, 3> v{0.0, 0.0, 0.0};

    double &operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    friend bool operator==(const ContinuousAction &, const ContinuousAction &) = default;
};

/// (x/(W-1), y/(H-1), z/(Z-1)); the z component is 0 on a single layer.
ContinuousAction normalize(Anchor a, const CanvasConfig &cfg);

double distance(const ContinuousAction &a, const ContinuousAction &b);

struct Candidate
{
    Anchor anchor;
    double distance = 0.0;
};

struct CandidateSet
{
    /// Nearest first; ties by ascending (x, y, z).
    std::vector<Candidate> candidates;
    /// Distance from the proposal to its nearest candidate.
    double psi_k = 0.0;
};

/// Exact k nearest legal anchors to `proposal` in normalized Euclidean
/// distance. Returns min(k, |legal|) candidates. Throws
/// std::invalid_argument on an empty legal set or k < 1.
CandidateSet knn(const ContinuousAction &proposal, std::span<const Anchor> legal, int k, const CanvasConfig &cfg);

/// Index of the prediction with smallest weighted L1 distance to `target`;
/// ties go to the smallest index. Throws on an empty prediction list.
std::size_t select_action(std::span<const Rtg> predictions, const Rtg &target, const Rtg &weights = {1.0, 1.0, 1.0});

} // namespace fp3d
