#include "fp3d/sldas.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fp3d {

ContinuousAction normalize(Anchor a, const CanvasConfig &cfg)
{
    ContinuousAction out;
    out[0] = cfg.width > 1 ? double(a.x) / (cfg.width - 1) : 0.0;
    out[1] = cfg.height > 1 ? double(a.y) / (cfg.height - 1) : 0.0;
    out[2] = cfg.layers > 1 ? double(a.z) / (cfg.layers - 1) : 0.0;
    return out;
}

double distance(const ContinuousAction &a, const ContinuousAction &b)
{
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

CandidateSet knn(const ContinuousAction &proposal, std::span<const Anchor> legal, int k, const CanvasConfig &cfg)
{
    if (legal.empty())
        throw std::invalid_argument("knn: empty legal action set");
    if (k < 1)
        throw std::invalid_argument("knn: k must be >= 1");

    auto closer = [](const Candidate &a, const Candidate &b) {
        if (a.distance != b.distance)
            return a.distance < b.distance;
        return a.anchor < b.anchor;
    };
    // Bounded max-heap of the best k seen so far.
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), legal.size());
    std::vector<Candidate> heap;
    heap.reserve(keep + 1);
    for (const auto &a : legal) {
        Candidate c{a, distance(normalize(a, cfg), proposal)};
        if (heap.size() < keep) {
            heap.push_back(c);
            std::push_heap(heap.begin(), heap.end(), closer);
        } else if (closer(c, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), closer);
            heap.back() = c;
            std::push_heap(heap.begin(), heap.end(), closer);
        }
    }
    std::sort_heap(heap.begin(), heap.end(), closer);
    CandidateSet out;
    out.candidates = std::move(heap);
    out.psi_k = out.candidates.front().distance;
    return out;
}

std::size_t select_action(std::span<const Rtg> predictions, const Rtg &target, const Rtg &weights)
{
    if (predictions.empty())
        throw std::invalid_argument("select_action: no predictions");
    std::size_t best = 0;
    double best_err = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double err = 0.0;
        for (int d = 0; d < 3; ++d)
            err += weights[d] * std::abs(predictions[i][d] - target[d]);
        if (i == 0 || err < best_err) {
            best = i;
            best_err = err;
        }
    }
    return best;
}

} // namespace fp3d
