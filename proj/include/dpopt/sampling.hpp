#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpopt/rng.hpp"

namespace dpopt {

struct ClassCounts {
    std::map<int, std::size_t> counts;
    std::size_t total = 0;

    static ClassCounts from_labels(const std::vector<int>& labels) {
        ClassCounts c;
        for (int y : labels) {
            ++c.counts[y];
            ++c.total;
        }
        return c;
    }
};

/// Class weights w_c = M / (K * M_c); the minority class gets the larger
/// weight and the count-weighted mean over the dataset is exactly 1.
inline std::map<int, double> class_weights(const ClassCounts& counts) {
    if (counts.counts.size() < 2) throw std::invalid_argument("class_weights: need at least 2 classes");
    const double m = static_cast<double>(counts.total);
    const double k = static_cast<double>(counts.counts.size());
    std::map<int, double> weights;
    for (const auto& [cls, n] : counts.counts) {
        if (n == 0) throw std::invalid_argument("class_weights: class " + std::to_string(cls) + " has no samples");
        weights[cls] = m / (k * static_cast<double>(n));
    }
    return weights;
}

/// Draws n indices with replacement, each sample weighted 1 / M_{class}.
/// Equivalently: pick a class uniformly, then a uniform member of it, so the
/// expected class frequency among draws is uniform.
inline std::vector<std::size_t> weighted_sample_indices(const std::vector<int>& labels,
                                                        std::size_t n_draws,
                                                        RngStream& rng) {
    if (labels.empty()) throw std::invalid_argument("weighted sampler: empty label vector");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::vector<const std::vector<std::size_t>*> classes;
    classes.reserve(by_class.size());
    for (const auto& [cls, members] : by_class) classes.push_back(&members);

    std::vector<std::size_t> out;
    out.reserve(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) {
        const auto& members = *classes[rng.uniform_below(classes.size())];
        out.push_back(members[rng.uniform_below(members.size())]);
    }
    return out;
}

enum class LotMode { poisson, shuffle, weighted };

inline const char* to_string(LotMode m) {
    switch (m) {
        case LotMode::poisson: return "poisson";
        case LotMode::shuffle: return "shuffle";
        default: return "weighted";
    }
}

/// Produces the lot of sample indices for each (epoch, step). Poisson mode
/// includes each sample independently with probability q = L/N; shuffle mode
/// deals consecutive chunks of a fresh per-epoch permutation; weighted mode
/// draws L samples with replacement under the imbalance-correcting weights.
/// Lots depend only on (seed, epoch, step), never on call order.
class LotSampler {
public:
    LotSampler(LotMode mode, std::size_t dataset_size, std::size_t lot_size,
               std::uint64_t seed, std::vector<int> labels = {})
        : mode_(mode), n_(dataset_size), lot_size_(lot_size), seed_(seed),
          labels_(std::move(labels)) {
        if (n_ == 0) throw std::invalid_argument("lot sampler: empty dataset");
        if (lot_size_ == 0) throw std::invalid_argument("lot sampler: lot size must be >= 1");
        if (mode_ == LotMode::weighted && labels_.size() != n_)
            throw std::invalid_argument("lot sampler: weighted mode needs one label per sample");
    }

    /// One epoch covers the dataset once in expectation: round(N / L) steps
    /// (exact chunk count in shuffle mode).
    std::size_t steps_per_epoch() const {
        if (mode_ == LotMode::shuffle) return std::max<std::size_t>(1, n_ / lot_size_);
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
            static_cast<double>(n_) / static_cast<double>(lot_size_))));
    }

    double sampling_rate() const {
        return std::min(1.0, static_cast<double>(lot_size_) / static_cast<double>(n_));
    }

    std::vector<std::size_t> lot(std::size_t epoch, std::size_t step) const {
        switch (mode_) {
            case LotMode::poisson: {
                RngStream rng(seed_, 0x706f6973ULL, epoch, step); // "pois"
                const double q = sampling_rate();
                std::vector<std::size_t> idx;
                idx.reserve(lot_size_ + lot_size_ / 2 + 8);
                for (std::size_t i = 0; i < n_; ++i) {
                    if (rng.uniform() < q) idx.push_back(i);
                }
                return idx;
            }
            case LotMode::shuffle: {
                const auto perm = epoch_permutation(epoch);
                const std::size_t begin = step * lot_size_;
                if (begin >= n_) return {};
                const std::size_t end = std::min(begin + lot_size_, n_);
                return {perm.begin() + begin, perm.begin() + end};
            }
            default: {
                RngStream rng(seed_, 0x777273ULL, epoch, step); // "wrs"
                return weighted_sample_indices(labels_, lot_size_, rng);
            }
        }
    }

private:
    std::vector<std::size_t> epoch_permutation(std::size_t epoch) const {
        std::vector<std::size_t> perm(n_);
        std::iota(perm.begin(), perm.end(), 0);
        RngStream rng(seed_, 0x73687566ULL, epoch, 0); // "shuf"
        for (std::size_t i = n_; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
        }
        return perm;
    }

    LotMode mode_;
    std::size_t n_;
    std::size_t lot_size_;
    std::uint64_t seed_;
    std::vector<int> labels_;
};

} // namespace dpopt
