#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dpopt/accountant.hpp"
#include "dpopt/dataset.hpp"
#include "dpopt/model.hpp"
#include "dpopt/optimizer.hpp"
#include "dpopt/sampling.hpp"

namespace dpopt {

/// What the training loop tells a privacy accountant at the end of each
/// epoch: how many lots it released and at which noise level.
class TrainingAccountant {
public:
    virtual ~TrainingAccountant() = default;
    virtual void record_epoch(std::size_t steps, double q, double sigma_sq) = 0;
    virtual PrivacyReport report(double delta) const = 0;
};

class RdpTrainingAccountant final : public TrainingAccountant {
public:
    explicit RdpTrainingAccountant(std::vector<double> orders = default_rdp_orders())
        : acc_(std::move(orders)) {}

    void record_epoch(std::size_t steps, double q, double sigma_sq) override {
        acc_.add_steps(steps, q, std::sqrt(sigma_sq));
    }
    PrivacyReport report(double delta) const override { return acc_.report(delta); }

    const RdpAccountant& accountant() const { return acc_; }

private:
    RdpAccountant acc_;
};

class TcdpTrainingAccountant final : public TrainingAccountant {
public:
    TcdpTrainingAccountant(std::size_t lot_size, std::size_t dataset_size, double clip,
                           double decay, double sigma0)
        : acc_(lot_size, dataset_size, clip, decay, sigma0) {}

    void record_epoch(std::size_t /*steps*/, double /*q*/, double sigma_sq) override {
        acc_.record_epoch(sigma_sq);
    }
    PrivacyReport report(double delta) const override { return acc_.report(delta); }

    const TcdpAccountant& accountant() const { return acc_; }

private:
    TcdpAccountant acc_;
};

struct EpochStats {
    double mean_loss = 0.0;
    std::size_t steps = 0;
    std::size_t empty_lots = 0;
    double sigma_sq_start = 0.0;
    double sigma_sq_end = 0.0;
    double max_postclip_norm = 0.0;
};

struct TrainPlan {
    std::size_t epochs = 1;
    ScheduleKind schedule = ScheduleKind::one_cycle;
    LotMode lot_mode = LotMode::poisson;
    double epsilon_cap = 0.0; // 0 disables the budget check
    double delta = 1e-5;      // used for the cap check only
    std::map<int, double> class_weight; // empty unless class weighting is on
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    bool halted_on_budget = false;
};

namespace detail {

inline Batch make_lot_batch(const Dataset& data, const std::vector<std::size_t>& idx,
                            const std::map<int, double>& class_weight) {
    Batch b;
    b.features = Matrix(idx.size(), data.dim());
    b.labels.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = data.features.row(idx[r]);
        std::copy(src.begin(), src.end(), b.features.row(r).begin());
        b.labels.push_back(data.labels[idx[r]]);
    }
    if (!class_weight.empty()) {
        b.sample_weights.reserve(idx.size());
        for (int y : b.labels) b.sample_weights.push_back(class_weight.at(y));
    }
    return b;
}

} // namespace detail

/// One epoch of the DP pipeline: sample lot, per-example gradients, clip +
/// noise, optimizer update. When hp.adaptive, noise variance decays once at
/// epoch end and the accountant is informed of the variance the epoch ran at.
inline EpochStats train_epoch(const Model& model, ModelParams& params, const Dataset& data,
                              const DpHyperParams& hp, DpOptimizerState& state,
                              const LotSampler& sampler, std::size_t epoch,
                              std::size_t total_steps, const TrainPlan& plan,
                              std::uint64_t seed, TrainingAccountant* accountant) {
    EpochStats stats;
    stats.sigma_sq_start = state.sigma_sq;
    const std::size_t steps = sampler.steps_per_epoch();
    const auto mask = model.trainable_mask();
    bool any_frozen = false;
    for (auto m : mask) any_frozen |= (m == 0);

    double loss_sum = 0.0;
    std::size_t samples_seen = 0;
    std::vector<double> frozen_snapshot;

    for (std::size_t s = 0; s < steps; ++s) {
        const auto idx = sampler.lot(epoch, s);
        if (idx.empty()) {
            ++stats.empty_lots;
            continue;
        }
        const Batch lot = detail::make_lot_batch(data, idx, plan.class_weight);
        const PerExampleGradients grads = model.loss_and_per_example_grads(params, lot);

        RngStream noise_rng(seed, 0x6e6f6973ULL, epoch, s); // "nois"
        PrivatizeStats pstats;
        std::vector<double> g_tilde =
            privatize(grads, hp.clip_norm, state.sigma_sq, hp.lot_size, noise_rng, &pstats);
        stats.max_postclip_norm = std::max(stats.max_postclip_norm, pstats.max_postclip_norm);

        if (any_frozen) {
            frozen_snapshot = params.values;
            for (std::size_t i = 0; i < g_tilde.size(); ++i) {
                if (!mask[i]) g_tilde[i] = 0.0;
            }
        }

        const std::size_t global_step = epoch * steps + s;
        const double eta = plan.schedule == ScheduleKind::one_cycle
                               ? one_cycle_multiplier(global_step, total_steps)
                               : 1.0;
        optimizer_step(state, params.values, g_tilde, hp, eta);
        state.schedule_pos = static_cast<double>(global_step + 1) / static_cast<double>(total_steps);

        if (any_frozen) {
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (!mask[i]) params.values[i] = frozen_snapshot[i];
            }
        }

        for (double l : grads.loss_values) loss_sum += l;
        samples_seen += idx.size();
        ++stats.steps;
    }

    if (accountant) accountant->record_epoch(steps, sampler.sampling_rate(), stats.sigma_sq_start);
    if (hp.adaptive) state.sigma_sq = decay_noise(state.sigma_sq, hp.noise_decay);

    stats.sigma_sq_end = state.sigma_sq;
    stats.mean_loss = samples_seen > 0 ? loss_sum / static_cast<double>(samples_seen) : 0.0;
    return stats;
}

/// Full training run. Halts early with a partial result when an epsilon cap
/// is configured and the accountant reports it exceeded.
inline TrainResult train(const Model& model, ModelParams& params, const Dataset& data,
                         const DpHyperParams& hp, DpOptimizerState& state,
                         const TrainPlan& plan, std::uint64_t seed,
                         TrainingAccountant* accountant) {
    hp.validate();
    if (plan.epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
    LotSampler sampler(plan.lot_mode, data.size(), hp.lot_size, seed, data.labels);
    const std::size_t total_steps = plan.epochs * sampler.steps_per_epoch();

    TrainResult result;
    for (std::size_t e = 0; e < plan.epochs; ++e) {
        result.epochs.push_back(
            train_epoch(model, params, data, hp, state, sampler, e, total_steps, plan, seed, accountant));
        if (plan.epsilon_cap > 0.0 && accountant &&
            accountant->report(plan.delta).epsilon > plan.epsilon_cap) {
            result.halted_on_budget = true;
            break;
        }
    }
    return result;
}

} // namespace dpopt
