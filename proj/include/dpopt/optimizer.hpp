#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpopt/linalg.hpp"
#include "dpopt/model.hpp"
#include "dpopt/rng.hpp"

namespace dpopt {

enum class OptimizerKind { sgd, rmsprop, adam, adamw };

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::rmsprop: return "rmsprop";
        case OptimizerKind::adam: return "adam";
        default: return "adamw";
    }
}

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    if (s == "adam") return OptimizerKind::adam;
    if (s == "adamw") return OptimizerKind::adamw;
    throw std::invalid_argument("unknown optimizer: " + s);
}

struct DpHyperParams {
    double clip_norm = 10.0;       // S; +inf disables clipping
    double noise_multiplier = 1.0; // sigma0, in units of S
    std::size_t lot_size = 64;     // L (nominal)
    double learning_rate = 1e-3;   // alpha
    double beta1 = 0.9;
    double beta2 = 0.999;
    double stabilizer = 1e-8;
    double weight_decay = 0.0;     // lambda
    double noise_decay = 0.99;     // R, applied once per epoch when adaptive
    OptimizerKind optimizer = OptimizerKind::adamw;
    bool adaptive = false;

    void validate() const {
        if (!(clip_norm > 0.0)) throw std::invalid_argument("hyperparams: clip norm must be positive");
        if (noise_multiplier < 0.0) throw std::invalid_argument("hyperparams: noise multiplier must be nonnegative");
        if (lot_size == 0) throw std::invalid_argument("hyperparams: lot size must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("hyperparams: learning rate must be positive");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw std::invalid_argument("hyperparams: betas must lie in [0,1)");
        if (!(stabilizer > 0.0)) throw std::invalid_argument("hyperparams: stabilizer must be positive");
        if (weight_decay < 0.0) throw std::invalid_argument("hyperparams: weight decay must be nonnegative");
        if (!(noise_decay > 0.0 && noise_decay <= 1.0))
            throw std::invalid_argument("hyperparams: noise decay must lie in (0,1]");
    }
};

struct DpOptimizerState {
    std::size_t t = 0;            // completed steps
    std::vector<double> m;        // first moment
    std::vector<double> v;        // second moment, elementwise nonnegative
    double sigma_sq = 0.0;        // current noise variance multiplier sigma_t^2
    double schedule_pos = 0.0;    // fraction of training elapsed

    static DpOptimizerState init(std::size_t param_count, const DpHyperParams& hp) {
        DpOptimizerState s;
        s.m.assign(param_count, 0.0);
        s.v.assign(param_count, 0.0);
        s.sigma_sq = hp.noise_multiplier * hp.noise_multiplier;
        return s;
    }
};

/// g / max(1, ||g||_2 / S). The scale factor is nudged down by ulps if needed
/// so that factor * ||g|| never exceeds S in double arithmetic.
inline double clip_scale(double norm, double clip_norm) {
    if (!(norm > clip_norm)) return 1.0; // covers clip_norm = +inf
    double f = clip_norm / norm;
    while (f * norm > clip_norm) f = std::nextafter(f, 0.0);
    return f;
}

inline std::vector<double> clip_gradient(std::span<const double> g, double clip_norm) {
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip: norm bound must be positive");
    if (!all_finite(g)) throw std::invalid_argument("clip: non-finite gradient");
    const double f = clip_scale(l2_norm(g), clip_norm);
    std::vector<double> out(g.begin(), g.end());
    if (f != 1.0) {
        for (double& x : out) x *= f;
    }
    return out;
}

struct PrivatizeStats {
    double max_postclip_norm = 0.0; // as tracked by the clipper: factor * ||g||
    std::size_t rows = 0;
};

/// (sum_i clip(g_i, S) + z) / L with z ~ N(0, sigma_sq * S^2 * I); one fresh
/// Gaussian vector per lot. Divides by the nominal lot size L, not the
/// realized row count.
inline std::vector<double> privatize(const PerExampleGradients& grads, double clip_norm,
                                     double sigma_sq, std::size_t nominal_lot_size,
                                     RngStream& rng, PrivatizeStats* stats = nullptr) {
    if (nominal_lot_size == 0) throw std::invalid_argument("privatize: nominal lot size must be >= 1");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("privatize: clip norm must be positive");
    if (sigma_sq < 0.0) throw std::invalid_argument("privatize: noise variance must be nonnegative");
    if (sigma_sq > 0.0 && !std::isfinite(clip_norm))
        throw std::invalid_argument("privatize: noise scale undefined for an infinite clip norm");

    const std::size_t p_count = grads.grads.cols;
    std::vector<double> sum(p_count, 0.0);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < grads.grads.rows; ++i) {
        const auto row = grads.grads.row(i);
        const double norm = l2_norm(row);
        if (!std::isfinite(norm)) throw std::invalid_argument("privatize: non-finite gradient row");
        const double f = clip_scale(norm, clip_norm);
        max_norm = std::max(max_norm, f * norm);
        for (std::size_t j = 0; j < p_count; ++j) sum[j] += f * row[j];
    }
    if (sigma_sq > 0.0) {
        const double noise_std = std::sqrt(sigma_sq) * clip_norm;
        for (double& x : sum) x += noise_std * rng.gaussian();
    }
    const double inv_l = 1.0 / static_cast<double>(nominal_lot_size);
    for (double& x : sum) x *= inv_l;
    if (stats) {
        stats->max_postclip_norm = max_norm;
        stats->rows = grads.grads.rows;
    }
    return sum;
}

/// sigma_{t+1}^2 = R * sigma_t^2; applied once per epoch in adaptive runs.
inline double decay_noise(double sigma_sq, double decay) {
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay_noise: R must lie in (0,1]");
    return decay * sigma_sq;
}

/// One-cycle multiplier: linear ramp from 1/25 to 1 over the first 30% of
/// steps, then cosine decay from 1 down to 1e-4 at the final step.
inline double one_cycle_multiplier(std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) throw std::invalid_argument("one_cycle: total_steps must be >= 1");
    if (step > total_steps) throw std::invalid_argument("one_cycle: step beyond total_steps");
    constexpr double start = 1.0 / 25.0;
    constexpr double end = 1e-4;
    constexpr double warm_frac = 0.3;
    const double warm = warm_frac * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (s <= warm) {
        return start + (1.0 - start) * (s / warm);
    }
    const double progress = (s - warm) / (static_cast<double>(total_steps) - warm);
    return end + (1.0 - end) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

enum class ScheduleKind { constant, one_cycle };

inline const char* to_string(ScheduleKind k) {
    return k == ScheduleKind::constant ? "constant" : "one-cycle";
}

/// One update of the chosen optimizer with the privatized gradient g_tilde.
/// The step counter is incremented first so bias correction sees t >= 1.
/// For adamw the decayed weight uses the pre-update parameters and is scaled
/// by eta_t only, not by the learning rate; adam folds the decay into the
/// gradient instead (coupled form).
inline void optimizer_step(DpOptimizerState& state, std::vector<double>& params,
                           std::span<const double> g_tilde, const DpHyperParams& hp,
                           double eta_t) {
    const std::size_t p_count = params.size();
    if (g_tilde.size() != p_count || state.m.size() != p_count || state.v.size() != p_count)
        throw std::invalid_argument("optimizer_step: size mismatch");

    state.t += 1;
    const double td = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(hp.beta1, td);
    const double bc2 = 1.0 - std::pow(hp.beta2, td);
    const double alpha = hp.learning_rate;

    bool finite = true;
    switch (hp.optimizer) {
        case OptimizerKind::sgd:
            for (std::size_t i = 0; i < p_count; ++i) {
                params[i] -= eta_t * (alpha * g_tilde[i]);
                finite &= std::isfinite(params[i]);
            }
            break;
        case OptimizerKind::rmsprop:
            for (std::size_t i = 0; i < p_count; ++i) {
                const double g = g_tilde[i];
                state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
                const double v_hat = state.v[i] / bc2;
                params[i] -= eta_t * (alpha * g / (std::sqrt(v_hat) + hp.stabilizer));
                finite &= std::isfinite(params[i]);
            }
            break;
        case OptimizerKind::adam:
            for (std::size_t i = 0; i < p_count; ++i) {
                const double g = g_tilde[i] + hp.weight_decay * params[i];
                state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
                state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
                const double m_hat = state.m[i] / bc1;
                const double v_hat = state.v[i] / bc2;
                params[i] -= eta_t * (alpha * m_hat / (std::sqrt(v_hat) + hp.stabilizer));
                finite &= std::isfinite(params[i]);
            }
            break;
        case OptimizerKind::adamw:
            for (std::size_t i = 0; i < p_count; ++i) {
                const double g = g_tilde[i];
                const double theta_prev = params[i];
                state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
                state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
                const double m_hat = state.m[i] / bc1;
                const double v_hat = state.v[i] / bc2;
                params[i] -= eta_t * (alpha * m_hat / (std::sqrt(v_hat) + hp.stabilizer) +
                                      hp.weight_decay * theta_prev);
                finite &= std::isfinite(params[i]);
            }
            break;
    }

    if (!finite) {
        double max_abs = 0.0;
        for (double g : g_tilde) max_abs = std::max(max_abs, std::abs(g));
        throw std::runtime_error("optimizer_step: non-finite update at step " +
                                 std::to_string(state.t) + ", max |g~| = " +
                                 std::to_string(max_abs));
    }
}

} // namespace dpopt
