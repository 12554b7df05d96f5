#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpopt/format.hpp"
#include "dpopt/linalg.hpp"

namespace dpopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Renyi divergences
// ---------------------------------------------------------------------------

/// Renyi divergence of order alpha between two discrete distributions:
/// (1/(alpha-1)) * ln sum_i p_i^alpha / q_i^(alpha-1).
/// Returns +inf when alpha > 1 and q lacks mass somewhere p has it.
/// alpha must be positive and != 1; use kl_divergence for the alpha -> 1 limit.
inline double renyi_divergence_discrete(std::span<const double> p,
                                        std::span<const double> q,
                                        double alpha) {
    if (p.size() != q.size()) throw std::invalid_argument("renyi divergence: length mismatch");
    if (alpha <= 0.0) throw std::invalid_argument("renyi divergence: alpha must be positive");
    if (alpha == 1.0) throw std::invalid_argument("renyi divergence: alpha = 1 (use kl_divergence)");
    double psum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("renyi divergence: negative entry");
        psum += p[i];
    }
    if (std::abs(psum - 1.0) > 1e-6) throw std::invalid_argument("renyi divergence: p must sum to 1");

    std::vector<double> log_terms;
    log_terms.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue; // 0/0 convention
        if (q[i] == 0.0) {
            if (alpha > 1.0) return kInf;
            continue; // q^(1-alpha) = 0 for alpha < 1
        }
        log_terms.push_back(alpha * std::log(p[i]) - (alpha - 1.0) * std::log(q[i]));
    }
    return log_sum_exp(log_terms) / (alpha - 1.0);
}

/// KL(p || q), the alpha -> 1 limit of the Renyi divergence.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl divergence: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("kl divergence: negative entry");
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return kInf;
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

/// Closed-form Renyi divergence of order alpha between N(mu_shift, sigma^2)
/// and N(0, sigma^2): alpha * mu_shift^2 / (2 sigma^2). Used as the analytic
/// oracle for the discrete divergence on finely discretized Gaussians.
inline double gaussian_renyi_divergence(double mu_shift, double sigma, double alpha) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian renyi divergence: sigma must be positive");
    if (alpha <= 1.0) throw std::invalid_argument("gaussian renyi divergence: alpha must exceed 1");
    return alpha * mu_shift * mu_shift / (2.0 * sigma * sigma);
}

// ---------------------------------------------------------------------------
// RDP accounting for the (Poisson) subsampled Gaussian mechanism
// ---------------------------------------------------------------------------

/// Per-step RDP of the subsampled Gaussian mechanism at integer order
/// alpha >= 2, sampling rate q and noise multiplier sigma. At q = 1 this is
/// the plain Gaussian value alpha / (2 sigma^2); for q < 1 it is the
/// binomial-expansion bound
///   (1/(alpha-1)) ln sum_{k=0..alpha} C(alpha,k) (1-q)^(alpha-k) q^k
///                                     exp((k^2-k)/(2 sigma^2)).
inline double rdp_subsampled_gaussian(double q, double sigma, int alpha) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("rdp: sampling rate outside [0,1]");
    if (sigma <= 0.0) throw std::invalid_argument("rdp: sigma must be positive");
    if (alpha < 2) throw std::invalid_argument("rdp: integer order must be >= 2");
    if (q == 0.0) return 0.0;
    const double a = static_cast<double>(alpha);
    if (q == 1.0) return a / (2.0 * sigma * sigma);

    const double log_q = std::log(q);
    const double log_1mq = std::log1p(-q);
    std::vector<double> log_terms;
    log_terms.reserve(static_cast<std::size_t>(alpha) + 1);
    for (int k = 0; k <= alpha; ++k) {
        const double kd = static_cast<double>(k);
        const double log_binom =
            std::lgamma(a + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(a - kd + 1.0);
        log_terms.push_back(log_binom + (a - kd) * log_1mq + kd * log_q +
                            (kd * kd - kd) / (2.0 * sigma * sigma));
    }
    const double val = log_sum_exp(log_terms) / (a - 1.0);
    return std::max(val, 0.0);
}

/// Fixed order grid: integers 2..64 plus {1.5, 96, 128, 256}. Fractional
/// orders are only usable at q = 1, where the pure Gaussian form applies.
inline std::vector<double> default_rdp_orders() {
    std::vector<double> orders;
    orders.push_back(1.5);
    for (int a = 2; a <= 64; ++a) orders.push_back(static_cast<double>(a));
    orders.push_back(96.0);
    orders.push_back(128.0);
    orders.push_back(256.0);
    return orders;
}

enum class AccountantKind { rdp, tcdp };

inline const char* to_string(AccountantKind k) {
    return k == AccountantKind::rdp ? "rdp" : "tcdp";
}

/// Composed privacy guarantee plus the detail of how it was obtained:
/// the optimal Renyi order for RDP, or the (rho, omega) pair for tCDP.
struct PrivacyReport {
    double epsilon = 0.0;
    double delta = 0.0;
    AccountantKind kind = AccountantKind::rdp;
    double best_order = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    double omega = std::numeric_limits<double>::quiet_NaN();
    std::string note; // e.g. when the sampler invalidates the amplification model
};

/// Additive RDP composition over a fixed order grid, converted to
/// (epsilon, delta) via epsilon = RDP(alpha) + ln(1/delta)/(alpha-1),
/// minimized over the grid. Steps are stored as (q, sigma, count) segments
/// so composing T steps at once and composing them one by one agree exactly.
class RdpAccountant {
public:
    explicit RdpAccountant(std::vector<double> orders = default_rdp_orders())
        : orders_(std::move(orders)) {
        if (orders_.empty()) throw std::invalid_argument("rdp accountant: empty order grid");
        for (double a : orders_) {
            if (a <= 1.0) throw std::invalid_argument("rdp accountant: orders must exceed 1");
        }
    }

    void add_steps(std::size_t steps, double q, double sigma) {
        if (steps == 0) return;
        if (!segments_.empty() && segments_.back().q == q && segments_.back().sigma == sigma) {
            segments_.back().steps += steps;
        } else {
            segments_.push_back({q, sigma, steps});
        }
    }

    std::size_t steps() const {
        std::size_t n = 0;
        for (const auto& s : segments_) n += s.steps;
        return n;
    }

    const std::vector<double>& orders() const { return orders_; }

    /// Total accumulated RDP at one order; +inf for fractional orders if any
    /// segment was subsampled (the binomial bound needs integer orders).
    double total_rdp(double order) const {
        double total = 0.0;
        for (const auto& s : segments_) {
            total += static_cast<double>(s.steps) * per_step(order, s.q, s.sigma);
        }
        return total;
    }

    PrivacyReport report(double delta) const {
        if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("rdp accountant: delta outside (0,1)");
        PrivacyReport r;
        r.delta = delta;
        r.kind = AccountantKind::rdp;
        r.epsilon = kInf;
        const double log_inv_delta = std::log(1.0 / delta);
        for (double a : orders_) {
            const double rdp = total_rdp(a);
            if (!std::isfinite(rdp)) continue;
            const double eps = rdp + log_inv_delta / (a - 1.0);
            if (eps < r.epsilon) {
                r.epsilon = eps;
                r.best_order = a;
            }
        }
        return r;
    }

    double epsilon(double delta) const { return report(delta).epsilon; }

private:
    struct Segment {
        double q;
        double sigma;
        std::size_t steps;
    };

    double per_step(double order, double q, double sigma) const {
        if (q <= 0.0) return 0.0;
        if (sigma <= 0.0) return kInf; // noiseless release: unbounded privacy loss
        if (q >= 1.0) return order / (2.0 * sigma * sigma);
        const double rounded = std::nearbyint(order);
        if (order != rounded || order < 2.0) return kInf; // bound needs integer order >= 2
        return rdp_subsampled_gaussian(q, sigma, static_cast<int>(rounded));
    }

    std::vector<double> orders_;
    std::vector<Segment> segments_;
};

// ---------------------------------------------------------------------------
// tCDP accounting for noise-decay training
// ---------------------------------------------------------------------------

/// Inputs to the tCDP budget: lot size B out of M samples, clip C, per-epoch
/// noise decay R, epoch count E, initial noise multiplier sigma0, target delta.
struct TcdpParams {
    std::size_t lot_size = 64;     // B
    std::size_t dataset_size = 0;  // M
    double clip = 1.0;             // C
    double decay = 0.99;           // R
    std::size_t epochs = 1;        // E
    double sigma0 = 1.0;
    double delta = 1e-5;

    void validate() const {
        if (dataset_size == 0 || lot_size == 0 || lot_size > dataset_size)
            throw std::invalid_argument("tcdp: need 0 < B <= M");
        if (!(decay > 0.0 && decay < 1.0))
            throw std::invalid_argument("tcdp: decay must lie in (0,1)");
        if (epochs == 0) throw std::invalid_argument("tcdp: epochs must be >= 1");
        if (sigma0 <= 0.0) throw std::invalid_argument("tcdp: sigma0 must be positive");
        if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("tcdp: delta outside (0,1)");
        if (clip <= 0.0) throw std::invalid_argument("tcdp: clip must be positive");
    }
};

/// (rho, omega) budget of noise-decay training:
///   rho   = 13 (B/M)^2 C^2 (1 - R^E) / (2 sigma0^2 (R^(E-1) - R^E))
///   omega = ln(M/B) sigma0^2 R^(E-1) / (2 C^2)
inline std::pair<double, double> tcdp_budget(const TcdpParams& p) {
    p.validate();
    const double q = static_cast<double>(p.lot_size) / static_cast<double>(p.dataset_size);
    const double E = static_cast<double>(p.epochs);
    const double r_pow_e = std::pow(p.decay, E);
    const double r_pow_em1 = std::pow(p.decay, E - 1.0);
    const double rho = 13.0 * q * q * p.clip * p.clip * (1.0 - r_pow_e) /
                       (2.0 * p.sigma0 * p.sigma0 * (r_pow_em1 - r_pow_e));
    const double omega = std::log(1.0 / q) * p.sigma0 * p.sigma0 * r_pow_em1 /
                         (2.0 * p.clip * p.clip);
    return {rho, omega};
}

/// epsilon = rho + 2 sqrt(rho ln(1/delta)).
inline double rho_to_epsilon(double rho, double delta) {
    if (rho < 0.0) throw std::invalid_argument("rho_to_epsilon: rho must be nonnegative");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("rho_to_epsilon: delta outside (0,1)");
    return rho + 2.0 * std::sqrt(rho * std::log(1.0 / delta));
}

/// Inverse of rho_to_epsilon in rho: solve x^2 + 2x sqrt(ln(1/delta)) = eps
/// for x = sqrt(rho).
inline double rho_from_epsilon(double epsilon, double delta) {
    if (epsilon < 0.0) throw std::invalid_argument("rho_from_epsilon: epsilon must be nonnegative");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("rho_from_epsilon: delta outside (0,1)");
    const double l = std::log(1.0 / delta);
    const double x = std::sqrt(l + epsilon) - std::sqrt(l);
    return x * x;
}

/// Tracks an adaptive (noise-decay) run: one recorded epoch per decay period.
/// The budget follows tcdp_budget with E = epochs recorded so far.
class TcdpAccountant {
public:
    TcdpAccountant(std::size_t lot_size, std::size_t dataset_size, double clip,
                   double decay, double sigma0)
        : params_{lot_size, dataset_size, clip, decay, 1, sigma0, 1e-5},
          expected_sigma_sq_(sigma0 * sigma0) {
        params_.validate();
    }

    /// Record one epoch run at noise variance sigma_sq (multiplier squared).
    /// The variance must match sigma0^2 * R^e for the epoch index e being
    /// recorded, i.e. the optimizer and the accountant must agree.
    void record_epoch(double sigma_sq) {
        const double expected = expected_sigma_sq_;
        if (std::abs(sigma_sq - expected) > 1e-9 * std::max(1.0, expected)) {
            throw std::invalid_argument(
                "tcdp accountant: epoch noise variance does not match the decay schedule");
        }
        ++epochs_recorded_;
        expected_sigma_sq_ *= params_.decay;
    }

    std::size_t epochs() const { return epochs_recorded_; }
    const TcdpParams& params() const { return params_; }

    PrivacyReport report(double delta) const {
        PrivacyReport r;
        r.delta = delta;
        r.kind = AccountantKind::tcdp;
        if (epochs_recorded_ == 0) {
            r.epsilon = 0.0;
            r.rho = 0.0;
            r.omega = kInf;
            return r;
        }
        TcdpParams p = params_;
        p.epochs = epochs_recorded_;
        p.delta = delta;
        const auto [rho, omega] = tcdp_budget(p);
        r.rho = rho;
        r.omega = omega;
        r.epsilon = rho_to_epsilon(rho, delta);
        return r;
    }

private:
    TcdpParams params_;
    std::size_t epochs_recorded_ = 0;
    double expected_sigma_sq_ = 0.0;
};

// ---------------------------------------------------------------------------
// Noise calibration
// ---------------------------------------------------------------------------

/// Smallest noise multiplier giving epsilon within 1e-3 of the target for
/// the subsampled Gaussian composed over `steps` steps, found by bisection
/// on [0.01, 100] (epsilon decreases monotonically in sigma).
inline double calibrate_sigma_rdp(double target_epsilon, double delta, double q,
                                  std::size_t steps,
                                  std::vector<double> orders = default_rdp_orders()) {
    if (target_epsilon <= 0.0) throw std::invalid_argument("calibrate: target epsilon must be positive");
    if (steps == 0) throw std::invalid_argument("calibrate: steps must be >= 1");
    const double lo = 0.01, hi = 100.0;
    auto eps_at = [&](double sigma) {
        RdpAccountant acc(orders);
        acc.add_steps(steps, q, sigma);
        return acc.epsilon(delta);
    };
    if (eps_at(hi) > target_epsilon) {
        throw std::runtime_error("calibrate: target epsilon unreachable below sigma = 100");
    }
    if (eps_at(lo) < target_epsilon) {
        throw std::runtime_error("calibrate: target epsilon unreachable above sigma = 0.01");
    }
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double eps = eps_at(mid);
        if (std::abs(eps - target_epsilon) <= 1e-3) return mid;
        if (eps > target_epsilon) {
            a = mid;
        } else {
            b = mid;
        }
    }
    throw std::runtime_error("calibrate: bisection failed to reach the 1e-3 tolerance");
}

/// Closed-form sigma0 for a target epsilon under the tCDP budget: invert
/// rho_to_epsilon, then solve the rho formula for sigma0.
inline double calibrate_sigma0_tcdp(double target_epsilon, double delta,
                                    std::size_t lot_size, std::size_t dataset_size,
                                    double clip, double decay, std::size_t epochs) {
    const double rho = rho_from_epsilon(target_epsilon, delta);
    if (rho <= 0.0) throw std::runtime_error("calibrate: target epsilon yields zero budget");
    TcdpParams probe{lot_size, dataset_size, clip, decay, epochs, 1.0, delta};
    probe.validate();
    const double q = static_cast<double>(lot_size) / static_cast<double>(dataset_size);
    const double E = static_cast<double>(epochs);
    const double r_pow_e = std::pow(decay, E);
    const double r_pow_em1 = std::pow(decay, E - 1.0);
    const double sigma0_sq =
        13.0 * q * q * clip * clip * (1.0 - r_pow_e) / (2.0 * rho * (r_pow_em1 - r_pow_e));
    return std::sqrt(sigma0_sq);
}

// ---------------------------------------------------------------------------
// rho-epsilon curve
// ---------------------------------------------------------------------------

inline std::vector<std::pair<double, double>> rho_epsilon_curve(
    double delta, std::span<const double> rho_grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(rho_grid.size());
    double prev = -1.0;
    for (double rho : rho_grid) {
        if (rho < 0.0 || rho < prev) throw std::invalid_argument("curve: grid must be ascending and nonnegative");
        prev = rho;
        out.emplace_back(rho, rho_to_epsilon(rho, delta));
    }
    return out;
}

inline void write_rho_epsilon_csv(std::ostream& os,
                                  const std::vector<std::pair<double, double>>& curve) {
    os << "rho,epsilon\n";
    for (const auto& [rho, eps] : curve) {
        os << format_double(rho) << ',' << format_double(eps) << '\n';
    }
}

} // namespace dpopt
