#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpopt/linalg.hpp"
#include "dpopt/rng.hpp"

namespace dpopt {

enum class ModelKind { logistic, mlp };

inline const char* to_string(ModelKind k) {
    return k == ModelKind::logistic ? "logistic" : "mlp";
}

struct LayerShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool trainable = true;

    std::size_t count() const { return rows * cols; }
};

/// Flat parameter vector plus the per-layer shapes it is carved into.
struct ModelParams {
    std::vector<LayerShape> layout;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    std::size_t layout_count() const {
        std::size_t n = 0;
        for (const auto& l : layout) n += l.count();
        return n;
    }
};

/// One lot of training data. Labels are class indices in {0, 1};
/// sample_weights, when nonempty, multiply each sample's loss.
struct Batch {
    Matrix features;
    std::vector<int> labels;
    std::vector<double> sample_weights; // empty = unweighted

    std::size_t size() const { return features.rows; }
};

inline void validate_batch(const Batch& b) {
    if (b.size() == 0) throw std::invalid_argument("batch: must hold at least one sample");
    if (b.labels.size() != b.size()) throw std::invalid_argument("batch: label count mismatch");
    if (!b.sample_weights.empty() && b.sample_weights.size() != b.size())
        throw std::invalid_argument("batch: sample weight count mismatch");
    if (!all_finite(b.features.data)) throw std::invalid_argument("batch: non-finite feature");
    for (int y : b.labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("batch: labels must be 0 or 1");
    }
    for (double w : b.sample_weights) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("batch: sample weights must be positive");
    }
}

/// Row i holds the exact gradient of sample i's (weighted) loss with respect
/// to the full flat parameter vector; loss_values holds each sample's loss.
struct PerExampleGradients {
    Matrix grads; // L x P
    std::vector<double> loss_values;
};

struct ModelConfig {
    ModelKind kind = ModelKind::logistic;
    std::size_t input_dim = 0;
    std::size_t hidden_width = 32; // mlp only
    bool train_all = true;         // false: only the output layer learns (mlp)
};

/// The built-in differentiable classifiers: two-class logistic regression and
/// a one-hidden-layer tanh MLP, with exact per-example gradients via
/// hand-written backpropagation. Loss is softmax cross-entropy computed from
/// logits in log-sum-exp form.
class Model {
public:
    explicit Model(ModelConfig cfg) : cfg_(cfg) {
        if (cfg_.input_dim == 0) throw std::invalid_argument("model: input_dim must be positive");
        if (cfg_.kind == ModelKind::mlp && cfg_.hidden_width == 0)
            throw std::invalid_argument("model: hidden_width must be positive");
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<LayerShape> layout() const {
        const std::size_t d = cfg_.input_dim;
        if (cfg_.kind == ModelKind::logistic) {
            return {{"linear.weight", 2, d, true}, {"linear.bias", 2, 1, true}};
        }
        const std::size_t h = cfg_.hidden_width;
        const bool hidden_trainable = cfg_.train_all;
        return {{"hidden.weight", h, d, hidden_trainable},
                {"hidden.bias", h, 1, hidden_trainable},
                {"output.weight", 2, h, true},
                {"output.bias", 2, 1, true}};
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layout()) n += l.count();
        return n;
    }

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
    ModelParams init_params(RngStream& rng) const {
        ModelParams p;
        p.layout = layout();
        p.values.reserve(param_count());
        for (const auto& l : p.layout) {
            const std::size_t fan_in = fan_in_of(l);
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t i = 0; i < l.count(); ++i) {
                p.values.push_back((2.0 * rng.uniform() - 1.0) * bound);
            }
        }
        return p;
    }

    /// Per-parameter trainability mask in flat-vector order.
    std::vector<std::uint8_t> trainable_mask() const {
        std::vector<std::uint8_t> mask;
        mask.reserve(param_count());
        for (const auto& l : layout()) {
            mask.insert(mask.end(), l.count(), l.trainable ? 1 : 0);
        }
        return mask;
    }

    /// L x 2 logits.
    Matrix forward(const ModelParams& params, const Matrix& features) const {
        check_params(params);
        if (features.cols != cfg_.input_dim)
            throw std::invalid_argument("model: feature width does not match input_dim");
        Matrix logits(features.rows, 2);
        std::vector<double> hidden; // scratch, mlp only
        for (std::size_t i = 0; i < features.rows; ++i) {
            forward_one(params, features.row(i), logits.row(i), hidden);
        }
        if (!all_finite(logits.data)) throw std::runtime_error("model: non-finite logits in layer output");
        return logits;
    }

    /// L x 2 softmax probabilities; each row sums to 1.
    Matrix predict_proba(const ModelParams& params, const Matrix& features) const {
        Matrix logits = forward(params, features);
        Matrix probs(logits.rows, 2);
        for (std::size_t i = 0; i < logits.rows; ++i) {
            const double z0 = logits(i, 0), z1 = logits(i, 1);
            const double m = std::max(z0, z1);
            const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
            const double s = e0 + e1;
            probs(i, 0) = e0 / s;
            probs(i, 1) = e1 / s;
        }
        return probs;
    }

    PerExampleGradients loss_and_per_example_grads(const ModelParams& params,
                                                   const Batch& batch) const {
        check_params(params);
        validate_batch(batch);
        if (batch.features.cols != cfg_.input_dim)
            throw std::invalid_argument("model: feature width does not match input_dim");

        const std::size_t n = batch.size();
        const std::size_t p_count = param_count();
        PerExampleGradients out;
        out.grads = Matrix(n, p_count);
        out.loss_values.resize(n);

        std::vector<double> hidden, pre_act;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = batch.sample_weights.empty() ? 1.0 : batch.sample_weights[i];
            backward_one(params, batch.features.row(i), batch.labels[i], w,
                         out.grads.row(i), out.loss_values[i], hidden, pre_act);
            if (!all_finite(out.grads.row(i)) || !std::isfinite(out.loss_values[i])) {
                throw std::runtime_error("model: non-finite gradient in layer " +
                                         first_nonfinite_layer(out.grads.row(i)));
            }
        }
        return out;
    }

private:
    std::size_t fan_in_of(const LayerShape& l) const {
        if (l.name.rfind("hidden", 0) == 0 || l.name.rfind("linear", 0) == 0)
            return cfg_.input_dim;
        return cfg_.hidden_width;
    }

    void check_params(const ModelParams& params) const {
        if (params.size() != param_count())
            throw std::invalid_argument("model: parameter vector length does not match layout");
        if (!all_finite(params.values))
            throw std::invalid_argument("model: non-finite parameter value");
    }

    // logits for one sample; `hidden` is reused scratch space.
    void forward_one(const ModelParams& params, std::span<const double> x,
                     std::span<double> logits, std::vector<double>& hidden) const {
        const double* v = params.values.data();
        const std::size_t d = cfg_.input_dim;
        if (cfg_.kind == ModelKind::logistic) {
            const double* W = v;          // 2 x d
            const double* b = v + 2 * d;  // 2
            for (int c = 0; c < 2; ++c) {
                logits[c] = dot({W + c * d, d}, x) + b[c];
            }
            return;
        }
        const std::size_t h = cfg_.hidden_width;
        const double* W1 = v;                    // h x d
        const double* b1 = v + h * d;            // h
        const double* W2 = b1 + h;               // 2 x h
        const double* b2 = W2 + 2 * h;           // 2
        hidden.resize(h);
        for (std::size_t k = 0; k < h; ++k) {
            hidden[k] = std::tanh(dot({W1 + k * d, d}, x) + b1[k]);
        }
        for (int c = 0; c < 2; ++c) {
            logits[c] = dot({W2 + c * h, h}, hidden) + b2[c];
        }
    }

    // loss and flat gradient for one (weighted) sample
    void backward_one(const ModelParams& params, std::span<const double> x, int label,
                      double weight, std::span<double> grad, double& loss,
                      std::vector<double>& hidden, std::vector<double>& scratch) const {
        const double* v = params.values.data();
        const std::size_t d = cfg_.input_dim;

        double z[2];
        forward_one(params, x, {z, 2}, hidden);
        const double m = std::max(z[0], z[1]);
        const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
        loss = weight * (lse - z[label]);

        double dz[2];
        for (int c = 0; c < 2; ++c) {
            const double p = std::exp(z[c] - lse);
            dz[c] = weight * (p - (c == label ? 1.0 : 0.0));
        }

        if (cfg_.kind == ModelKind::logistic) {
            double* gW = grad.data();
            double* gb = grad.data() + 2 * d;
            for (int c = 0; c < 2; ++c) {
                for (std::size_t j = 0; j < d; ++j) gW[c * d + j] = dz[c] * x[j];
                gb[c] = dz[c];
            }
            return;
        }

        const std::size_t h = cfg_.hidden_width;
        const double* W2 = v + h * d + h; // 2 x h
        double* gW1 = grad.data();
        double* gb1 = gW1 + h * d;
        double* gW2 = gb1 + h;
        double* gb2 = gW2 + 2 * h;

        for (int c = 0; c < 2; ++c) {
            for (std::size_t k = 0; k < h; ++k) gW2[c * h + k] = dz[c] * hidden[k];
            gb2[c] = dz[c];
        }
        if (!cfg_.train_all) {
            // hidden layer is frozen: its gradient block stays zero
            return;
        }
        scratch.resize(h);
        for (std::size_t k = 0; k < h; ++k) {
            const double dh = W2[k] * dz[0] + W2[h + k] * dz[1];
            scratch[k] = dh * (1.0 - hidden[k] * hidden[k]); // tanh'
        }
        for (std::size_t k = 0; k < h; ++k) {
            for (std::size_t j = 0; j < d; ++j) gW1[k * d + j] = scratch[k] * x[j];
            gb1[k] = scratch[k];
        }
    }

    std::string first_nonfinite_layer(std::span<const double> grad) const {
        std::size_t off = 0;
        for (const auto& l : layout()) {
            for (std::size_t i = 0; i < l.count(); ++i) {
                if (!std::isfinite(grad[off + i])) return l.name;
            }
            off += l.count();
        }
        return "loss";
    }

    ModelConfig cfg_;
};

} // namespace dpopt
