#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dpopt {

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

struct EvalResult {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double roc_auc = std::numeric_limits<double>::quiet_NaN();
    Confusion confusion;
    bool precision_defined = true; // false when no positive predictions exist
    bool recall_defined = true;    // false when no positive labels exist
};

/// Confusion-matrix metrics with a designated positive class. Empty
/// denominators report a 0 score with the matching *_defined flag cleared.
inline EvalResult binary_metrics(const std::vector<int>& labels,
                                 const std::vector<int>& predicted,
                                 int positive_class) {
    if (labels.empty()) throw std::invalid_argument("metrics: empty input");
    if (labels.size() != predicted.size()) throw std::invalid_argument("metrics: length mismatch");

    EvalResult r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pos = labels[i] == positive_class;
        const bool pred_pos = predicted[i] == positive_class;
        if (pos && pred_pos) ++r.confusion.tp;
        else if (!pos && pred_pos) ++r.confusion.fp;
        else if (pos && !pred_pos) ++r.confusion.fn;
        else ++r.confusion.tn;
    }
    const auto& c = r.confusion;
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0) {
        r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        r.precision_defined = false;
    }
    if (c.tp + c.fn > 0) {
        r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        r.recall_defined = false;
    }
    r.f1 = (r.precision + r.recall > 0.0)
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

/// Area under the ROC curve via the Mann-Whitney statistic with average
/// ranks over tie groups: P(score+ > score-) + 0.5 P(tie). Scores are
/// positive-class probabilities (any strictly increasing transform gives the
/// same value). Throws if only one class is present.
inline double roc_auc(const std::vector<int>& labels, const std::vector<double>& scores,
                      int positive_class = 1) {
    if (labels.size() != scores.size()) throw std::invalid_argument("roc_auc: length mismatch");
    if (labels.empty()) throw std::invalid_argument("roc_auc: empty input");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == positive_class) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: needs both classes present");
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

} // namespace dpopt
