#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpopt/format.hpp"
#include "dpopt/linalg.hpp"
#include "dpopt/rng.hpp"

namespace dpopt {

struct Dataset {
    Matrix features;
    std::vector<int> labels;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

struct DataSplits {
    Dataset train;
    Dataset valid;
    Dataset test;
};

struct SynthSpec {
    std::size_t n = 20000;
    std::size_t dim = 16;
    double minority_ratio = 0.3902; // fraction labeled 0
    double separation = 1.2;        // distance between class means
};

namespace detail {

inline Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.features = Matrix(idx.size(), d.dim());
    out.labels.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = d.features.row(idx[r]);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.labels.push_back(d.labels[idx[r]]);
    }
    return out;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.uniform_below(i)]);
    }
}

} // namespace detail

/// Stratified 80/10/10 split: within each class, round(0.8 n_c) rows go to
/// train and round(0.1 n_c) to valid, the rest to test. Row order inside each
/// split is shuffled deterministically.
inline DataSplits split_dataset(const Dataset& data, std::uint64_t seed,
                                double train_frac = 0.8, double valid_frac = 0.1) {
    if (train_frac + valid_frac >= 1.0) throw std::invalid_argument("split: fractions must leave room for test");
    std::vector<std::size_t> idx0, idx1;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (data.labels[i] == 0 ? idx0 : idx1).push_back(i);
    }
    RngStream rng(seed, 0x73706c6974ULL); // "split"
    detail::shuffle_indices(idx0, rng);
    detail::shuffle_indices(idx1, rng);

    std::vector<std::size_t> train, valid, test;
    for (const auto* cls : {&idx0, &idx1}) {
        const std::size_t n = cls->size();
        const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
        const auto n_valid = static_cast<std::size_t>(std::llround(valid_frac * static_cast<double>(n)));
        if (n_train + n_valid > n) throw std::invalid_argument("split: class too small for the requested fractions");
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) train.push_back((*cls)[i]);
            else if (i < n_train + n_valid) valid.push_back((*cls)[i]);
            else test.push_back((*cls)[i]);
        }
    }
    detail::shuffle_indices(train, rng);
    detail::shuffle_indices(valid, rng);
    detail::shuffle_indices(test, rng);
    return {detail::take_rows(data, train), detail::take_rows(data, valid),
            detail::take_rows(data, test)};
}

/// Two unit-variance Gaussian blobs in `dim` dimensions whose means sit
/// `separation` apart. Label 0 is the minority class (minority_ratio of n),
/// label 1 the majority. Deterministic under the seed.
inline Dataset synth_dataset_full(const SynthSpec& spec, std::uint64_t seed) {
    const auto n_minority = static_cast<std::size_t>(
        std::llround(spec.minority_ratio * static_cast<double>(spec.n)));
    if (n_minority == 0 || n_minority >= spec.n)
        throw std::invalid_argument("synth: n too small to hold both classes at this ratio");
    if (spec.dim == 0) throw std::invalid_argument("synth: dimension must be positive");

    Dataset d;
    d.features = Matrix(spec.n, spec.dim);
    d.labels.resize(spec.n);
    const double offset = 0.5 * spec.separation / std::sqrt(static_cast<double>(spec.dim));

    RngStream rng(seed, 0x73796e7468ULL); // "synth"
    std::vector<std::size_t> order(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) order[i] = i;
    detail::shuffle_indices(order, rng);

    for (std::size_t i = 0; i < spec.n; ++i) {
        const int label = order[i] < n_minority ? 0 : 1;
        const double center = label == 1 ? offset : -offset;
        d.labels[i] = label;
        auto row = d.features.row(i);
        for (std::size_t j = 0; j < spec.dim; ++j) {
            row[j] = center + rng.gaussian();
        }
    }
    return d;
}

inline DataSplits synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
    return split_dataset(synth_dataset_full(spec, seed), seed);
}

// ---------------------------------------------------------------------------
// Columnar text format: header "label,f0,f1,...", one row per sample.
// ---------------------------------------------------------------------------

inline void save_dataset(std::ostream& os, const Dataset& d) {
    os << "label";
    for (std::size_t j = 0; j < d.dim(); ++j) os << ",f" << j;
    os << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        os << d.labels[i];
        for (double x : d.features.row(i)) os << ',' << format_double(x);
        os << '\n';
    }
}

inline void save_dataset(const std::string& path, const Dataset& d) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    save_dataset(os, d);
}

inline Dataset load_dataset(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("dataset file: missing header");
    if (line.rfind("label", 0) != 0) throw std::runtime_error("dataset file: header must start with 'label'");
    std::size_t dim = 0;
    for (char c : line) {
        if (c == ',') ++dim;
    }
    if (dim == 0) throw std::runtime_error("dataset file: no feature columns");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw std::runtime_error("dataset file: bad row " + std::to_string(line_no));
        if (cell != "0" && cell != "1")
            throw std::runtime_error("dataset file: label must be 0 or 1 at row " + std::to_string(line_no));
        labels.push_back(cell == "1" ? 1 : 0);
        std::size_t got = 0;
        while (std::getline(row, cell, ',')) {
            values.push_back(parse_double(cell));
            ++got;
        }
        if (got != dim) throw std::runtime_error("dataset file: wrong column count at row " + std::to_string(line_no));
    }
    if (labels.empty()) throw std::runtime_error("dataset file: no data rows");

    Dataset d;
    d.features.rows = labels.size();
    d.features.cols = dim;
    d.features.data = std::move(values);
    d.labels = std::move(labels);
    return d;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open dataset: " + path);
    return load_dataset(is);
}

} // namespace dpopt
