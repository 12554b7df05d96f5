#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dpopt/dataset.hpp"
#include "dpopt/metrics.hpp"

using namespace dpopt;

TEST_CASE("synthetic dataset", "[dataset]") {
    SECTION("train split keeps the requested class ratio within one sample") {
        SynthSpec spec;
        spec.n = 20000;
        const auto splits = synth_dataset(spec, 3);
        std::size_t minority = 0;
        for (int y : splits.train.labels) minority += y == 0;
        const double ratio = static_cast<double>(minority) / splits.train.size();
        const double tol = 1.5 / static_cast<double>(splits.train.size());
        REQUIRE(std::abs(ratio - 0.3902) <= tol + 1e-12);
    }
    SECTION("80/10/10 split sizes for n = 1000") {
        SynthSpec spec;
        spec.n = 1000;
        const auto splits = synth_dataset(spec, 1);
        REQUIRE(splits.train.size() == 800);
        REQUIRE(splits.valid.size() == 100);
        REQUIRE(splits.test.size() == 100);
    }
    SECTION("zero separation is unlearnable: AUC about 0.5") {
        SynthSpec spec;
        spec.n = 4000;
        spec.dim = 4;
        spec.separation = 0.0;
        const auto splits = synth_dataset(spec, 7);
        // score by projecting onto an arbitrary direction; no direction helps
        std::vector<double> scores(splits.test.size());
        for (std::size_t i = 0; i < splits.test.size(); ++i) {
            double s = 0.0;
            for (double x : splits.test.features.row(i)) s += x;
            scores[i] = s;
        }
        REQUIRE(std::abs(roc_auc(splits.test.labels, scores) - 0.5) < 0.08);
    }
    SECTION("separated blobs are learnable by the mean-difference direction") {
        SynthSpec spec;
        spec.n = 4000;
        spec.dim = 4;
        spec.separation = 3.0;
        const auto splits = synth_dataset(spec, 7);
        std::vector<double> scores(splits.test.size());
        for (std::size_t i = 0; i < splits.test.size(); ++i) {
            double s = 0.0;
            for (double x : splits.test.features.row(i)) s += x; // blob axis is all-ones
            scores[i] = s;
        }
        REQUIRE(roc_auc(splits.test.labels, scores) > 0.9);
    }
    SECTION("deterministic under the seed") {
        SynthSpec spec;
        spec.n = 500;
        const auto a = synth_dataset(spec, 11);
        const auto b = synth_dataset(spec, 11);
        REQUIRE(a.train.features.data == b.train.features.data);
        REQUIRE(a.test.labels == b.test.labels);
    }
    SECTION("n too small for both classes rejected") {
        SynthSpec spec;
        spec.n = 1;
        REQUIRE_THROWS_AS(synth_dataset_full(spec, 1), std::invalid_argument);
    }
}

TEST_CASE("columnar dataset format", "[dataset]") {
    SECTION("save/load round trip is exact") {
        SynthSpec spec;
        spec.n = 60;
        spec.dim = 3;
        const Dataset d = synth_dataset_full(spec, 4);
        std::ostringstream os;
        save_dataset(os, d);
        std::istringstream is(os.str());
        const Dataset back = load_dataset(is);
        REQUIRE(back.labels == d.labels);
        REQUIRE(back.features.data == d.features.data);
        REQUIRE(back.dim() == 3);
    }
    SECTION("header and malformed rows rejected") {
        std::istringstream no_header("1,2.0\n");
        REQUIRE_THROWS_AS(load_dataset(no_header), std::runtime_error);
        std::istringstream short_row("label,f0,f1\n1,0.5\n");
        REQUIRE_THROWS_AS(load_dataset(short_row), std::runtime_error);
        std::istringstream bad_label("label,f0\n3,0.5\n");
        REQUIRE_THROWS_AS(load_dataset(bad_label), std::runtime_error);
        std::istringstream empty("label,f0\n");
        REQUIRE_THROWS_AS(load_dataset(empty), std::runtime_error);
    }
    SECTION("ingested files split like synthetic ones") {
        SynthSpec spec;
        spec.n = 200;
        spec.dim = 2;
        const Dataset d = synth_dataset_full(spec, 9);
        const auto splits = split_dataset(d, 9);
        REQUIRE(splits.train.size() + splits.valid.size() + splits.test.size() == 200);
        REQUIRE(splits.train.size() == 160);
    }
}
