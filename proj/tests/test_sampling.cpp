#include <catch2/catch.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "dpopt/sampling.hpp"

using namespace dpopt;

TEST_CASE("class weights", "[sampling]") {
    SECTION("balanced two-class data gives unit weights") {
        ClassCounts c;
        c.counts = {{0, 500}, {1, 500}};
        c.total = 1000;
        const auto w = class_weights(c);
        REQUIRE(w.at(0) == Approx(1.0));
        REQUIRE(w.at(1) == Approx(1.0));
    }
    SECTION("train-set counts (60031, 93818)") {
        ClassCounts c;
        c.counts = {{0, 60031}, {1, 93818}};
        c.total = 153849;
        const auto w = class_weights(c);
        REQUIRE(w.at(0) == Approx(1.2814129).epsilon(1e-6));
        REQUIRE(w.at(1) == Approx(0.8199333).epsilon(1e-6));
        REQUIRE(w.at(0) > w.at(1)); // minority weighted up
    }
    SECTION("count-weighted sum returns the dataset size exactly") {
        ClassCounts c;
        c.counts = {{0, 123}, {1, 877}, {2, 400}};
        c.total = 1400;
        const auto w = class_weights(c);
        double sum = 0.0;
        for (const auto& [cls, n] : c.counts) sum += static_cast<double>(n) * w.at(cls);
        REQUIRE(sum == Approx(1400.0).epsilon(1e-12));
    }
    SECTION("invariant under relabeling") {
        ClassCounts a, b;
        a.counts = {{0, 100}, {1, 900}};
        a.total = 1000;
        b.counts = {{0, 900}, {1, 100}};
        b.total = 1000;
        const auto wa = class_weights(a);
        const auto wb = class_weights(b);
        REQUIRE(wa.at(0) == wb.at(1));
        REQUIRE(wa.at(1) == wb.at(0));
    }
    SECTION("zero-count class rejected") {
        ClassCounts c;
        c.counts = {{0, 10}, {1, 0}};
        c.total = 10;
        REQUIRE_THROWS_AS(class_weights(c), std::invalid_argument);
    }
}

TEST_CASE("weighted random sampler", "[sampling]") {
    SECTION("imbalanced counts draw each class equally often") {
        std::vector<int> labels(1000);
        for (std::size_t i = 0; i < 1000; ++i) labels[i] = i < 100 ? 0 : 1;
        RngStream rng(21, 8);
        const auto idx = weighted_sample_indices(labels, 100000, rng);
        std::size_t minority = 0;
        for (auto i : idx) minority += labels[i] == 0;
        const double frac = static_cast<double>(minority) / 100000.0;
        REQUIRE(std::abs(frac - 0.5) < 0.01);
    }
    SECTION("class frequency converges at the binomial rate") {
        std::vector<int> labels(500);
        for (std::size_t i = 0; i < 500; ++i) labels[i] = i < 50 ? 0 : 1;
        for (std::size_t draws : {1000ul, 16000ul, 256000ul}) {
            RngStream rng(31, draws);
            const auto idx = weighted_sample_indices(labels, draws, rng);
            std::size_t minority = 0;
            for (auto i : idx) minority += labels[i] == 0;
            const double frac = static_cast<double>(minority) / static_cast<double>(draws);
            const double sd = std::sqrt(0.25 / static_cast<double>(draws));
            REQUIRE(std::abs(frac - 0.5) < 5.0 * sd);
        }
    }
    SECTION("balanced data reduces to uniform sampling with replacement") {
        std::vector<int> labels(200);
        for (std::size_t i = 0; i < 200; ++i) labels[i] = i < 100 ? 0 : 1;
        RngStream rng(44, 5);
        const auto idx = weighted_sample_indices(labels, 200000, rng);
        std::vector<std::size_t> hits(200, 0);
        for (auto i : idx) ++hits[i];
        // each index expected 1000 times, sd ~ sqrt(1000)
        for (auto h : hits) REQUIRE(std::abs(static_cast<double>(h) - 1000.0) < 5.0 * std::sqrt(1000.0));
    }
    SECTION("fixed seed reproduces the index sequence") {
        const std::vector<int> labels{0, 1, 1, 0, 1};
        RngStream a(77, 1), b(77, 1);
        REQUIRE(weighted_sample_indices(labels, 50, a) == weighted_sample_indices(labels, 50, b));
    }
    SECTION("zero draws give an empty sequence") {
        const std::vector<int> labels{0, 1};
        RngStream rng(1);
        REQUIRE(weighted_sample_indices(labels, 0, rng).empty());
    }
    SECTION("draws are valid indices of the right class distribution shape") {
        const std::vector<int> labels{1, 1, 1, 0};
        RngStream rng(3);
        for (auto i : weighted_sample_indices(labels, 200, rng)) REQUIRE(i < labels.size());
    }
}

TEST_CASE("Poisson lot stream", "[sampling]") {
    SECTION("q = 1 yields the full dataset every lot") {
        LotSampler s(LotMode::poisson, 32, 32, 5);
        REQUIRE(s.sampling_rate() == 1.0);
        for (std::size_t step = 0; step < 3; ++step) {
            REQUIRE(s.lot(0, step).size() == 32);
        }
    }
    SECTION("mean lot size matches q N (binomial)") {
        // q = 0.01, N = 10^4: mean 100, sd over 1000 lots ~ sqrt(99)/sqrt(1000)
        LotSampler s(LotMode::poisson, 10000, 100, 12);
        double total = 0.0;
        for (std::size_t step = 0; step < 1000; ++step) total += s.lot(0, step).size();
        const double mean = total / 1000.0;
        REQUIRE(std::abs(mean - 100.0) < 3.0 * std::sqrt(100.0 * 0.99 / 1000.0));
    }
    SECTION("lots depend only on (seed, epoch, step)") {
        LotSampler a(LotMode::poisson, 500, 50, 9), b(LotMode::poisson, 500, 50, 9);
        REQUIRE(a.lot(3, 7) == b.lot(3, 7));
        REQUIRE(a.lot(3, 7) == a.lot(3, 7)); // re-entrant
        REQUIRE(a.lot(3, 7) != a.lot(3, 8));
    }
    SECTION("disjoint seeds give independent inclusion patterns (chi-square)") {
        LotSampler a(LotMode::poisson, 400, 200, 1001), b(LotMode::poisson, 400, 200, 2002);
        // 2x2 contingency of membership over many (sample, lot) pairs
        double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
        for (std::size_t step = 0; step < 50; ++step) {
            std::vector<char> in_a(400, 0), in_b(400, 0);
            for (auto i : a.lot(0, step)) in_a[i] = 1;
            for (auto i : b.lot(0, step)) in_b[i] = 1;
            for (std::size_t i = 0; i < 400; ++i) {
                if (in_a[i] && in_b[i]) ++n11;
                else if (in_a[i]) ++n10;
                else if (in_b[i]) ++n01;
                else ++n00;
            }
        }
        const double n = n00 + n01 + n10 + n11;
        const double ra = (n10 + n11) / n, rb = (n01 + n11) / n;
        double chi2 = 0.0;
        const double e11 = n * ra * rb, e10 = n * ra * (1 - rb), e01 = n * (1 - ra) * rb,
                     e00 = n * (1 - ra) * (1 - rb);
        chi2 += (n11 - e11) * (n11 - e11) / e11;
        chi2 += (n10 - e10) * (n10 - e10) / e10;
        chi2 += (n01 - e01) * (n01 - e01) / e01;
        chi2 += (n00 - e00) * (n00 - e00) / e00;
        REQUIRE(chi2 < 6.63); // 1% critical value, 1 dof; deterministic seeds
    }
    SECTION("steps per epoch covers the data once in expectation") {
        REQUIRE(LotSampler(LotMode::poisson, 16000, 64, 1).steps_per_epoch() == 250);
        REQUIRE(LotSampler(LotMode::poisson, 100, 64, 1).steps_per_epoch() == 2);
        REQUIRE(LotSampler(LotMode::poisson, 10, 64, 1).steps_per_epoch() == 1);
    }
}

TEST_CASE("shuffle lot stream", "[sampling]") {
    LotSampler s(LotMode::shuffle, 100, 25, 77);
    REQUIRE(s.steps_per_epoch() == 4);
    SECTION("each epoch is a permutation dealt in chunks") {
        std::vector<char> seen(100, 0);
        for (std::size_t step = 0; step < 4; ++step) {
            const auto lot = s.lot(1, step);
            REQUIRE(lot.size() == 25);
            for (auto i : lot) {
                REQUIRE(!seen[i]);
                seen[i] = 1;
            }
        }
        for (char c : seen) REQUIRE(c == 1);
    }
    SECTION("different epochs use different permutations") {
        REQUIRE(s.lot(0, 0) != s.lot(1, 0));
    }
}
