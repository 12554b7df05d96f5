#include <catch2/catch.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "dpopt/harness.hpp"
#include "support/reference_optimizers.hpp"

using namespace dpopt;

namespace {

RunConfig small_config() {
    RunConfig cfg;
    cfg.synth.n = 600;
    cfg.synth.dim = 4;
    cfg.synth.separation = 2.5;
    cfg.epochs = 2;
    cfg.lot_size = 32;
    cfg.learning_rate = 0.02;
    cfg.clip_norm = 2.0;
    cfg.seed = 1;
    return cfg;
}

bool eval_equal(const EvalResult& a, const EvalResult& b) {
    return a.accuracy == b.accuracy && a.precision == b.precision && a.recall == b.recall &&
           a.f1 == b.f1 && a.roc_auc == b.roc_auc && a.confusion.tp == b.confusion.tp &&
           a.confusion.fp == b.confusion.fp && a.confusion.fn == b.confusion.fn &&
           a.confusion.tn == b.confusion.tn;
}

} // namespace

TEST_CASE("run_experiment calibrates to the requested epsilon", "[harness]") {
    RunConfig cfg = small_config();
    cfg.epsilon_target = 1.0;
    cfg.accountant = AccountantKind::rdp;
    const RunResult r = run_experiment(cfg);
    REQUIRE(std::abs(r.privacy.epsilon - 1.0) <= 1e-3);
    REQUIRE(r.privacy.kind == AccountantKind::rdp);
    REQUIRE(r.sigma_used > 0.0);
    REQUIRE(r.steps == 2 * (480 / 32));
}

TEST_CASE("run_experiment with the tCDP accountant round-trips epsilon", "[harness]") {
    RunConfig cfg = small_config();
    cfg.epsilon_target = 2.0;
    cfg.accountant = AccountantKind::tcdp;
    cfg.adaptive = true;
    const RunResult r = run_experiment(cfg);
    REQUIRE(r.privacy.kind == AccountantKind::tcdp);
    REQUIRE(r.privacy.epsilon == Approx(2.0).margin(1e-9));
    REQUIRE(std::isfinite(r.privacy.rho));
    REQUIRE(std::isfinite(r.privacy.omega));
    // adaptive decay happened
    double expected = r.sigma_used * r.sigma_used;
    for (std::size_t e = 0; e < cfg.epochs; ++e) expected *= cfg.noise_decay;
    REQUIRE(r.final_sigma_sq == Approx(expected).epsilon(1e-15));
}

TEST_CASE("disabled DP machinery reproduces the non-private baseline", "[harness]") {
    RunConfig cfg = small_config();
    cfg.epsilon_target.reset();
    cfg.sigma_explicit = 0.0;
    cfg.clip_norm = std::numeric_limits<double>::infinity();
    cfg.schedule = ScheduleKind::constant;
    cfg.lot_mode = LotMode::shuffle;
    cfg.optimizer = OptimizerKind::adamw;
    const RunResult r = run_experiment(cfg);
    REQUIRE_FALSE(std::isfinite(r.privacy.epsilon)); // no noise, unbounded loss

    // independent baseline: same data, same init, reference adamw updates
    const DataSplits splits = synth_dataset(cfg.synth, cfg.seed);
    ModelConfig mc{cfg.model, splits.train.dim(), cfg.hidden_width, true};
    Model model(mc);
    RngStream init(cfg.seed, 0x696e6974ULL);
    ModelParams params = model.init_params(init);

    refoptim::Settings rs;
    rs.alpha = cfg.learning_rate;
    rs.lambda = cfg.weight_decay;
    refoptim::Reference ref("adamw", params.size(), rs);
    LotSampler sampler(LotMode::shuffle, splits.train.size(), cfg.lot_size, cfg.seed);
    ModelParams scratch = params;
    std::vector<double> theta = params.values;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < sampler.steps_per_epoch(); ++s) {
            const auto idx = sampler.lot(epoch, s);
            Batch b;
            b.features = Matrix(idx.size(), splits.train.dim());
            for (std::size_t rr = 0; rr < idx.size(); ++rr) {
                const auto src = splits.train.features.row(idx[rr]);
                std::copy(src.begin(), src.end(), b.features.row(rr).begin());
                b.labels.push_back(splits.train.labels[idx[rr]]);
            }
            scratch.values = theta;
            const auto g = model.loss_and_per_example_grads(scratch, b);
            std::vector<double> mean(params.size(), 0.0);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                for (std::size_t j = 0; j < params.size(); ++j) mean[j] += g.grads(i, j);
            }
            for (double& x : mean) x /= static_cast<double>(cfg.lot_size);
            ref.step(theta, mean, 1.0);
        }
    }
    scratch.values = theta;
    const EvalResult baseline = detail::evaluate(model, scratch, splits.test, cfg.positive_class);
    REQUIRE(r.eval.confusion.tp == baseline.confusion.tp);
    REQUIRE(r.eval.confusion.fp == baseline.confusion.fp);
    REQUIRE(r.eval.confusion.fn == baseline.confusion.fn);
    REQUIRE(r.eval.confusion.tn == baseline.confusion.tn);
    REQUIRE(r.eval.accuracy == baseline.accuracy);
    REQUIRE(r.eval.roc_auc == Approx(baseline.roc_auc).margin(1e-12));
}

TEST_CASE("same config and seed reproduce the evaluation exactly", "[harness]") {
    RunConfig cfg = small_config();
    cfg.epsilon_target.reset();
    cfg.sigma_explicit = 1.0;
    const RunResult a = run_experiment(cfg);
    const RunResult b = run_experiment(cfg);
    REQUIRE(eval_equal(a.eval, b.eval));
    REQUIRE(a.privacy.epsilon == b.privacy.epsilon);
    REQUIRE(a.hash == b.hash);
}

TEST_CASE("imbalance techniques", "[harness]") {
    SECTION("weighted random sampler labels its epsilon as nominal") {
        RunConfig cfg = small_config();
        cfg.epsilon_target.reset();
        cfg.sigma_explicit = 1.0;
        cfg.imbalance = ImbalanceKind::wrs;
        const RunResult r = run_experiment(cfg);
        REQUIRE(r.privacy.note == "nominal (sampler-adjusted amplification not modeled)");
    }
    SECTION("class weighting reweights the per-sample losses") {
        RunConfig base = small_config();
        base.epsilon_target.reset();
        base.sigma_explicit = 0.5;
        RunConfig cw = base;
        cw.imbalance = ImbalanceKind::cw;
        const RunResult r_base = run_experiment(base);
        const RunResult r_cw = run_experiment(cw);
        REQUIRE(r_cw.epoch_losses != r_base.epoch_losses);
        REQUIRE(r_cw.privacy.note.empty());
    }
}

TEST_CASE("config validation and hashing", "[harness]") {
    SECTION("exactly one of epsilon target and sigma must be set") {
        RunConfig both = small_config();
        both.sigma_explicit = 1.0; // epsilon_target still set
        REQUIRE_THROWS_AS(both.validate(), std::invalid_argument);
        RunConfig neither = small_config();
        neither.epsilon_target.reset();
        REQUIRE_THROWS_AS(neither.validate(), std::invalid_argument);
    }
    SECTION("hash ignores the seed but tracks everything else") {
        RunConfig a = small_config();
        RunConfig b = small_config();
        b.seed = 999;
        REQUIRE(config_hash(a) == config_hash(b));
        b.clip_norm = 3.0;
        REQUIRE(config_hash(a) != config_hash(b));
    }
}

TEST_CASE("sweeps over a parameter grid", "[harness][slow]") {
    RunConfig base = small_config();
    base.epochs = 1;
    base.synth.n = 400;

    SECTION("epsilon sweep produces both variants per row") {
        const auto report = run_sweep(base, SweepParameter::epsilon, {"1", "5"}, {1, 2});
        REQUIRE(report.rows.size() == 2);
        for (const auto& row : report.rows) {
            REQUIRE(row.dp.ok);
            REQUIRE(row.adp.ok);
            REQUIRE(row.dp.accountant == AccountantKind::rdp);
            REQUIRE(row.adp.accountant == AccountantKind::tcdp);
            REQUIRE(row.dp.epsilon == Approx(parse_double(row.value)).margin(1e-3));
            REQUIRE(row.adp.epsilon == Approx(parse_double(row.value)).margin(1e-6));
        }
        REQUIRE(report.parameter == "epsilon");
        REQUIRE(report.seeds == std::vector<std::uint64_t>{1, 2});
    }
    SECTION("a failing value is recorded and the sweep continues") {
        const auto report = run_sweep(base, SweepParameter::noise_multiplier, {"-1", "1"}, {1});
        REQUIRE_FALSE(report.rows[0].dp.ok);
        REQUIRE_FALSE(report.rows[0].dp.error.empty());
        REQUIRE(report.rows[1].dp.ok);
    }
    SECTION("trainable-layers sweep forces the mlp") {
        RunConfig cfg = base;
        cfg.synth.n = 300;
        apply_sweep_value(cfg, SweepParameter::trainable_layers, "last");
        REQUIRE(cfg.model == ModelKind::mlp);
        REQUIRE_FALSE(cfg.train_all_layers);
        REQUIRE_THROWS_AS(apply_sweep_value(cfg, SweepParameter::trainable_layers, "some"),
                          std::invalid_argument);
    }
    SECTION("each sweep parameter mutates the matching config field") {
        RunConfig cfg = base;
        apply_sweep_value(cfg, SweepParameter::clip, "3.5");
        REQUIRE(cfg.clip_norm == 3.5);
        apply_sweep_value(cfg, SweepParameter::optimizer, "rmsprop");
        REQUIRE(cfg.optimizer == OptimizerKind::rmsprop);
        apply_sweep_value(cfg, SweepParameter::imbalance, "wrs");
        REQUIRE(cfg.imbalance == ImbalanceKind::wrs);
        apply_sweep_value(cfg, SweepParameter::noise_multiplier, "2");
        REQUIRE(cfg.sigma_explicit == 2.0);
        REQUIRE_FALSE(cfg.epsilon_target.has_value());
        apply_sweep_value(cfg, SweepParameter::epsilon, "5");
        REQUIRE(cfg.epsilon_target == 5.0);
        REQUIRE_FALSE(cfg.sigma_explicit.has_value());
        REQUIRE_THROWS_AS(apply_sweep_value(cfg, SweepParameter::optimizer, "adagrad"),
                          std::invalid_argument);
    }
}

TEST_CASE("sweep report round-trips through CSV exactly", "[harness][slow]") {
    RunConfig base = small_config();
    base.epochs = 1;
    base.synth.n = 400;
    auto report = run_sweep(base, SweepParameter::noise_multiplier, {"0.5", "-2", "2"}, {3, 4});
    REQUIRE_FALSE(report.rows[1].dp.ok); // the bad value keeps its failure marker

    std::ostringstream os;
    write_sweep_csv(os, report);
    std::istringstream is(os.str());
    const SweepReport back = parse_sweep_csv(is);
    REQUIRE(back == report);

    SECTION("text table renders every row") {
        std::ostringstream txt;
        write_sweep_text(txt, report);
        const std::string s = txt.str();
        REQUIRE(s.find("noise_multiplier") != std::string::npos);
        REQUIRE(s.find("failed:") != std::string::npos);
        REQUIRE(s.find("ADP") != std::string::npos);
    }
}

TEST_CASE("mlp with a frozen hidden layer runs end to end", "[harness]") {
    RunConfig cfg = small_config();
    cfg.model = ModelKind::mlp;
    cfg.hidden_width = 8;
    cfg.train_all_layers = false;
    cfg.epsilon_target.reset();
    cfg.sigma_explicit = 1.0;
    const RunResult r = run_experiment(cfg);
    REQUIRE(r.eval.accuracy >= 0.0);
    REQUIRE(r.eval.accuracy <= 1.0);
    REQUIRE(std::isfinite(r.eval.roc_auc));
    REQUIRE(r.steps > 0);
}

TEST_CASE("malformed dataset labels are reported with their row", "[harness]") {
    const std::string path = "/tmp/dpopt_bad_labels.csv";
    {
        std::ofstream os(path);
        os << "label,f0\n0,1.5\nx,2.0\n";
    }
    REQUIRE_THROWS_WITH(load_dataset(path), Catch::Contains("row 3"));
}

TEST_CASE("budget cap flows through run_experiment", "[harness]") {
    RunConfig cfg = small_config();
    cfg.epsilon_target.reset();
    cfg.sigma_explicit = 0.6;
    cfg.epochs = 40;
    cfg.epsilon_cap = 1.5;
    const RunResult r = run_experiment(cfg);
    REQUIRE(r.halted_on_budget);
    REQUIRE(r.epoch_losses.size() < 40);
}
