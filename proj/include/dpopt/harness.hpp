#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpopt/accountant.hpp"
#include "dpopt/dataset.hpp"
#include "dpopt/format.hpp"
#include "dpopt/metrics.hpp"
#include "dpopt/model.hpp"
#include "dpopt/optimizer.hpp"
#include "dpopt/sampling.hpp"
#include "dpopt/trainer.hpp"

namespace dpopt {

enum class ImbalanceKind { none, wrs, cw };

inline const char* to_string(ImbalanceKind k) {
    switch (k) {
        case ImbalanceKind::none: return "none";
        case ImbalanceKind::wrs: return "wrs";
        default: return "cw";
    }
}

inline ImbalanceKind imbalance_kind_from_string(const std::string& s) {
    if (s == "none") return ImbalanceKind::none;
    if (s == "wrs") return ImbalanceKind::wrs;
    if (s == "cw") return ImbalanceKind::cw;
    throw std::invalid_argument("unknown imbalance technique: " + s);
}

inline AccountantKind accountant_kind_from_string(const std::string& s) {
    if (s == "rdp") return AccountantKind::rdp;
    if (s == "tcdp") return AccountantKind::tcdp;
    throw std::invalid_argument("unknown accountant: " + s);
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "logistic") return ModelKind::logistic;
    if (s == "mlp") return ModelKind::mlp;
    throw std::invalid_argument("unknown model: " + s);
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "constant") return ScheduleKind::constant;
    if (s == "one-cycle") return ScheduleKind::one_cycle;
    throw std::invalid_argument("unknown schedule: " + s);
}

inline LotMode lot_mode_from_string(const std::string& s) {
    if (s == "poisson") return LotMode::poisson;
    if (s == "shuffle") return LotMode::shuffle;
    throw std::invalid_argument("unknown lot mode: " + s);
}

/// Everything one experiment needs. Exactly one of epsilon_target and
/// sigma_explicit must be set.
struct RunConfig {
    ModelKind model = ModelKind::logistic;
    std::size_t hidden_width = 32;
    bool train_all_layers = true;
    std::string dataset_path; // empty: synthesize
    SynthSpec synth;
    std::size_t epochs = 10;
    std::size_t lot_size = 64;
    double learning_rate = 1e-4;
    double clip_norm = 10.0;
    std::optional<double> epsilon_target = 1.0;
    std::optional<double> sigma_explicit;
    OptimizerKind optimizer = OptimizerKind::adamw;
    bool adaptive = false;
    AccountantKind accountant = AccountantKind::rdp;
    ImbalanceKind imbalance = ImbalanceKind::none;
    std::uint64_t seed = 1;
    double delta = 1e-5;
    double weight_decay = 0.01;
    double noise_decay = 0.99; // R
    ScheduleKind schedule = ScheduleKind::one_cycle;
    LotMode lot_mode = LotMode::poisson; // ignored when imbalance = wrs
    double epsilon_cap = 0.0;
    int positive_class = 1; // metrics default to treating the majority class as positive

    void validate() const {
        if (epsilon_target.has_value() == sigma_explicit.has_value())
            throw std::invalid_argument("config: set exactly one of epsilon target and explicit sigma");
        if (epsilon_target && *epsilon_target <= 0.0)
            throw std::invalid_argument("config: epsilon target must be positive");
        if (sigma_explicit && *sigma_explicit < 0.0)
            throw std::invalid_argument("config: sigma must be nonnegative");
        if (epochs == 0) throw std::invalid_argument("config: epochs must be >= 1");
        if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("config: delta outside (0,1)");
        if (positive_class != 0 && positive_class != 1)
            throw std::invalid_argument("config: positive class must be 0 or 1");
    }
};

/// Canonical flat key=value form; also the input to the config hash.
/// The seed is kept out so sweep rows over many seeds share one hash.
inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "model=" << to_string(c.model) << '\n'
       << "hidden-width=" << c.hidden_width << '\n'
       << "trainable-layers=" << (c.train_all_layers ? "all" : "last") << '\n'
       << "dataset=" << c.dataset_path << '\n'
       << "synth-n=" << c.synth.n << '\n'
       << "synth-dim=" << c.synth.dim << '\n'
       << "synth-ratio=" << format_double(c.synth.minority_ratio) << '\n'
       << "synth-separation=" << format_double(c.synth.separation) << '\n'
       << "epochs=" << c.epochs << '\n'
       << "lot-size=" << c.lot_size << '\n'
       << "learning-rate=" << format_double(c.learning_rate) << '\n'
       << "clip=" << format_double(c.clip_norm) << '\n'
       << "epsilon=" << (c.epsilon_target ? format_double(*c.epsilon_target) : std::string("none")) << '\n'
       << "sigma=" << (c.sigma_explicit ? format_double(*c.sigma_explicit) : std::string("none")) << '\n'
       << "optimizer=" << to_string(c.optimizer) << '\n'
       << "adaptive=" << (c.adaptive ? "true" : "false") << '\n'
       << "accountant=" << to_string(c.accountant) << '\n'
       << "imbalance=" << to_string(c.imbalance) << '\n'
       << "delta=" << format_double(c.delta) << '\n'
       << "weight-decay=" << format_double(c.weight_decay) << '\n'
       << "noise-decay=" << format_double(c.noise_decay) << '\n'
       << "schedule=" << to_string(c.schedule) << '\n'
       << "lot-mode=" << to_string(c.lot_mode) << '\n'
       << "epsilon-cap=" << format_double(c.epsilon_cap) << '\n'
       << "positive-class=" << c.positive_class << '\n';
    return os.str();
}

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_hash(const RunConfig& c) { return fnv1a_hex(serialize_config(c)); }

struct RunResult {
    EvalResult eval;
    PrivacyReport privacy;
    double wall_seconds = 0.0;
    double sigma_used = 0.0;     // noise multiplier the run trained with
    double final_sigma_sq = 0.0; // optimizer's sigma_t^2 after the last epoch
    std::size_t steps = 0;
    bool halted_on_budget = false;
    std::string hash;
    std::vector<double> epoch_losses;
};

namespace detail {

inline EvalResult evaluate(const Model& model, const ModelParams& params,
                           const Dataset& test, int positive_class) {
    const Matrix probs = model.predict_proba(params, test.features);
    std::vector<double> scores(test.size());
    std::vector<int> predicted(test.size());
    const int other = 1 - positive_class;
    for (std::size_t i = 0; i < test.size(); ++i) {
        scores[i] = probs(i, static_cast<std::size_t>(positive_class));
        predicted[i] = scores[i] > 0.5 ? positive_class : other;
    }
    EvalResult r = binary_metrics(test.labels, predicted, positive_class);
    r.roc_auc = roc_auc(test.labels, scores, positive_class);
    return r;
}

} // namespace detail

/// Calibrate (if needed), train, evaluate on the test split, and assemble the
/// privacy report.
inline RunResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    DataSplits splits = cfg.dataset_path.empty()
                            ? synth_dataset(cfg.synth, cfg.seed)
                            : split_dataset(load_dataset(cfg.dataset_path), cfg.seed);
    const std::size_t n_train = splits.train.size();
    if (n_train == 0) throw std::runtime_error("run: empty training split");
    if (splits.test.size() == 0) throw std::runtime_error("run: empty test split (dataset too small)");

    const LotMode lot_mode = cfg.imbalance == ImbalanceKind::wrs ? LotMode::weighted : cfg.lot_mode;
    LotSampler sampler(lot_mode, n_train, cfg.lot_size, cfg.seed, splits.train.labels);
    const std::size_t steps_per_epoch = sampler.steps_per_epoch();
    const std::size_t total_steps = cfg.epochs * steps_per_epoch;
    const double q = sampler.sampling_rate();

    double sigma = 0.0;
    if (cfg.sigma_explicit) {
        sigma = *cfg.sigma_explicit;
    } else if (cfg.accountant == AccountantKind::rdp) {
        sigma = calibrate_sigma_rdp(*cfg.epsilon_target, cfg.delta, q, total_steps);
    } else {
        sigma = calibrate_sigma0_tcdp(*cfg.epsilon_target, cfg.delta, cfg.lot_size, n_train,
                                      cfg.clip_norm, cfg.noise_decay, cfg.epochs);
    }

    DpHyperParams hp;
    hp.clip_norm = cfg.clip_norm;
    hp.noise_multiplier = sigma;
    hp.lot_size = cfg.lot_size;
    hp.learning_rate = cfg.learning_rate;
    hp.weight_decay = cfg.weight_decay;
    hp.noise_decay = cfg.noise_decay;
    hp.optimizer = cfg.optimizer;
    hp.adaptive = cfg.adaptive;
    hp.validate();

    ModelConfig mc;
    mc.kind = cfg.model;
    mc.input_dim = splits.train.dim();
    mc.hidden_width = cfg.hidden_width;
    mc.train_all = cfg.train_all_layers;
    Model model(mc);
    RngStream init_rng(cfg.seed, 0x696e6974ULL); // "init"
    ModelParams params = model.init_params(init_rng);
    DpOptimizerState state = DpOptimizerState::init(params.size(), hp);

    std::unique_ptr<TrainingAccountant> accountant;
    if (sigma > 0.0 && cfg.accountant == AccountantKind::tcdp) {
        accountant = std::make_unique<TcdpTrainingAccountant>(cfg.lot_size, n_train, cfg.clip_norm,
                                                              cfg.noise_decay, sigma);
    } else {
        accountant = std::make_unique<RdpTrainingAccountant>();
    }

    TrainPlan plan;
    plan.epochs = cfg.epochs;
    plan.schedule = cfg.schedule;
    plan.lot_mode = lot_mode;
    plan.epsilon_cap = cfg.epsilon_cap;
    plan.delta = cfg.delta;
    if (cfg.imbalance == ImbalanceKind::cw) {
        plan.class_weight = class_weights(ClassCounts::from_labels(splits.train.labels));
    }

    RunResult result;
    const TrainResult tr = train(model, params, splits.train, hp, state, plan, cfg.seed,
                                 accountant.get());
    result.halted_on_budget = tr.halted_on_budget;
    for (const auto& e : tr.epochs) result.epoch_losses.push_back(e.mean_loss);
    result.steps = state.t;
    result.final_sigma_sq = state.sigma_sq;
    result.sigma_used = sigma;

    result.eval = detail::evaluate(model, params, splits.test, cfg.positive_class);
    result.privacy = accountant->report(cfg.delta);
    if (cfg.imbalance == ImbalanceKind::wrs) {
        result.privacy.note = "nominal (sampler-adjusted amplification not modeled)";
    }
    result.hash = config_hash(cfg);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepParameter { epsilon, clip, noise_multiplier, optimizer, imbalance, trainable_layers };

inline const char* to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::epsilon: return "epsilon";
        case SweepParameter::clip: return "clip";
        case SweepParameter::noise_multiplier: return "noise_multiplier";
        case SweepParameter::optimizer: return "optimizer";
        case SweepParameter::imbalance: return "imbalance";
        default: return "trainable_layers";
    }
}

inline SweepParameter sweep_parameter_from_string(const std::string& s) {
    if (s == "epsilon") return SweepParameter::epsilon;
    if (s == "clip") return SweepParameter::clip;
    if (s == "noise_multiplier") return SweepParameter::noise_multiplier;
    if (s == "optimizer") return SweepParameter::optimizer;
    if (s == "imbalance") return SweepParameter::imbalance;
    if (s == "trainable_layers") return SweepParameter::trainable_layers;
    throw std::invalid_argument("unknown sweep parameter: " + s);
}

/// Seed-averaged metrics for one (value, variant) cell, or the failure that
/// kept it empty.
struct SweepCell {
    bool ok = false;
    std::string error;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double roc_auc = 0.0;
    double epsilon = 0.0; // achieved, averaged over seeds
    AccountantKind accountant = AccountantKind::rdp;

    bool operator==(const SweepCell&) const = default;
};

struct SweepRow {
    std::string value;
    SweepCell dp;  // fixed-noise variant
    SweepCell adp; // adaptive noise-decay variant

    bool operator==(const SweepRow&) const = default;
};

struct SweepReport {
    std::string parameter;
    std::vector<std::uint64_t> seeds;
    std::string base_hash;
    std::vector<SweepRow> rows;

    bool operator==(const SweepReport&) const = default;
};

inline void apply_sweep_value(RunConfig& cfg, SweepParameter param, const std::string& value) {
    switch (param) {
        case SweepParameter::epsilon:
            cfg.epsilon_target = parse_double(value);
            cfg.sigma_explicit.reset();
            break;
        case SweepParameter::clip:
            cfg.clip_norm = parse_double(value);
            break;
        case SweepParameter::noise_multiplier:
            cfg.sigma_explicit = parse_double(value);
            cfg.epsilon_target.reset();
            break;
        case SweepParameter::optimizer:
            cfg.optimizer = optimizer_kind_from_string(value);
            break;
        case SweepParameter::imbalance:
            cfg.imbalance = imbalance_kind_from_string(value);
            break;
        case SweepParameter::trainable_layers:
            if (value != "all" && value != "last")
                throw std::invalid_argument("trainable_layers value must be 'all' or 'last'");
            cfg.model = ModelKind::mlp;
            cfg.train_all_layers = value == "all";
            break;
    }
}

/// Run both variants for every value, averaged over the seed list. A failed
/// cell is recorded with its reason and the sweep continues.
inline SweepReport run_sweep(const RunConfig& base, SweepParameter param,
                             const std::vector<std::string>& values,
                             const std::vector<std::uint64_t>& seeds) {
    if (values.empty()) throw std::invalid_argument("sweep: no values given");
    if (seeds.empty()) throw std::invalid_argument("sweep: no seeds given");

    SweepReport report;
    report.parameter = to_string(param);
    report.seeds = seeds;
    report.base_hash = config_hash(base);

    for (const auto& value : values) {
        SweepRow row;
        row.value = value;
        for (const bool adaptive : {false, true}) {
            SweepCell& cell = adaptive ? row.adp : row.dp;
            cell.accountant = adaptive ? AccountantKind::tcdp : AccountantKind::rdp;
            try {
                RunConfig cfg = base;
                apply_sweep_value(cfg, param, value);
                cfg.adaptive = adaptive;
                cfg.accountant = adaptive ? AccountantKind::tcdp : AccountantKind::rdp;
                double acc = 0, prec = 0, rec = 0, f1 = 0, auc = 0, eps = 0;
                for (std::uint64_t seed : seeds) {
                    cfg.seed = seed;
                    const RunResult r = run_experiment(cfg);
                    acc += r.eval.accuracy;
                    prec += r.eval.precision;
                    rec += r.eval.recall;
                    f1 += r.eval.f1;
                    auc += r.eval.roc_auc;
                    eps += r.privacy.epsilon;
                }
                const double k = static_cast<double>(seeds.size());
                cell.accuracy = acc / k;
                cell.precision = prec / k;
                cell.recall = rec / k;
                cell.f1 = f1 / k;
                cell.roc_auc = auc / k;
                cell.epsilon = eps / k;
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report emission and parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_sanitize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        out.push_back((c == ',' || c == '\n' || c == '\r') ? ';' : c);
    }
    return out;
}

inline void write_cell(std::ostream& os, const SweepCell& c) {
    if (c.ok) {
        os << "ok," << format_double(c.accuracy) << ',' << format_double(c.precision) << ','
           << format_double(c.recall) << ',' << format_double(c.f1) << ','
           << format_double(c.roc_auc) << ',' << format_double(c.epsilon) << ','
           << to_string(c.accountant);
    } else {
        os << "failed:" << csv_sanitize(c.error) << ",,,,,,," << to_string(c.accountant);
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline SweepCell parse_cell(const std::vector<std::string>& cells, std::size_t at) {
    SweepCell c;
    const std::string& status = cells.at(at);
    c.accountant = accountant_kind_from_string(cells.at(at + 7));
    if (status == "ok") {
        c.ok = true;
        c.accuracy = parse_double(cells.at(at + 1));
        c.precision = parse_double(cells.at(at + 2));
        c.recall = parse_double(cells.at(at + 3));
        c.f1 = parse_double(cells.at(at + 4));
        c.roc_auc = parse_double(cells.at(at + 5));
        c.epsilon = parse_double(cells.at(at + 6));
    } else if (status.rfind("failed:", 0) == 0) {
        c.ok = false;
        c.error = status.substr(7);
    } else {
        throw std::runtime_error("report csv: bad cell status '" + status + "'");
    }
    return c;
}

} // namespace detail

inline const char* kSweepCsvHeader =
    "param,value,seeds,config_hash,"
    "dp_status,dp_accuracy,dp_precision,dp_recall,dp_f1,dp_roc_auc,dp_epsilon,dp_accountant,"
    "adp_status,adp_accuracy,adp_precision,adp_recall,adp_f1,adp_roc_auc,adp_epsilon,adp_accountant";

inline void write_sweep_csv(std::ostream& os, const SweepReport& r) {
    os << kSweepCsvHeader << '\n';
    std::string seeds;
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
        if (i) seeds += ';';
        seeds += std::to_string(r.seeds[i]);
    }
    for (const auto& row : r.rows) {
        os << r.parameter << ',' << detail::csv_sanitize(row.value) << ',' << seeds << ','
           << r.base_hash << ',';
        detail::write_cell(os, row.dp);
        os << ',';
        detail::write_cell(os, row.adp);
        os << '\n';
    }
}

inline SweepReport parse_sweep_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kSweepCsvHeader)
        throw std::runtime_error("report csv: unexpected header");
    SweepReport r;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 20) throw std::runtime_error("report csv: wrong column count");
        if (first) {
            r.parameter = cells[0];
            r.base_hash = cells[3];
            std::stringstream ss(cells[2]);
            std::string tok;
            while (std::getline(ss, tok, ';')) r.seeds.push_back(std::stoull(tok));
            first = false;
        }
        SweepRow row;
        row.value = cells[1];
        row.dp = detail::parse_cell(cells, 4);
        row.adp = detail::parse_cell(cells, 12);
        r.rows.push_back(std::move(row));
    }
    return r;
}

inline SweepReport parse_sweep_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open report: " + path);
    return parse_sweep_csv(is);
}

/// Aligned text table: one row per swept value, DP and
/// ADP columns side by side per metric.
inline void write_sweep_text(std::ostream& os, const SweepReport& r) {
    os << "Sweep over " << r.parameter << " (DP = fixed noise, ADP = adaptive noise decay)\n";
    os << "seeds:";
    for (auto s : r.seeds) os << ' ' << s;
    os << "   config " << r.base_hash << "\n\n";

    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-14s %-9s", r.parameter.c_str(), "variant");
    os << buf;
    for (const char* m : {"Accuracy", "Precision", "Recall", "F1", "ROC", "eps"}) {
        std::snprintf(buf, sizeof(buf), " %10s", m);
        os << buf;
    }
    os << '\n';
    for (const auto& row : r.rows) {
        for (const bool adp : {false, true}) {
            const SweepCell& c = adp ? row.adp : row.dp;
            std::snprintf(buf, sizeof(buf), "%-14s %-9s", row.value.c_str(), adp ? "ADP" : "DP");
            os << buf;
            if (c.ok) {
                for (double v : {c.accuracy, c.precision, c.recall, c.f1, c.roc_auc}) {
                    std::snprintf(buf, sizeof(buf), "    %6.2f%%", 100.0 * v);
                    os << buf;
                }
                std::snprintf(buf, sizeof(buf), " %10.4g", c.epsilon);
                os << buf;
            } else {
                os << "    failed: " << c.error;
            }
            os << '\n';
        }
    }
}

} // namespace dpopt
