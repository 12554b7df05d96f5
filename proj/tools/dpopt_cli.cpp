#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpopt/dpopt.hpp"

namespace {

using nlohmann::json;

struct ConfigFlags {
    dpopt::RunConfig cfg;
    std::string model = "logistic";
    std::string trainable = "all";
    std::string optimizer = "adamw";
    std::string accountant = "rdp";
    std::string imbalance = "none";
    std::string schedule = "one-cycle";
    std::string lot_mode = "poisson";
    std::optional<double> epsilon;
    std::optional<double> sigma;
};

void add_config_options(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--model", f.model, "Model kind: logistic | mlp")->capture_default_str();
    cmd->add_option("--hidden-width", f.cfg.hidden_width, "MLP hidden width")->capture_default_str();
    cmd->add_option("--trainable-layers", f.trainable, "Trainable layers: all | last")->capture_default_str();
    cmd->add_option("--dataset", f.cfg.dataset_path, "Columnar dataset file (default: synthesize)");
    cmd->add_option("--synth-n", f.cfg.synth.n, "Synthetic sample count")->capture_default_str();
    cmd->add_option("--synth-dim", f.cfg.synth.dim, "Synthetic feature dimension")->capture_default_str();
    cmd->add_option("--synth-ratio", f.cfg.synth.minority_ratio, "Synthetic minority-class fraction")->capture_default_str();
    cmd->add_option("--synth-separation", f.cfg.synth.separation, "Distance between synthetic class means")->capture_default_str();
    cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lot-size", f.cfg.lot_size, "Lot (batch) size L")->capture_default_str();
    cmd->add_option("--learning-rate", f.cfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--clip", f.cfg.clip_norm, "Per-sample gradient clip norm S")->capture_default_str();
    cmd->add_option("--epsilon", f.epsilon, "Target epsilon (calibrates the noise)");
    cmd->add_option("--sigma", f.sigma, "Explicit noise multiplier (skips calibration)");
    cmd->add_option("--optimizer", f.optimizer, "sgd | rmsprop | adam | adamw")->capture_default_str();
    cmd->add_flag("--adaptive", f.cfg.adaptive, "Decay the noise variance each epoch");
    cmd->add_option("--accountant", f.accountant, "rdp | tcdp")->capture_default_str();
    cmd->add_option("--imbalance", f.imbalance, "none | wrs | cw")->capture_default_str();
    cmd->add_option("--seed", f.cfg.seed, "Master seed")->capture_default_str();
    cmd->add_option("--delta", f.cfg.delta, "Privacy delta")->capture_default_str();
    cmd->add_option("--weight-decay", f.cfg.weight_decay, "Weight decay lambda")->capture_default_str();
    cmd->add_option("--noise-decay", f.cfg.noise_decay, "Noise decay factor R")->capture_default_str();
    cmd->add_option("--schedule", f.schedule, "constant | one-cycle")->capture_default_str();
    cmd->add_option("--lot-mode", f.lot_mode, "poisson | shuffle")->capture_default_str();
    cmd->add_option("--epsilon-cap", f.cfg.epsilon_cap, "Halt when the accountant exceeds this epsilon (0 = off)");
    cmd->add_option("--positive-class", f.cfg.positive_class, "Positive class for metrics")->capture_default_str();
}

dpopt::RunConfig resolve_config(const ConfigFlags& f) {
    dpopt::RunConfig cfg = f.cfg;
    cfg.model = dpopt::model_kind_from_string(f.model);
    cfg.train_all_layers = f.trainable == "all";
    if (f.trainable != "all" && f.trainable != "last")
        throw std::invalid_argument("--trainable-layers must be 'all' or 'last'");
    cfg.optimizer = dpopt::optimizer_kind_from_string(f.optimizer);
    cfg.accountant = dpopt::accountant_kind_from_string(f.accountant);
    cfg.imbalance = dpopt::imbalance_kind_from_string(f.imbalance);
    cfg.schedule = dpopt::schedule_kind_from_string(f.schedule);
    cfg.lot_mode = dpopt::lot_mode_from_string(f.lot_mode);
    if (f.epsilon && f.sigma)
        throw std::invalid_argument("set only one of --epsilon and --sigma");
    if (f.sigma) {
        cfg.sigma_explicit = *f.sigma;
        cfg.epsilon_target.reset();
    } else if (f.epsilon) {
        cfg.epsilon_target = *f.epsilon;
        cfg.sigma_explicit.reset();
    }
    cfg.validate();
    return cfg;
}

json privacy_to_json(const dpopt::PrivacyReport& p) {
    json detail;
    if (p.kind == dpopt::AccountantKind::rdp) {
        if (std::isfinite(p.best_order)) detail["best_order"] = p.best_order;
    } else {
        detail["rho"] = p.rho;
        detail["omega"] = std::isfinite(p.omega) ? json(p.omega) : json();
    }
    if (!p.note.empty()) detail["note"] = p.note;
    json out;
    out["epsilon"] = std::isfinite(p.epsilon) ? json(p.epsilon) : json();
    if (!std::isfinite(p.epsilon)) detail["note"] = "no noise added; epsilon unbounded";
    out["delta"] = p.delta;
    out["accountant"] = dpopt::to_string(p.kind);
    out["detail"] = detail;
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << content;
}

int cmd_run(const ConfigFlags& flags, const std::string& out_dir) {
    const dpopt::RunConfig cfg = resolve_config(flags);
    const dpopt::RunResult r = dpopt::run_experiment(cfg);

    std::cout << "config " << r.hash << "  seed " << cfg.seed << '\n';
    std::cout << "sigma " << dpopt::format_double(r.sigma_used) << "  steps " << r.steps;
    if (r.halted_on_budget) std::cout << "  (halted: epsilon cap reached)";
    std::cout << '\n';
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f  roc_auc %.4f",
                  r.eval.accuracy, r.eval.precision, r.eval.recall, r.eval.f1, r.eval.roc_auc);
    std::cout << buf << '\n';
    if (std::isfinite(r.privacy.epsilon)) {
        std::cout << "epsilon " << dpopt::format_double(r.privacy.epsilon) << " at delta "
                  << dpopt::format_double(r.privacy.delta) << " (" << dpopt::to_string(r.privacy.kind) << ")";
        if (!r.privacy.note.empty()) std::cout << " [" << r.privacy.note << "]";
        std::cout << '\n';
    } else {
        std::cout << "epsilon unbounded (no noise)\n";
    }
    std::cout << "wall " << dpopt::format_double(r.wall_seconds) << " s\n";

    write_file(out_dir + "/privacy.json", privacy_to_json(r.privacy).dump(2) + "\n");
    return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& param,
              const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds,
              const std::string& out_dir) {
    const dpopt::RunConfig base = resolve_config(flags);
    const auto p = dpopt::sweep_parameter_from_string(param);
    const dpopt::SweepReport report = dpopt::run_sweep(base, p, values, seeds);

    std::ostringstream csv, txt;
    dpopt::write_sweep_csv(csv, report);
    dpopt::write_sweep_text(txt, report);
    write_file(out_dir + "/report.csv", csv.str());
    write_file(out_dir + "/report.txt", txt.str());
    std::cout << txt.str();
    std::cout << "wrote " << out_dir << "/report.csv and " << out_dir << "/report.txt\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private optimization toolkit"};
    app.require_subcommand(1);

    std::string out_dir = ".";

    ConfigFlags run_flags;
    auto* run = app.add_subcommand("run", "Train one configuration and report metrics + privacy");
    add_config_options(run, run_flags);
    run->set_config("--config", "", "Flat key=value config file");
    run->add_option("--out-dir", out_dir, "Directory for privacy.json")->capture_default_str();

    ConfigFlags sweep_flags;
    std::string sweep_param = "epsilon";
    std::vector<std::string> sweep_values;
    std::vector<std::uint64_t> sweep_seeds{1, 2, 3, 4, 5};
    auto* sweep = app.add_subcommand("sweep", "Run DP and ADP variants over a parameter grid");
    add_config_options(sweep, sweep_flags);
    sweep->set_config("--config", "", "Flat key=value config file");
    sweep->add_option("--param", sweep_param,
                      "epsilon | clip | noise_multiplier | optimizer | imbalance | trainable_layers")
        ->required();
    sweep->add_option("--values", sweep_values, "Swept values")->required()->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "Seeds to average over")->delimiter(',');
    sweep->add_option("--out-dir", out_dir, "Directory for report.csv / report.txt")->capture_default_str();

    double cal_epsilon = 1.0, cal_delta = 1e-5, cal_q = 0.0, cal_clip = 10.0, cal_decay = 0.99;
    std::size_t cal_steps = 0, cal_lot = 64, cal_n = 0, cal_epochs = 10;
    std::string cal_accountant = "rdp";
    auto* cal = app.add_subcommand("calibrate", "Find the noise multiplier for a target epsilon");
    cal->add_option("--epsilon", cal_epsilon, "Target epsilon")->required();
    cal->add_option("--delta", cal_delta, "Delta")->capture_default_str();
    cal->add_option("--accountant", cal_accountant, "rdp | tcdp")->capture_default_str();
    cal->add_option("--q", cal_q, "Sampling rate (rdp; default lot-size/dataset-size)");
    cal->add_option("--steps", cal_steps, "Composed steps (rdp; default epochs*round(N/L))");
    cal->add_option("--lot-size", cal_lot, "Lot size B")->capture_default_str();
    cal->add_option("--dataset-size", cal_n, "Dataset size M");
    cal->add_option("--clip", cal_clip, "Clip C (tcdp)")->capture_default_str();
    cal->add_option("--noise-decay", cal_decay, "Decay R (tcdp)")->capture_default_str();
    cal->add_option("--epochs", cal_epochs, "Epochs E")->capture_default_str();

    double curve_delta = 1e-5, curve_rho_min = 0.0, curve_rho_max = 2.0;
    std::size_t curve_points = 100;
    std::string curve_out;
    auto* curve = app.add_subcommand("curve", "Emit the rho-epsilon curve as CSV");
    curve->add_option("--delta", curve_delta, "Delta")->capture_default_str();
    curve->add_option("--rho-min", curve_rho_min, "Grid start")->capture_default_str();
    curve->add_option("--rho-max", curve_rho_max, "Grid end")->capture_default_str();
    curve->add_option("--points", curve_points, "Grid size")->capture_default_str();
    curve->add_option("--out", curve_out, "Output file (default: stdout)");

    dpopt::SynthSpec synth_spec;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in the columnar format");
    synth->add_option("--n", synth_spec.n, "Sample count")->capture_default_str();
    synth->add_option("--dim", synth_spec.dim, "Feature dimension")->capture_default_str();
    synth->add_option("--ratio", synth_spec.minority_ratio, "Minority-class fraction")->capture_default_str();
    synth->add_option("--separation", synth_spec.separation, "Distance between class means")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Output file")->required();

    try {
        app.parse(argc, argv);

        if (run->parsed()) return cmd_run(run_flags, out_dir);
        if (sweep->parsed()) return cmd_sweep(sweep_flags, sweep_param, sweep_values, sweep_seeds, out_dir);

        if (cal->parsed()) {
            double sigma = 0.0;
            if (cal_accountant == "rdp") {
                double q = cal_q;
                std::size_t steps = cal_steps;
                if (q <= 0.0) {
                    if (cal_n == 0) throw std::invalid_argument("calibrate: give --q or --dataset-size");
                    q = std::min(1.0, static_cast<double>(cal_lot) / static_cast<double>(cal_n));
                }
                if (steps == 0) {
                    if (cal_n == 0) throw std::invalid_argument("calibrate: give --steps or --dataset-size");
                    const auto spe = static_cast<std::size_t>(std::max<long long>(
                        1, std::llround(static_cast<double>(cal_n) / static_cast<double>(cal_lot))));
                    steps = cal_epochs * spe;
                }
                sigma = dpopt::calibrate_sigma_rdp(cal_epsilon, cal_delta, q, steps);
            } else if (cal_accountant == "tcdp") {
                if (cal_n == 0) throw std::invalid_argument("calibrate: tcdp needs --dataset-size");
                sigma = dpopt::calibrate_sigma0_tcdp(cal_epsilon, cal_delta, cal_lot, cal_n,
                                                     cal_clip, cal_decay, cal_epochs);
            } else {
                throw std::invalid_argument("unknown accountant: " + cal_accountant);
            }
            std::cout << "sigma=" << dpopt::format_double(sigma) << '\n';
            return 0;
        }

        if (curve->parsed()) {
            if (curve_points < 2) throw std::invalid_argument("curve: need at least 2 points");
            std::vector<double> grid(curve_points);
            for (std::size_t i = 0; i < curve_points; ++i) {
                grid[i] = curve_rho_min + (curve_rho_max - curve_rho_min) *
                                              static_cast<double>(i) /
                                              static_cast<double>(curve_points - 1);
            }
            const auto pts = dpopt::rho_epsilon_curve(curve_delta, grid);
            if (curve_out.empty()) {
                dpopt::write_rho_epsilon_csv(std::cout, pts);
            } else {
                std::ofstream os(curve_out);
                if (!os) throw std::runtime_error("cannot write " + curve_out);
                dpopt::write_rho_epsilon_csv(os, pts);
            }
            return 0;
        }

        if (synth->parsed()) {
            const dpopt::Dataset d = dpopt::synth_dataset_full(synth_spec, synth_seed);
            dpopt::save_dataset(synth_out, d);
            std::cout << "wrote " << synth_out << " (" << d.size() << " rows, " << d.dim()
                      << " features)\n";
            return 0;
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        std::cerr << json{{"error", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << '\n';
        return 1;
    }
}
