// Command-line front end: train MAP networks, build tempered curvature
// posteriors, and emit plot-ready CSV artifacts.

#include "gla/csv.hpp"
#include "gla/curvature.hpp"
#include "gla/datasets.hpp"
#include "gla/finite_model.hpp"
#include "gla/mlp.hpp"
#include "gla/posterior.hpp"
#include "gla/predictive.hpp"
#include "gla/rng.hpp"
#include "gla/serialize.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace gla;

// Exit codes: 0 success, 1 invariant breach, 2 usage/config error.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvariantBreach : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string kinds_csv;
    std::optional<std::uint64_t> seed;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed, "single run seed (overrides config seed list)");
    cmd->add_option("--kinds", flags.kinds_csv,
                    "comma-separated curvature kinds (overrides config)");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(flags.config_path);
        if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
        if (flags.seed) cfg.seeds = {*flags.seed};
        if (!flags.kinds_csv.empty()) {
            cfg.kinds.clear();
            std::istringstream in(flags.kinds_csv);
            std::string item;
            while (std::getline(in, item, ',')) {
                item.erase(0, item.find_first_not_of(" \t"));
                item.erase(item.find_last_not_of(" \t") + 1);
                if (!item.empty()) cfg.kinds.push_back(curvature_kind_from_string(item));
            }
        }
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    std::filesystem::create_directories(cfg.output_dir);
    return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

// Substream tags for deriving per-purpose seeds from a run seed.
enum : std::uint64_t { kDataStream = 11, kEvalStream = 12, kTrainStream = 13, kSampleStream = 14 };

Dataset run_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    GeneratorSpec spec = cfg.dataset;
    spec.seed = derive_seed(run_seed, kDataStream);
    return generate(spec);
}

Dataset run_eval_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    GeneratorSpec spec = cfg.dataset;
    spec.seed = derive_seed(run_seed, kEvalStream);
    if (cfg.eval_n > 0) spec.n = cfg.eval_n;
    return generate(spec);
}

TrainResult run_training(const ExperimentConfig& cfg, const Dataset& data,
                         std::uint64_t run_seed) {
    TrainConfig train = cfg.train;
    train.seed = derive_seed(run_seed, kTrainStream);
    TrainResult result = train_map(cfg.arch, data, train);
    if (result.plateau_warning)
        std::cerr << "warning: training loss had not plateaued (seed " << run_seed << ")\n";
    return result;
}

GlaPosterior cell_posterior(const ExperimentConfig& cfg, const Eigen::VectorXd& theta_flat,
                            const CurvatureEstimate& estimate, double temperature,
                            std::uint64_t run_seed, std::size_t cell_index) {
    const double tau = prior_precision_from_std(cfg.train.prior_std);
    const TemperedHessian h = temper(estimate, temperature, tau);
    const std::uint64_t seed = derive_seed(derive_seed(run_seed, kSampleStream), cell_index);
    return build_posterior(theta_flat, h, seed);
}

int cmd_train(const ExperimentConfig& cfg) {
    for (std::uint64_t r : cfg.seeds) {
        const Dataset data = run_dataset(cfg, r);
        const TrainResult result = run_training(cfg, data, r);

        Checkpoint ckpt{cfg.arch, result.theta_map, r, cfg.train.prior_std};
        const std::string ckpt_path = out_path(cfg, "checkpoint_s" + std::to_string(r) + ".json");
        save_checkpoint(ckpt_path, ckpt);

        CsvWriter trace(out_path(cfg, "trace_s" + std::to_string(r) + ".csv"),
                        {"epoch", "loss"}, provenance_comments(cfg.config_hash_hex));
        for (const auto& [epoch, loss] : result.trace)
            trace.row({std::to_string(epoch), format_double(loss)});
        trace.finish();
        std::cout << "wrote " << ckpt_path << "\n";
    }
    return 0;
}

int cmd_toy_regression(const ExperimentConfig& cfg) {
    if (cfg.arch.task != Task::regression)
        throw ConfigError("toy-regression needs a regression architecture");

    const int grid_n = 241;
    Eigen::MatrixXd grid(grid_n, 1);
    for (int i = 0; i < grid_n; ++i) grid(i, 0) = -6.0 + 0.05 * i;

    for (std::uint64_t r : cfg.seeds) {
        const Dataset data = run_dataset(cfg, r);
        const TrainResult trained = run_training(cfg, data, r);
        const Eigen::VectorXd theta_flat = trained.theta_map.flatten();
        const std::vector<CurvatureEstimate> estimates =
            estimate_all_fishers(cfg.arch, trained.theta_map, data, cfg.kinds);

        CsvWriter summary(out_path(cfg, "toy_summary_s" + std::to_string(r) + ".csv"),
                          {"kind", "mean_std"}, provenance_comments(cfg.config_hash_hex));
        for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
            const GlaPosterior post =
                cell_posterior(cfg, theta_flat, estimates[k], cfg.toy_temperature, r, k);
            const PredictiveResult pred =
                mc_predict(cfg.arch, post, grid, cfg.mc_samples);

            const std::string kind_name = to_string(cfg.kinds[k]);
            CsvWriter curve(out_path(cfg, "toy_" + kind_name + "_s" + std::to_string(r) + ".csv"),
                            {"x_grid", "mean", "std"},
                            provenance_comments(cfg.config_hash_hex));
            for (int i = 0; i < grid_n; ++i)
                curve.row({format_double(grid(i, 0)), format_double(pred.mean(i, 0)),
                           format_double(pred.std(i, 0))});
            curve.finish();
            summary.row({kind_name, format_double(pred.std.col(0).mean())});
        }
        summary.finish();
        std::cout << "wrote " << out_path(cfg, "toy_summary_s" + std::to_string(r) + ".csv")
                  << "\n";
    }
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    if (cfg.arch.task != Task::classification)
        throw ConfigError("sweep needs a classification architecture");

    for (std::uint64_t r : cfg.seeds) {
        const Dataset data = run_dataset(cfg, r);
        const Dataset eval = run_eval_dataset(cfg, r);
        const TrainResult trained = run_training(cfg, data, r);
        const Eigen::VectorXd theta_flat = trained.theta_map.flatten();
        const std::vector<CurvatureEstimate> estimates =
            estimate_all_fishers(cfg.arch, trained.theta_map, data, cfg.kinds);

        // Cells are pure in (T, kind) and merged in sorted (T, kind) order.
        CsvWriter csv(out_path(cfg, "sweep_s" + std::to_string(r) + ".csv"),
                      {"T", "kind", "accuracy", "mean_entropy", "mean_nll"},
                      provenance_comments(cfg.config_hash_hex));
        for (std::size_t t = 0; t < cfg.temperatures.size(); ++t) {
            for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
                const std::size_t cell = t * cfg.kinds.size() + k;
                const GlaPosterior post = cell_posterior(cfg, theta_flat, estimates[k],
                                                         cfg.temperatures[t], r, cell);
                const EvalMetrics m = evaluate(cfg.arch, post, eval, cfg.mc_samples);
                csv.row({format_double(cfg.temperatures[t]), to_string(cfg.kinds[k]),
                         format_double(m.accuracy), format_double(m.mean_entropy),
                         format_double(m.mean_nll)});
            }
        }
        csv.finish();
        std::cout << "wrote " << out_path(cfg, "sweep_s" + std::to_string(r) + ".csv") << "\n";
    }
    return 0;
}

int cmd_ood(const ExperimentConfig& cfg) {
    if (cfg.arch.task != Task::classification)
        throw ConfigError("ood needs a classification architecture");

    for (std::uint64_t r : cfg.seeds) {
        const Dataset data = run_dataset(cfg, r);
        const Dataset eval_id = run_eval_dataset(cfg, r);
        const Dataset eval_ood =
            apply_domain_shift(eval_id, cfg.ood_shift, cfg.ood_rotation_deg);
        const TrainResult trained = run_training(cfg, data, r);
        const Eigen::VectorXd theta_flat = trained.theta_map.flatten();
        const std::vector<CurvatureEstimate> estimates =
            estimate_all_fishers(cfg.arch, trained.theta_map, data, cfg.kinds);

        CsvWriter csv(out_path(cfg, "ood_s" + std::to_string(r) + ".csv"),
                      {"T", "kind", "id_mean_entropy", "ood_mean_entropy", "ood_lower_flag"},
                      provenance_comments(cfg.config_hash_hex));
        for (std::size_t t = 0; t < cfg.temperatures.size(); ++t) {
            for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
                const std::size_t cell = t * cfg.kinds.size() + k;
                const GlaPosterior post = cell_posterior(cfg, theta_flat, estimates[k],
                                                         cfg.temperatures[t], r, cell);
                const double id_entropy =
                    mc_predict(cfg.arch, post, eval_id.inputs, cfg.mc_samples).entropy.mean();
                const double ood_entropy =
                    mc_predict(cfg.arch, post, eval_ood.inputs, cfg.mc_samples).entropy.mean();
                csv.row({format_double(cfg.temperatures[t]), to_string(cfg.kinds[k]),
                         format_double(id_entropy), format_double(ood_entropy),
                         ood_entropy < id_entropy ? "1" : "0"});
            }
        }
        csv.finish();
        std::cout << "wrote " << out_path(cfg, "ood_s" + std::to_string(r) + ".csv") << "\n";
    }
    return 0;
}

FiniteModel default_bernoulli_model() {
    FiniteModel model;
    model.labels = {"theta=0.3", "theta=0.6"};
    model.prior = Eigen::Vector2d(0.5, 0.5);
    model.truth = Eigen::MatrixXd(1, 2);
    model.truth << 0.5, 0.5;
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 0.7, 0.3;
    b << 0.4, 0.6;
    model.likelihood = {a, b};
    return model;
}

int cmd_theory(const ExperimentConfig& cfg) {
    const FiniteModel model = cfg.theory_model_path.empty()
                                  ? default_bernoulli_model()
                                  : load_finite_model(cfg.theory_model_path);
    const auto comments = provenance_comments(cfg.config_hash_hex);
    std::vector<std::string> breaches;

    {
        // Identity deviation across random points at a fixed (T, beta) grid.
        CsvWriter csv(out_path(cfg, "prior_rescale.csv"),
                      {"temperature", "prior_std", "deviation"}, comments);
        CounterRng rng(derive_seed(cfg.seeds.front(), 21));
        std::vector<Eigen::VectorXd> thetas(1000);
        for (auto& theta : thetas) {
            theta.resize(3);
            for (int i = 0; i < 3; ++i) theta[i] = rng.normal(0.0, 2.0);
        }
        for (double t : {0.1, 1.0, 4.0}) {
            for (double beta : {0.5, 1.0, 2.0}) {
                const double dev = prior_rescale_identity(beta, t, thetas);
                csv.row({format_double(t), format_double(beta), format_double(dev)});
                if (!(dev < 1e-10))
                    breaches.push_back("prior_rescale deviation " + format_double(dev) +
                                       " at T=" + format_double(t) +
                                       ", beta=" + format_double(beta));
            }
        }
        csv.finish();
    }

    {
        // Tempered posterior after one observation of the largest outcome.
        CsvWriter csv(out_path(cfg, "grid_posterior.csv"),
                      {"temperature", "hypothesis", "prior", "weight"}, comments);
        const std::vector<Observation> obs = {{0, model.num_y() - 1}};
        for (double t : {0.0, 1.0, 2.0}) {
            const TemperedGridPosterior post =
                tempered_grid_posterior(model, obs, t, TemperingForm::likelihood_only);
            for (int m = 0; m < model.num_hypotheses(); ++m)
                csv.row({format_double(t), model.label(m), format_double(model.prior[m]),
                         format_double(post.weights[m])});
        }
        csv.finish();
    }

    {
        CsvWriter csv(out_path(cfg, "central_condition.csv"),
                      {"temperature", "hypothesis", "risk", "mass"}, comments);
        for (double t : {1e-3, 1e-2, 1e-1, 1.0}) {
            const CentralConditionResult r = central_condition_mass(model, t);
            for (int m = 0; m < model.num_hypotheses(); ++m)
                csv.row({format_double(t), model.label(m), format_double(r.risks[m]),
                         format_double(r.mass[m])});
        }
        csv.finish();
    }

    {
        // Two-hypothesis, two-class toy: exact posterior-averaged label-noise
        // probability after observing class 0 at the single input.
        CsvWriter csv(out_path(cfg, "aleatoric.csv"), {"temperature", "form", "p_other"},
                      comments);
        FiniteModel toy;
        toy.labels = {"confident", "hedged"};
        toy.prior = Eigen::Vector2d(0.5, 0.5);
        toy.truth = Eigen::MatrixXd(1, 2);
        toy.truth << 1.0, 0.0;
        Eigen::MatrixXd confident(1, 2), hedged(1, 2);
        confident << 0.9, 0.1;
        hedged << 0.6, 0.4;
        toy.likelihood = {confident, hedged};
        const std::vector<Eigen::MatrixXd> table = {confident, hedged};
        for (double t : {0.1, 0.5, 1.0, 2.0, 10.0})
            for (TemperingForm form :
                 {TemperingForm::likelihood_only, TemperingForm::likelihood_and_prior})
                csv.row({format_double(t), to_string(form),
                         format_double(aleatoric_probability(toy, table, 0, 0, t, form))});
        csv.finish();
    }

    {
        MisspecConfig mis;
        mis.seed = cfg.seeds.front();
        const MisspecReport report = misspecification_demo(mis);
        CsvWriter models(out_path(cfg, "misspec_models.csv"),
                         {"model", "slope", "intercept", "tier", "risk"}, comments);
        for (std::size_t i = 0; i < report.models.size(); ++i)
            models.row({std::to_string(i), format_double(report.models[i].slope),
                        format_double(report.models[i].intercept),
                        report.models[i].complex_tier ? "complex" : "simple",
                        format_double(report.risks[static_cast<int>(i)])});
        models.finish();
        CsvWriter csv(out_path(cfg, "misspec.csv"),
                      {"n", "temperature", "simple_mass", "complex_mass"}, comments);
        for (const MisspecRow& row : report.rows)
            csv.row({std::to_string(row.n), format_double(row.temperature),
                     format_double(row.simple_mass), format_double(row.complex_mass)});
        csv.finish();
    }

    std::cout << "wrote theory reports to " << cfg.output_dir << "\n";
    if (!breaches.empty()) throw InvariantBreach(breaches.front());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized Laplace approximation toolkit"};
    app.require_subcommand(1);

    CommonFlags train_flags, toy_flags, sweep_flags, ood_flags, theory_flags;
    CLI::App* train = app.add_subcommand("train", "MAP-train a network, write a checkpoint");
    add_common_flags(train, train_flags);
    CLI::App* toy = app.add_subcommand("toy-regression",
                                       "predictive mean/std curves on a 1-D grid");
    add_common_flags(toy, toy_flags);
    CLI::App* sweep = app.add_subcommand("sweep", "temperature sweep of BMA metrics");
    add_common_flags(sweep, sweep_flags);
    CLI::App* ood = app.add_subcommand("ood", "in-distribution vs shifted-data entropy");
    add_common_flags(ood, ood_flags);
    CLI::App* theory = app.add_subcommand("theory", "finite-model theory reports");
    add_common_flags(theory, theory_flags);

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(resolve_config(train_flags));
        if (toy->parsed()) return cmd_toy_regression(resolve_config(toy_flags));
        if (sweep->parsed()) return cmd_sweep(resolve_config(sweep_flags));
        if (ood->parsed()) return cmd_ood(resolve_config(ood_flags));
        if (theory->parsed()) return cmd_theory(resolve_config(theory_flags));
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvariantBreach& e) {
        std::cerr << "invariant breach: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
