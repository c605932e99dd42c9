#pragma once

#include "gla/curvature.hpp"
#include "gla/datasets.hpp"
#include "gla/finite_model.hpp"
#include "gla/mlp.hpp"
#include "gla/posterior.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace gla {

// --- Checkpoints ------------------------------------------------------------
// Field names {layer_sizes, activation, task, weights, seed, prior_std} are
// fixed; `use_bias` is optional and defaults to true.
struct Checkpoint {
    MlpArchitecture arch;
    Parameters params;
    std::uint64_t seed = 0;
    double prior_std = 1.0;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// --- Curvature / posterior --------------------------------------------------
nlohmann::json curvature_to_json(const CurvatureEstimate& estimate);
CurvatureEstimate curvature_from_json(const nlohmann::json& j);

nlohmann::json tempered_to_json(const TemperedHessian& h);
TemperedHessian tempered_from_json(const nlohmann::json& j);

// Posterior persists mode + precision payload; factorizations are rebuilt.
nlohmann::json posterior_to_json(const GlaPosterior& posterior);
GlaPosterior posterior_from_json(const nlohmann::json& j);

// --- Finite models ----------------------------------------------------------
// Document layout {hypotheses, prior, outcomes, truth, likelihood} where
// `outcomes` enumerates the full (x, y) grid and truth/likelihood entries
// align with that enumeration.
nlohmann::json finite_model_to_json(const FiniteModel& model);
FiniteModel finite_model_from_json(const nlohmann::json& j);
FiniteModel load_finite_model(const std::string& path);

// --- Experiment configuration ----------------------------------------------
struct ExperimentConfig {
    GeneratorSpec dataset;
    Eigen::VectorXd ood_shift;    // empty = no ood translation
    double ood_rotation_deg = 0.0;
    MlpArchitecture arch;
    TrainConfig train;
    std::vector<CurvatureKind> kinds = all_curvature_kinds();
    std::vector<double> temperatures; // empty = default grid
    int mc_samples = 50;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir = ".";
    double toy_temperature = 1.0;
    int eval_n = 0;               // 0 = dataset.n
    std::string theory_model_path;
    std::string config_hash_hex = "0";

    void validate() const;
};

// 13 log-spaced temperatures in [1e-2, 1e1].
std::vector<double> default_temperature_grid();

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

} // namespace gla
