#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gla/csv.hpp"
#include "gla/curvature.hpp"
#include "gla/posterior.hpp"
#include "gla/rng.hpp"
#include "gla/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

using namespace gla;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/gla_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

Checkpoint sample_checkpoint() {
    Checkpoint c;
    c.arch.layer_sizes = {2, 3, 2};
    c.arch.activation = Activation::relu;
    c.arch.task = Task::classification;
    c.params = Parameters::random_init(c.arch, 7);
    c.seed = 7;
    c.prior_std = 1.5;
    return c;
}

} // namespace

TEST_CASE("checkpoint json uses the fixed field names") {
    const nlohmann::json j = checkpoint_to_json(sample_checkpoint());
    for (const char* field : {"layer_sizes", "activation", "task", "weights", "seed",
                              "prior_std"})
        CHECK(j.contains(field));
    CHECK(j["activation"] == "relu");
    CHECK(j["task"] == "classification");
    CHECK(j["seed"] == 7);
}

TEST_CASE("checkpoint round trips exactly") {
    const Checkpoint c = sample_checkpoint();
    TempFile tmp("ckpt.json");
    save_checkpoint(tmp.path, c);
    const Checkpoint back = load_checkpoint(tmp.path);
    CHECK(back.arch.layer_sizes == c.arch.layer_sizes);
    CHECK(back.arch.activation == c.arch.activation);
    CHECK(back.arch.task == c.arch.task);
    CHECK(back.prior_std == c.prior_std);
    CHECK(back.seed == c.seed);
    CHECK((back.params.flatten() - c.params.flatten()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint validation rejects shape mismatches") {
    nlohmann::json j = checkpoint_to_json(sample_checkpoint());
    j["weights"][0][0] = nlohmann::json::array({1.0}); // wrong row width
    CHECK_THROWS_AS(checkpoint_from_json(j), std::invalid_argument);

    nlohmann::json missing = checkpoint_to_json(sample_checkpoint());
    missing.erase("task");
    CHECK_THROWS_AS(checkpoint_from_json(missing), std::invalid_argument);
}

TEST_CASE("curvature estimates round trip for every structure") {
    MlpArchitecture arch;
    arch.layer_sizes = {2, 3, 2};
    arch.task = Task::classification;
    const Parameters theta = Parameters::random_init(arch, 3);
    Dataset data;
    CounterRng rng(12);
    data.inputs.resize(8, 2);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 2; ++j) data.inputs(i, j) = rng.normal();
    data.num_classes = 2;
    for (int i = 0; i < 8; ++i) data.labels.push_back(static_cast<int>(rng.below(2)));

    for (const CurvatureEstimate& e :
         estimate_all_fishers(arch, theta, data, all_curvature_kinds())) {
        const CurvatureEstimate back = curvature_from_json(curvature_to_json(e));
        CHECK(back.kind == e.kind);
        CHECK(back.dataset_size == e.dataset_size);
        CHECK((back.dense() - e.dense()).cwiseAbs().maxCoeff() < 1e-12);

        const TemperedHessian h = temper(e, 1.5, 0.7);
        const TemperedHessian hback = tempered_from_json(tempered_to_json(h));
        CHECK(hback.temperature == h.temperature);
        CHECK(hback.prior_precision == h.prior_precision);
        CHECK((hback.dense() - h.dense()).cwiseAbs().maxCoeff() < 1e-12);

        const GlaPosterior post = build_posterior(theta.flatten(), h, 99);
        const GlaPosterior pback = posterior_from_json(posterior_to_json(post));
        CHECK(pback.seed == post.seed);
        CHECK((pback.theta_map - post.theta_map).cwiseAbs().maxCoeff() == 0.0);
        // Rebuilt factorizations reproduce the same draws.
        for (int s : {0, 3})
            CHECK((pback.sample(s) - post.sample(s)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("finite model round trips and validates") {
    FiniteModel model;
    model.labels = {"a", "b"};
    model.prior = Eigen::Vector2d(0.25, 0.75);
    model.truth = Eigen::MatrixXd(2, 2);
    model.truth << 0.1, 0.2, 0.3, 0.4;
    Eigen::MatrixXd la(2, 2), lb(2, 2);
    la << 0.5, 0.5, 0.9, 0.1;
    lb << 0.3, 0.7, 0.2, 0.8;
    model.likelihood = {la, lb};
    model.validate();

    const nlohmann::json j = finite_model_to_json(model);
    for (const char* field : {"hypotheses", "prior", "outcomes", "truth", "likelihood"})
        CHECK(j.contains(field));
    const FiniteModel back = finite_model_from_json(j);
    CHECK(back.labels == model.labels);
    CHECK((back.prior - model.prior).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.truth - model.truth).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t m = 0; m < model.likelihood.size(); ++m)
        CHECK((back.likelihood[m] - model.likelihood[m]).cwiseAbs().maxCoeff() == 0.0);

    TempFile tmp("model.json");
    std::ofstream(tmp.path) << j.dump(2);
    const FiniteModel loaded = load_finite_model(tmp.path);
    CHECK((loaded.prior - model.prior).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config parsing fills defaults and validates") {
    const nlohmann::json j = {
        {"dataset", {{"kind", "two_moons"}, {"n", 64}}},
        {"architecture",
         {{"layer_sizes", {2, 8, 2}}, {"activation", "tanh"}, {"task", "classification"}}},
    };
    const ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.dataset.kind == GeneratorKind::two_moons);
    CHECK(cfg.dataset.n == 64);
    CHECK(cfg.arch.layer_sizes == std::vector<int>{2, 8, 2});
    CHECK(cfg.kinds == all_curvature_kinds());
    CHECK(cfg.mc_samples == 50);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{0});
    // Default grid: 13 log-spaced temperatures spanning [1e-2, 1e1].
    CHECK(cfg.temperatures.size() == 13);
    CHECK(cfg.temperatures.front() == doctest::Approx(1e-2).epsilon(1e-12));
    CHECK(cfg.temperatures.back() == doctest::Approx(1e1).epsilon(1e-12));
    for (std::size_t i = 1; i < cfg.temperatures.size(); ++i) {
        CHECK(cfg.temperatures[i] > cfg.temperatures[i - 1]);
        const double ratio = cfg.temperatures[i] / cfg.temperatures[i - 1];
        CHECK(ratio == doctest::Approx(std::pow(1000.0, 1.0 / 12.0)).epsilon(1e-9));
    }
    cfg.validate();
}

TEST_CASE("config accepts explicit fields and the string infinity") {
    const nlohmann::json j = {
        {"dataset", {{"kind", "cubic_toy"}, {"n", 10}}},
        {"architecture", {{"layer_sizes", {1, 5, 1}}, {"task", "regression"}}},
        {"train", {{"prior_std", "inf"}, {"epochs", 3}, {"learning_rate", 0.5}}},
        {"temperatures", {0.5, 2.0}},
        {"curvature_kinds", {"diag", "kfac"}},
        {"mc_samples", 7},
        {"seeds", {4, 5}},
        {"toy_temperature", 2.5},
        {"eval_n", 33},
        {"output_dir", "/tmp/somewhere"},
        {"ood", {{"shift", {1.0, -1.0}}, {"rotation_deg", 15.0}}},
    };
    const ExperimentConfig cfg = config_from_json(j);
    CHECK(std::isinf(cfg.train.prior_std));
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.temperatures == std::vector<double>{0.5, 2.0});
    CHECK(cfg.kinds == std::vector<CurvatureKind>{CurvatureKind::diag, CurvatureKind::kfac});
    CHECK(cfg.mc_samples == 7);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
    CHECK(cfg.toy_temperature == 2.5);
    CHECK(cfg.eval_n == 33);
    CHECK(cfg.output_dir == "/tmp/somewhere");
    REQUIRE(cfg.ood_shift.size() == 2);
    CHECK(cfg.ood_shift[0] == 1.0);
    CHECK(cfg.ood_rotation_deg == 15.0);
}

TEST_CASE("config rejects bad temperature grids and missing sections") {
    nlohmann::json j = {
        {"dataset", {{"kind", "two_moons"}}},
        {"architecture", {{"layer_sizes", {2, 2}}, {"task", "classification"}}},
    };
    j["temperatures"] = {1.0, 0.5}; // not sorted
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
    j["temperatures"] = {0.0, 1.0}; // not strictly positive
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
    j.erase("temperatures");
    j.erase("architecture");
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

    nlohmann::json wrong_type = {
        {"dataset", {{"kind", "two_moons"}, {"n", "lots"}}},
        {"architecture", {{"layer_sizes", {2, 2}}, {"task", "classification"}}},
    };
    CHECK_THROWS_AS(config_from_json(wrong_type), std::invalid_argument);
}

TEST_CASE("load_config hashes the file text") {
    TempFile tmp("config.json");
    std::ofstream(tmp.path)
        << R"({"dataset": {"kind": "cubic_toy"}, )"
        << R"("architecture": {"layer_sizes": [1, 2, 1], "task": "regression"}})";
    const ExperimentConfig cfg = load_config(tmp.path);
    CHECK(cfg.config_hash_hex != "0");
    const ExperimentConfig again = load_config(tmp.path);
    CHECK(cfg.config_hash_hex == again.config_hash_hex);
}

TEST_CASE("format_double round trips through parsing") {
    for (double v : {0.0, 1.0, -1.5, 1.0 / 3.0, 1e-300, 3.141592653589793, 17.25}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("csv writer emits comments, header, and validated rows") {
    TempFile tmp("writer.csv");
    {
        CsvWriter w(tmp.path, {"a", "b"}, {"note one", "note two"});
        w.row({"1", "2"});
        CHECK_THROWS_AS(w.row({"only-one"}), std::invalid_argument);
        w.row({"3", "4"});
        w.finish();
    }
    std::ifstream in(tmp.path);
    std::stringstream content;
    content << in.rdbuf();
    CHECK(content.str() == "# note one\n# note two\na,b\n1,2\n3,4\n");
}

TEST_CASE("fnv1a is stable") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a("abc") != fnv1a("acb"));
}
