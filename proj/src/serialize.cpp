#include "gla/serialize.hpp"

#include "gla/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace gla {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument("expected a nested array of numbers");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw std::invalid_argument("ragged nested array");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
    Eigen::VectorXd v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key))
        throw std::invalid_argument(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("field '") + key + "' has the wrong type");
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return field<T>(j, key);
}

} // namespace

// --- Checkpoints ------------------------------------------------------------

json checkpoint_to_json(const Checkpoint& c) {
    c.arch.validate();
    json j;
    j["layer_sizes"] = c.arch.layer_sizes;
    j["activation"] = to_string(c.arch.activation);
    j["task"] = to_string(c.arch.task);
    j["use_bias"] = c.arch.use_bias;
    json weights = json::array();
    for (const auto& w : c.params.weights) weights.push_back(matrix_to_json(w));
    j["weights"] = std::move(weights);
    j["seed"] = c.seed;
    j["prior_std"] = c.prior_std;
    return j;
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint c;
    c.arch.layer_sizes = field<std::vector<int>>(j, "layer_sizes");
    c.arch.activation = activation_from_string(field<std::string>(j, "activation"));
    c.arch.task = task_from_string(field<std::string>(j, "task"));
    c.arch.use_bias = field_or<bool>(j, "use_bias", true);
    c.arch.validate();
    const json& weights = j.contains("weights") ? j.at("weights") : json();
    if (!weights.is_array())
        throw std::invalid_argument("missing or malformed 'weights'");
    for (const auto& w : weights) c.params.weights.push_back(matrix_from_json(w));
    if (c.params.param_count() != c.arch.param_count())
        throw std::invalid_argument("checkpoint weights do not match the architecture");
    const auto shapes = c.arch.layer_shapes();
    for (std::size_t l = 0; l < shapes.size(); ++l)
        if (c.params.weights[l].rows() != shapes[l].first ||
            c.params.weights[l].cols() != shapes[l].second)
            throw std::invalid_argument("checkpoint layer " + std::to_string(l) +
                                        " has the wrong shape");
    if (!c.params.all_finite())
        throw std::invalid_argument("checkpoint weights contain non-finite values");
    c.seed = field<std::uint64_t>(j, "seed");
    c.prior_std = field<double>(j, "prior_std");
    if (!(c.prior_std > 0)) throw std::invalid_argument("prior_std must be positive");
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    write_json_file(path, checkpoint_to_json(c));
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_json(read_json_file(path));
}

// --- Curvature / posterior --------------------------------------------------

namespace {

json kron_eigenbasis_to_json(const KronEigenbasis& b) {
    json j;
    j["u_q"] = matrix_to_json(b.u_q);
    j["u_g"] = matrix_to_json(b.u_g);
    j["s_q"] = vector_to_json(b.s_q);
    j["s_g"] = vector_to_json(b.s_g);
    j["scales"] = vector_to_json(b.scales);
    return j;
}

KronEigenbasis kron_eigenbasis_from_json(const json& j) {
    KronEigenbasis b;
    b.u_q = matrix_from_json(j.at("u_q"));
    b.u_g = matrix_from_json(j.at("u_g"));
    b.s_q = vector_from_json(j.at("s_q"));
    b.s_g = vector_from_json(j.at("s_g"));
    b.scales = vector_from_json(j.at("scales"));
    return b;
}

json shapes_to_json(const std::vector<std::pair<int, int>>& shapes) {
    json out = json::array();
    for (const auto& [r, c] : shapes) out.push_back(json::array({r, c}));
    return out;
}

std::vector<std::pair<int, int>> shapes_from_json(const json& j) {
    std::vector<std::pair<int, int>> shapes;
    for (const auto& s : j) shapes.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    return shapes;
}

} // namespace

json curvature_to_json(const CurvatureEstimate& estimate) {
    estimate.validate();
    json j;
    j["kind"] = to_string(estimate.kind);
    j["N"] = estimate.dataset_size;
    j["param_count"] = estimate.param_count;
    j["layer_shapes"] = shapes_to_json(estimate.layer_shapes);
    switch (estimate.kind) {
        case CurvatureKind::full:
            j["full"] = matrix_to_json(estimate.full);
            break;
        case CurvatureKind::diag:
            j["diagonal"] = vector_to_json(estimate.diagonal);
            break;
        case CurvatureKind::block_diag: {
            json blocks = json::array();
            for (const auto& b : estimate.blocks) blocks.push_back(matrix_to_json(b));
            j["blocks"] = std::move(blocks);
            break;
        }
        case CurvatureKind::kfac: {
            json kron = json::array();
            for (const auto& k : estimate.kron)
                kron.push_back({{"q_cov", matrix_to_json(k.q_cov)},
                                {"g_cov", matrix_to_json(k.g_cov)}});
            j["kron"] = std::move(kron);
            break;
        }
        case CurvatureKind::ekfac: {
            json bases = json::array();
            for (const auto& b : estimate.ekfac) bases.push_back(kron_eigenbasis_to_json(b));
            j["ekfac"] = std::move(bases);
            break;
        }
    }
    return j;
}

CurvatureEstimate curvature_from_json(const json& j) {
    CurvatureEstimate e;
    e.kind = curvature_kind_from_string(field<std::string>(j, "kind"));
    e.dataset_size = field<int>(j, "N");
    e.param_count = field<int>(j, "param_count");
    e.layer_shapes = shapes_from_json(j.at("layer_shapes"));
    switch (e.kind) {
        case CurvatureKind::full:
            e.full = matrix_from_json(j.at("full"));
            break;
        case CurvatureKind::diag:
            e.diagonal = vector_from_json(j.at("diagonal"));
            break;
        case CurvatureKind::block_diag:
            for (const auto& b : j.at("blocks")) e.blocks.push_back(matrix_from_json(b));
            break;
        case CurvatureKind::kfac:
            for (const auto& k : j.at("kron"))
                e.kron.push_back({matrix_from_json(k.at("q_cov")),
                                  matrix_from_json(k.at("g_cov"))});
            break;
        case CurvatureKind::ekfac:
            for (const auto& b : j.at("ekfac")) e.ekfac.push_back(kron_eigenbasis_from_json(b));
            break;
    }
    e.validate();
    return e;
}

json tempered_to_json(const TemperedHessian& h) {
    json j;
    j["kind"] = to_string(h.kind);
    j["temperature"] = h.temperature;
    j["prior_precision"] = h.prior_precision;
    j["jitter"] = h.jitter;
    j["param_count"] = h.param_count;
    j["layer_shapes"] = shapes_to_json(h.layer_shapes);
    switch (h.kind) {
        case CurvatureKind::full:
            j["full"] = matrix_to_json(h.full);
            break;
        case CurvatureKind::diag:
            j["diagonal"] = vector_to_json(h.diagonal);
            break;
        case CurvatureKind::block_diag: {
            json blocks = json::array();
            for (const auto& b : h.blocks) blocks.push_back(matrix_to_json(b));
            j["blocks"] = std::move(blocks);
            break;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac: {
            json bases = json::array();
            for (const auto& b : h.kron) bases.push_back(kron_eigenbasis_to_json(b));
            j["kron"] = std::move(bases);
            break;
        }
    }
    return j;
}

TemperedHessian tempered_from_json(const json& j) {
    TemperedHessian h;
    h.kind = curvature_kind_from_string(field<std::string>(j, "kind"));
    h.temperature = field<double>(j, "temperature");
    h.prior_precision = field<double>(j, "prior_precision");
    h.jitter = field_or<double>(j, "jitter", 0.0);
    h.param_count = field<int>(j, "param_count");
    h.layer_shapes = shapes_from_json(j.at("layer_shapes"));
    switch (h.kind) {
        case CurvatureKind::full:
            h.full = matrix_from_json(j.at("full"));
            break;
        case CurvatureKind::diag:
            h.diagonal = vector_from_json(j.at("diagonal"));
            break;
        case CurvatureKind::block_diag:
            for (const auto& b : j.at("blocks")) h.blocks.push_back(matrix_from_json(b));
            break;
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac:
            for (const auto& b : j.at("kron")) h.kron.push_back(kron_eigenbasis_from_json(b));
            break;
    }
    return h;
}

json posterior_to_json(const GlaPosterior& posterior) {
    json j;
    j["theta_map"] = vector_to_json(posterior.theta_map);
    j["precision"] = tempered_to_json(posterior.precision);
    j["seed"] = posterior.seed;
    return j;
}

GlaPosterior posterior_from_json(const json& j) {
    const Eigen::VectorXd theta = vector_from_json(j.at("theta_map"));
    const TemperedHessian h = tempered_from_json(j.at("precision"));
    return build_posterior(theta, h, field<std::uint64_t>(j, "seed"));
}

// --- Finite models ----------------------------------------------------------

json finite_model_to_json(const FiniteModel& model) {
    model.validate();
    json j;
    json hyps = json::array();
    for (int m = 0; m < model.num_hypotheses(); ++m) hyps.push_back(model.label(m));
    j["hypotheses"] = std::move(hyps);
    j["prior"] = vector_to_json(model.prior);
    json outcomes = json::array();
    json truth = json::array();
    for (int x = 0; x < model.num_x(); ++x)
        for (int y = 0; y < model.num_y(); ++y) {
            outcomes.push_back(json::array({x, y}));
            truth.push_back(model.truth(x, y));
        }
    j["outcomes"] = std::move(outcomes);
    j["truth"] = std::move(truth);
    json like = json::array();
    for (const auto& table : model.likelihood) {
        json flat = json::array();
        for (int x = 0; x < model.num_x(); ++x)
            for (int y = 0; y < model.num_y(); ++y) flat.push_back(table(x, y));
        like.push_back(std::move(flat));
    }
    j["likelihood"] = std::move(like);
    return j;
}

FiniteModel finite_model_from_json(const json& j) {
    FiniteModel model;
    model.labels = field_or<std::vector<std::string>>(j, "hypotheses", {});
    model.prior = vector_from_json(j.at("prior"));

    const json& outcomes = j.at("outcomes");
    int num_x = 0, num_y = 0;
    for (const auto& o : outcomes) {
        num_x = std::max(num_x, o.at(0).get<int>() + 1);
        num_y = std::max(num_y, o.at(1).get<int>() + 1);
    }
    if (static_cast<int>(outcomes.size()) != num_x * num_y)
        throw std::invalid_argument("outcomes must enumerate the full (x, y) grid");

    const json& truth = j.at("truth");
    if (truth.size() != outcomes.size())
        throw std::invalid_argument("truth length does not match outcomes");
    model.truth = Eigen::MatrixXd::Constant(num_x, num_y,
                                            std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        const int x = outcomes[k].at(0).get<int>();
        const int y = outcomes[k].at(1).get<int>();
        if (!std::isnan(model.truth(x, y)))
            throw std::invalid_argument("duplicate outcome in the grid");
        model.truth(x, y) = truth[k].get<double>();
    }

    for (const auto& flat : j.at("likelihood")) {
        if (flat.size() != outcomes.size())
            throw std::invalid_argument("likelihood length does not match outcomes");
        Eigen::MatrixXd table(num_x, num_y);
        for (std::size_t k = 0; k < outcomes.size(); ++k)
            table(outcomes[k].at(0).get<int>(), outcomes[k].at(1).get<int>()) =
                flat[k].get<double>();
        model.likelihood.push_back(std::move(table));
    }
    model.validate();
    return model;
}

FiniteModel load_finite_model(const std::string& path) {
    return finite_model_from_json(read_json_file(path));
}

// --- Experiment configuration ----------------------------------------------

std::vector<double> default_temperature_grid() {
    std::vector<double> grid;
    const int count = 13;
    const double lo = std::log(1e-2), hi = std::log(1e1);
    for (int i = 0; i < count; ++i)
        grid.push_back(std::exp(lo + (hi - lo) * i / (count - 1)));
    return grid;
}

void ExperimentConfig::validate() const {
    dataset.validate();
    arch.validate();
    train.validate();
    if (kinds.empty()) throw std::invalid_argument("config needs at least one curvature kind");
    if (temperatures.empty()) throw std::invalid_argument("temperature grid is empty");
    for (double t : temperatures)
        if (!(t > 0)) throw std::invalid_argument("temperatures must be strictly positive");
    if (!std::is_sorted(temperatures.begin(), temperatures.end()))
        throw std::invalid_argument("temperature grid must be sorted ascending");
    for (std::size_t i = 1; i < temperatures.size(); ++i)
        if (temperatures[i] == temperatures[i - 1])
            throw std::invalid_argument("temperature grid has duplicate entries");
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be at least 1");
    if (seeds.empty()) throw std::invalid_argument("config needs at least one seed");
    if (!(toy_temperature > 0)) throw std::invalid_argument("toy_temperature must be positive");
    if (eval_n < 0) throw std::invalid_argument("eval_n must be nonnegative");
}

namespace {

GeneratorSpec generator_from_json(const json& j) {
    GeneratorSpec s;
    s.kind = generator_kind_from_string(field<std::string>(j, "kind"));
    s.n = field_or<int>(j, "n", s.n);
    s.seed = field_or<std::uint64_t>(j, "seed", s.seed);
    s.x_min = field_or<double>(j, "x_min", s.x_min);
    s.x_max = field_or<double>(j, "x_max", s.x_max);
    s.cubic_noise_std = field_or<double>(j, "cubic_noise_std", s.cubic_noise_std);
    s.moons_noise_std = field_or<double>(j, "moons_noise_std", s.moons_noise_std);
    if (j.contains("blob_centers")) {
        s.blob_centers.clear();
        for (const auto& c : j.at("blob_centers"))
            s.blob_centers.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    }
    s.blob_std = field_or<double>(j, "blob_std", s.blob_std);
    s.hetero_slope = field_or<double>(j, "hetero_slope", s.hetero_slope);
    s.hetero_noise_base = field_or<double>(j, "hetero_noise_base", s.hetero_noise_base);
    s.hetero_noise_slope = field_or<double>(j, "hetero_noise_slope", s.hetero_noise_slope);
    s.csv_path = field_or<std::string>(j, "csv_path", s.csv_path);
    if (j.contains("shift")) s.shift = vector_from_json(j.at("shift"));
    s.rotation_deg = field_or<double>(j, "rotation_deg", s.rotation_deg);
    return s;
}

} // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (!j.contains("dataset")) throw std::invalid_argument("config needs a 'dataset' section");
    c.dataset = generator_from_json(j.at("dataset"));

    if (j.contains("ood")) {
        const json& o = j.at("ood");
        if (o.contains("shift")) c.ood_shift = vector_from_json(o.at("shift"));
        c.ood_rotation_deg = field_or<double>(o, "rotation_deg", 0.0);
    }

    if (!j.contains("architecture"))
        throw std::invalid_argument("config needs an 'architecture' section");
    const json& a = j.at("architecture");
    c.arch.layer_sizes = field<std::vector<int>>(a, "layer_sizes");
    c.arch.activation =
        activation_from_string(field_or<std::string>(a, "activation", "tanh"));
    c.arch.task = task_from_string(field<std::string>(a, "task"));
    c.arch.use_bias = field_or<bool>(a, "use_bias", true);

    if (j.contains("train")) {
        const json& t = j.at("train");
        if (t.contains("prior_std")) {
            if (t.at("prior_std").is_string() && t.at("prior_std").get<std::string>() == "inf")
                c.train.prior_std = std::numeric_limits<double>::infinity();
            else
                c.train.prior_std = field<double>(t, "prior_std");
        }
        c.train.learning_rate = field_or<double>(t, "learning_rate", c.train.learning_rate);
        c.train.epochs = field_or<int>(t, "epochs", c.train.epochs);
        c.train.batch_size = field_or<int>(t, "batch_size", c.train.batch_size);
        c.train.seed = field_or<std::uint64_t>(t, "seed", c.train.seed);
        c.train.optimizer =
            optimizer_from_string(field_or<std::string>(t, "optimizer", "gd_momentum"));
        c.train.momentum = field_or<double>(t, "momentum", c.train.momentum);
    }

    if (j.contains("curvature_kinds")) {
        c.kinds.clear();
        for (const auto& k : j.at("curvature_kinds"))
            c.kinds.push_back(curvature_kind_from_string(k.get<std::string>()));
    }
    if (j.contains("temperatures")) {
        c.temperatures.clear();
        for (const auto& t : j.at("temperatures")) c.temperatures.push_back(t.get<double>());
    } else {
        c.temperatures = default_temperature_grid();
    }
    c.mc_samples = field_or<int>(j, "mc_samples", c.mc_samples);
    if (j.contains("seeds")) {
        c.seeds.clear();
        for (const auto& s : j.at("seeds")) c.seeds.push_back(s.get<std::uint64_t>());
    }
    c.output_dir = field_or<std::string>(j, "output_dir", c.output_dir);
    c.toy_temperature = field_or<double>(j, "toy_temperature", c.toy_temperature);
    c.eval_n = field_or<int>(j, "eval_n", c.eval_n);
    c.theory_model_path = field_or<std::string>(j, "theory_model", c.theory_model_path);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    ExperimentConfig c = config_from_json(j);
    c.config_hash_hex = fnv1a_hex(text);
    return c;
}

} // namespace gla
