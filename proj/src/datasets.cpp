#include "gla/datasets.hpp"

#include "gla/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gla {

std::string to_string(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::cubic_toy: return "cubic_toy";
        case GeneratorKind::two_moons: return "two_moons";
        case GeneratorKind::gaussian_blobs: return "gaussian_blobs";
        case GeneratorKind::heteroskedastic_linear: return "heteroskedastic_linear";
        case GeneratorKind::csv: return "csv";
    }
    throw std::invalid_argument("invalid generator kind");
}

GeneratorKind generator_kind_from_string(const std::string& s) {
    if (s == "cubic_toy") return GeneratorKind::cubic_toy;
    if (s == "two_moons") return GeneratorKind::two_moons;
    if (s == "gaussian_blobs") return GeneratorKind::gaussian_blobs;
    if (s == "heteroskedastic_linear") return GeneratorKind::heteroskedastic_linear;
    if (s == "csv") return GeneratorKind::csv;
    throw std::invalid_argument("unknown generator kind: " + s);
}

void GeneratorSpec::validate() const {
    if (kind != GeneratorKind::csv && n < 1)
        throw std::invalid_argument("generator size must be at least 1");
    const double params[] = {x_min,        x_max,           cubic_noise_std,
                             moons_noise_std, blob_std,     hetero_slope,
                             hetero_noise_base, hetero_noise_slope, rotation_deg};
    for (double p : params)
        if (!std::isfinite(p)) throw std::invalid_argument("generator parameter is not finite");
    if (x_min >= x_max) throw std::invalid_argument("generator x range is empty");
    if (cubic_noise_std < 0 || moons_noise_std < 0 || blob_std < 0 ||
        hetero_noise_base < 0 || hetero_noise_slope < 0)
        throw std::invalid_argument("noise parameters must be nonnegative");
    if (kind == GeneratorKind::gaussian_blobs && blob_centers.size() < 2)
        throw std::invalid_argument("gaussian_blobs needs at least two centers");
    if (kind == GeneratorKind::csv && csv_path.empty())
        throw std::invalid_argument("csv generator needs a path");
    if (shift.size() > 0 && !shift.allFinite())
        throw std::invalid_argument("shift vector is not finite");
}

namespace {

Dataset make_cubic(const GeneratorSpec& spec) {
    Dataset d;
    d.name = "cubic_toy";
    d.inputs.resize(spec.n, 1);
    d.targets.resize(spec.n, 1);
    const std::uint64_t seed_x = derive_seed(spec.seed, 0);
    const std::uint64_t seed_eps = derive_seed(spec.seed, 1);
    for (int i = 0; i < spec.n; ++i) {
        const double x =
            spec.x_min + (spec.x_max - spec.x_min) * CounterRng::uniform_at(seed_x, i);
        d.inputs(i, 0) = x;
        d.targets(i, 0) = x * x * x + spec.cubic_noise_std * CounterRng::normal_at(seed_eps, i);
    }
    return d;
}

Dataset make_moons(const GeneratorSpec& spec) {
    Dataset d;
    d.name = "two_moons";
    d.num_classes = 2;
    d.inputs.resize(spec.n, 2);
    const int n_outer = (spec.n + 1) / 2;
    const std::uint64_t seed_t = derive_seed(spec.seed, 0);
    const std::uint64_t seed_eps = derive_seed(spec.seed, 1);
    for (int i = 0; i < spec.n; ++i) {
        const double t = std::numbers::pi * CounterRng::uniform_at(seed_t, i);
        double x, y;
        if (i < n_outer) {
            x = std::cos(t);
            y = std::sin(t);
            d.labels.push_back(0);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
            d.labels.push_back(1);
        }
        d.inputs(i, 0) = x + spec.moons_noise_std * CounterRng::normal_at(seed_eps, 2 * i);
        d.inputs(i, 1) = y + spec.moons_noise_std * CounterRng::normal_at(seed_eps, 2 * i + 1);
    }
    return d;
}

Dataset make_blobs(const GeneratorSpec& spec) {
    Dataset d;
    d.name = "gaussian_blobs";
    d.num_classes = static_cast<int>(spec.blob_centers.size());
    d.inputs.resize(spec.n, 2);
    const std::uint64_t seed_eps = derive_seed(spec.seed, 1);
    for (int i = 0; i < spec.n; ++i) {
        const int c = i % d.num_classes;
        d.labels.push_back(c);
        d.inputs(i, 0) =
            spec.blob_centers[c][0] + spec.blob_std * CounterRng::normal_at(seed_eps, 2 * i);
        d.inputs(i, 1) =
            spec.blob_centers[c][1] + spec.blob_std * CounterRng::normal_at(seed_eps, 2 * i + 1);
    }
    return d;
}

Dataset make_hetero(const GeneratorSpec& spec) {
    Dataset d;
    d.name = "heteroskedastic_linear";
    d.inputs.resize(spec.n, 1);
    d.targets.resize(spec.n, 1);
    const std::uint64_t seed_x = derive_seed(spec.seed, 0);
    const std::uint64_t seed_eps = derive_seed(spec.seed, 1);
    for (int i = 0; i < spec.n; ++i) {
        const double x = 2.0 * CounterRng::uniform_at(seed_x, i) - 1.0;
        const double eps_std = spec.hetero_noise_base + spec.hetero_noise_slope * std::abs(x);
        d.inputs(i, 0) = x;
        d.targets(i, 0) =
            spec.hetero_slope * x + eps_std * CounterRng::normal_at(seed_eps, i);
    }
    return d;
}

} // namespace

Dataset apply_domain_shift(const Dataset& data, const Eigen::VectorXd& shift,
                           double rotation_deg) {
    Dataset out = data;
    const int dim = static_cast<int>(data.inputs.cols());
    if (rotation_deg != 0.0) {
        if (dim < 2)
            throw std::invalid_argument("rotation needs at least two input dimensions");
        const double a = rotation_deg * std::numbers::pi / 180.0;
        const double c = std::cos(a), s = std::sin(a);
        for (int i = 0; i < out.inputs.rows(); ++i) {
            const double x0 = out.inputs(i, 0), x1 = out.inputs(i, 1);
            out.inputs(i, 0) = c * x0 - s * x1;
            out.inputs(i, 1) = s * x0 + c * x1;
        }
    }
    if (shift.size() > 0) {
        if (shift.size() != dim)
            throw std::invalid_argument("shift dimension " + std::to_string(shift.size()) +
                                        " does not match input dimension " + std::to_string(dim));
        out.inputs.rowwise() += shift.transpose();
    }
    return out;
}

Dataset generate(const GeneratorSpec& spec) {
    spec.validate();
    Dataset d;
    switch (spec.kind) {
        case GeneratorKind::cubic_toy: d = make_cubic(spec); break;
        case GeneratorKind::two_moons: d = make_moons(spec); break;
        case GeneratorKind::gaussian_blobs: d = make_blobs(spec); break;
        case GeneratorKind::heteroskedastic_linear: d = make_hetero(spec); break;
        case GeneratorKind::csv: d = load_csv(spec.csv_path); break;
    }
    if (spec.shift.size() > 0 || spec.rotation_deg != 0.0)
        d = apply_domain_shift(d, spec.shift, spec.rotation_deg);
    d.validate();
    return d;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_double(const std::string& s, int line_no, const std::string& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": non-numeric value '" + s + "' at line " +
                                 std::to_string(line_no));
    }
}

} // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    int line_no = 0;
    // Header: first non-comment line.
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        header = split_fields(line);
        break;
    }
    if (header.size() < 2)
        throw std::runtime_error(path + ": header must list feature columns and a target");
    const std::string& target = header.back();
    const bool classification = target == "label";
    if (!classification && target != "y")
        throw std::runtime_error(path + ": last header column must be 'y' or 'label', got '" +
                                 target + "'");
    const int dim = static_cast<int>(header.size()) - 1;
    for (int i = 0; i < dim; ++i)
        if (header[i] != "x" + std::to_string(i))
            throw std::runtime_error(path + ": header column " + std::to_string(i) +
                                     " must be 'x" + std::to_string(i) + "', got '" + header[i] +
                                     "'");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<double> targets;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line);
        if (static_cast<int>(fields.size()) != dim + 1)
            throw std::runtime_error(path + ": expected " + std::to_string(dim + 1) +
                                     " fields at line " + std::to_string(line_no) + ", got " +
                                     std::to_string(fields.size()));
        std::vector<double> x(dim);
        for (int i = 0; i < dim; ++i) x[i] = parse_double(fields[i], line_no, path);
        if (classification) {
            const double v = parse_double(fields[dim], line_no, path);
            const int lab = static_cast<int>(std::llround(v));
            if (std::abs(v - lab) > 1e-9 || lab < 0)
                throw std::runtime_error(path + ": label must be a nonnegative integer at line " +
                                         std::to_string(line_no));
            labels.push_back(lab);
        } else {
            targets.push_back(parse_double(fields[dim], line_no, path));
        }
        rows.push_back(std::move(x));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");

    Dataset d;
    d.name = path;
    d.inputs.resize(static_cast<int>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < dim; ++j) d.inputs(static_cast<int>(i), j) = rows[i][j];
    if (classification) {
        d.labels = std::move(labels);
        d.num_classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
    } else {
        d.targets.resize(static_cast<int>(targets.size()), 1);
        for (std::size_t i = 0; i < targets.size(); ++i)
            d.targets(static_cast<int>(i), 0) = targets[i];
    }
    d.validate();
    return d;
}

void save_csv(const Dataset& data, const std::string& path,
              const std::vector<std::string>& comment_lines) {
    data.validate();
    if (data.task() == Task::regression && data.targets.cols() != 1)
        throw std::invalid_argument("save_csv supports single-output regression only");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << std::setprecision(17);
    for (const std::string& c : comment_lines) out << "# " << c << "\n";
    const int dim = static_cast<int>(data.inputs.cols());
    for (int i = 0; i < dim; ++i) out << "x" << i << ",";
    out << (data.task() == Task::classification ? "label" : "y") << "\n";
    for (int i = 0; i < data.size(); ++i) {
        for (int j = 0; j < dim; ++j) out << data.inputs(i, j) << ",";
        if (data.task() == Task::classification)
            out << data.labels[i];
        else
            out << data.targets(i, 0);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed) {
    data.validate();
    if (!(train_fraction > 0 && train_fraction < 1))
        throw std::invalid_argument("train fraction must be in (0, 1)");
    const int n = data.size();
    if (n < 2) throw std::invalid_argument("cannot split fewer than two rows");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(derive_seed(seed, 7));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(rng.below(i + 1))]);
    int train_n = static_cast<int>(std::lround(train_fraction * n));
    train_n = std::clamp(train_n, 1, n - 1);
    const std::vector<int> train_idx(order.begin(), order.begin() + train_n);
    const std::vector<int> eval_idx(order.begin() + train_n, order.end());
    Dataset train = data.subset(train_idx);
    Dataset eval = data.subset(eval_idx);
    train.name = data.name + "/train";
    eval.name = data.name + "/eval";
    return {std::move(train), std::move(eval)};
}

} // namespace gla
