#pragma once

#include "gla/mlp.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gla {

enum class GeneratorKind { cubic_toy, two_moons, gaussian_blobs, heteroskedastic_linear, csv };

std::string to_string(GeneratorKind k);
GeneratorKind generator_kind_from_string(const std::string& s);

// Deterministic dataset recipe: identical specs produce bit-identical data.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::cubic_toy;
    int n = 100;
    std::uint64_t seed = 0;

    // cubic_toy: x ~ U(x_min, x_max), y = x^3 + N(0, cubic_noise_std^2)
    double x_min = -4.0;
    double x_max = 4.0;
    double cubic_noise_std = 3.0;

    // two_moons: interleaved half-circles plus isotropic Gaussian noise
    double moons_noise_std = 0.15;

    // gaussian_blobs: one isotropic blob per class, round-robin assignment
    std::vector<std::array<double, 2>> blob_centers = {{{-2.0, 0.0}}, {{2.0, 0.0}}};
    double blob_std = 0.6;

    // heteroskedastic_linear: x ~ U(-1,1), y = slope*x + eps,
    // std(eps) = noise_base + noise_slope * |x|
    double hetero_slope = 1.0;
    double hetero_noise_base = 0.1;
    double hetero_noise_slope = 0.9;

    // csv: ingest from file instead of generating
    std::string csv_path;

    // Optional domain shift applied to the finished inputs: rotate the first
    // two coordinates by rotation_deg, then translate by shift.
    Eigen::VectorXd shift;      // empty = no translation
    double rotation_deg = 0.0;

    void validate() const;
};

Dataset generate(const GeneratorSpec& spec);

// x' = R x + shift, with R a rotation of the first two input coordinates.
Dataset apply_domain_shift(const Dataset& data, const Eigen::VectorXd& shift,
                           double rotation_deg);

// CSV schema: header `x0,...,x{I-1},y` (regression) or `x0,...,x{I-1},label`
// (classification); `#`-prefixed lines are comments. Parse errors name the
// 1-based line number.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path,
              const std::vector<std::string>& comment_lines = {});

// Disjoint, exhaustive shuffled split; both parts nonempty.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed);

} // namespace gla
