#pragma once

#include "coupledfuse/degrade.hpp"
#include "coupledfuse/solver.hpp"
#include "coupledfuse/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <variant>

namespace cfuse {

/// Raised for malformed or semantically invalid run configurations; the CLI
/// maps it to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntheticSource {
    SynthSpec spec;
};

struct FileSource {
    std::filesystem::path y;
    std::filesystem::path y_prime;
};

struct HsrSource {
    std::filesystem::path sri;
    DegradationSpec degradation;  // spectral_response left empty here
    Index pm_bands = 6;
    /// Optional explicit Pm (CSV); overrides the band-aggregation default.
    std::filesystem::path pm_file;
};

struct ModelConfig {
    enum class Kind { LaplacianL1, JointGauss };
    Kind kind = Kind::LaplacianL1;
    /// CP rank of both factor sets. Required for file and hsr sources;
    /// a synthetic source inherits its own rank when this is 0.
    Index rank = 0;
    double lambda = 1.0;
    // laplacian_l1
    double mu = 0.01;
    int coupled_a = 3;
    int coupled_b = 1;
    // joint_gauss
    double w1 = 1.0;
    double w2 = 1e-3;
    std::filesystem::path p1_file, p2_file, pm_file;  // CSV operators (files source)
};

struct RunConfig {
    std::variant<SyntheticSource, FileSource, HsrSource> problem;
    ModelConfig model;
    SolverConfig solver;
    bool record_relerr = true;
    bool record_wall_ms = false;
    std::filesystem::path output_dir = "out";

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::filesystem::path& path);
    /// Effective configuration with every default filled in, suitable for
    /// echoing into manifests.
    nlohmann::json to_json() const;
};

struct AssembledProblem {
    CoupledProblem problem;
    std::optional<KruskalFactors> truth_a, truth_b;
};

/// Materialize the problem a config describes: generate the synthetic pair,
/// load tensors from disk, or load + degrade an SRI. Relative paths resolve
/// against `base_dir`.
AssembledProblem assemble_problem(const RunConfig& cfg, const std::filesystem::path& base_dir = ".");

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

}  // namespace cfuse
