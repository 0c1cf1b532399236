#include "coupledfuse/config.hpp"

#include "coupledfuse/io.hpp"
#include "coupledfuse/log.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace cfuse {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
    if (!j.is_object()) bad(ctx + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) bad(ctx + ": unknown key '" + it.key() + "'");
    }
}

double parse_extended_number(const json& v, const std::string& ctx) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "infinity" || s == "inf") return std::numeric_limits<double>::infinity();
        bad(ctx + ": expected a number or \"infinity\", got '" + s + "'");
    }
    bad(ctx + " must be a number or \"infinity\"");
}

double number_or(const json& j, const char* key, double fallback, const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) bad(ctx + "." + key + " must be a number");
    return j[key].get<double>();
}

long integer_or(const json& j, const char* key, long fallback, const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) bad(ctx + "." + key + " must be an integer");
    return j[key].get<long>();
}

std::uint64_t seed_or(const json& j, const char* key, std::uint64_t fallback, const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    bad(ctx + "." + key + " must be a nonnegative integer");
}

bool bool_or(const json& j, const char* key, bool fallback, const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) bad(ctx + "." + key + " must be a boolean");
    return j[key].get<bool>();
}

std::string string_req(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key)) bad(ctx + "." + key + " is required");
    if (!j[key].is_string()) bad(ctx + "." + key + " must be a string");
    return j[key].get<std::string>();
}

std::string string_or(const json& j, const char* key, const std::string& fallback, const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) bad(ctx + "." + key + " must be a string");
    return j[key].get<std::string>();
}

Shape parse_dims(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.size() != 3) bad(ctx + " must be an array of 3 integers");
    Shape dims(3);
    for (std::size_t i = 0; i < 3; ++i) {
        if (!v[i].is_number_integer()) bad(ctx + " must contain integers");
        dims[i] = v[i].get<Index>();
        if (dims[i] < 1) bad(ctx + " entries must be >= 1");
    }
    return dims;
}

std::array<double, 3> parse_gamma_side(const json& v, const std::string& ctx) {
    std::array<double, 3> out{};
    if (v.is_number()) {
        out.fill(v.get<double>());
        return out;
    }
    if (v.is_array() && v.size() == 3) {
        for (std::size_t i = 0; i < 3; ++i) {
            if (!v[i].is_number()) bad(ctx + " must contain numbers");
            out[i] = v[i].get<double>();
        }
        return out;
    }
    bad(ctx + " must be a number or an array of 3 numbers");
}

std::variant<SyntheticSource, FileSource, HsrSource> parse_problem(const json& j) {
    check_keys(j, {"synthetic", "files", "hsr"}, "problem");
    if (j.size() != 1) bad("problem must contain exactly one of 'synthetic', 'files', 'hsr'");

    if (j.contains("synthetic")) {
        const json& s = j["synthetic"];
        check_keys(s, {"dims_y", "dims_y_prime", "rank", "snr_db", "laplace_scale", "seed"}, "problem.synthetic");
        SyntheticSource src;
        if (s.contains("dims_y")) src.spec.dims_y = parse_dims(s["dims_y"], "problem.synthetic.dims_y");
        if (s.contains("dims_y_prime")) {
            src.spec.dims_y_prime = parse_dims(s["dims_y_prime"], "problem.synthetic.dims_y_prime");
        }
        src.spec.rank = integer_or(s, "rank", src.spec.rank, "problem.synthetic");
        if (s.contains("snr_db")) src.spec.snr_db = parse_extended_number(s["snr_db"], "problem.synthetic.snr_db");
        src.spec.laplace_scale = number_or(s, "laplace_scale", src.spec.laplace_scale, "problem.synthetic");
        src.spec.seed = seed_or(s, "seed", src.spec.seed, "problem.synthetic");
        return src;
    }
    if (j.contains("files")) {
        const json& s = j["files"];
        check_keys(s, {"y", "y_prime"}, "problem.files");
        FileSource src;
        src.y = string_req(s, "y", "problem.files");
        src.y_prime = string_req(s, "y_prime", "problem.files");
        return src;
    }
    const json& s = j["hsr"];
    check_keys(s, {"sri", "blur_kernel_size", "blur_sigma", "downsample_stride", "pm_bands", "pm_file"},
               "problem.hsr");
    HsrSource src;
    src.sri = string_req(s, "sri", "problem.hsr");
    src.degradation.blur_kernel_size =
        static_cast<int>(integer_or(s, "blur_kernel_size", src.degradation.blur_kernel_size, "problem.hsr"));
    src.degradation.blur_sigma = number_or(s, "blur_sigma", src.degradation.blur_sigma, "problem.hsr");
    src.degradation.downsample_stride =
        static_cast<int>(integer_or(s, "downsample_stride", src.degradation.downsample_stride, "problem.hsr"));
    src.pm_bands = integer_or(s, "pm_bands", src.pm_bands, "problem.hsr");
    if (src.pm_bands < 1) bad("problem.hsr.pm_bands must be >= 1");
    src.pm_file = string_or(s, "pm_file", "", "problem.hsr");
    src.degradation.validate();
    return src;
}

ModelConfig parse_model(const json& j) {
    check_keys(j, {"type", "rank", "lambda", "mu", "coupled_blocks", "w1", "w2", "p1", "p2", "pm"}, "model");
    ModelConfig m;
    const std::string type = string_or(j, "type", "laplacian_l1", "model");
    if (type == "laplacian_l1") {
        m.kind = ModelConfig::Kind::LaplacianL1;
        for (const char* k : {"w1", "w2", "p1", "p2", "pm"}) {
            if (j.contains(k)) bad(std::string("model.") + k + " only applies to the joint_gauss model");
        }
    } else if (type == "joint_gauss") {
        m.kind = ModelConfig::Kind::JointGauss;
        for (const char* k : {"mu", "coupled_blocks"}) {
            if (j.contains(k)) bad(std::string("model.") + k + " only applies to the laplacian_l1 model");
        }
    } else {
        bad("model.type must be 'laplacian_l1' or 'joint_gauss', got '" + type + "'");
    }

    m.rank = integer_or(j, "rank", 0, "model");
    if (m.rank < 0) bad("model.rank must be >= 0");
    m.lambda = number_or(j, "lambda", m.lambda, "model");
    if (!(m.lambda > 0.0)) bad("model.lambda must be positive");

    if (m.kind == ModelConfig::Kind::LaplacianL1) {
        m.mu = number_or(j, "mu", m.mu, "model");
        if (m.mu < 0.0) bad("model.mu must be >= 0");
        if (j.contains("coupled_blocks")) {
            const json& cb = j["coupled_blocks"];
            if (!cb.is_array() || cb.size() != 2 || !cb[0].is_number_integer() || !cb[1].is_number_integer()) {
                bad("model.coupled_blocks must be an array of 2 integers");
            }
            m.coupled_a = cb[0].get<int>();
            m.coupled_b = cb[1].get<int>();
            if (m.coupled_a < 1 || m.coupled_a > 3 || m.coupled_b < 1 || m.coupled_b > 3) {
                bad("model.coupled_blocks entries must be in 1..3");
            }
        }
    } else {
        m.w1 = number_or(j, "w1", m.w1, "model");
        m.w2 = number_or(j, "w2", m.w2, "model");
        if (m.w1 < 0.0 || m.w2 < 0.0) bad("model.w1 and model.w2 must be >= 0");
        m.p1_file = string_or(j, "p1", "", "model");
        m.p2_file = string_or(j, "p2", "", "model");
        m.pm_file = string_or(j, "pm", "", "model");
    }
    return m;
}

SolverConfig parse_solver(const json& j) {
    check_keys(j,
               {"algorithm", "gamma", "add_iteration_to_step", "max_iters", "epsilon", "seed", "blocks_per_side",
                "diagnostics"},
               "solver");
    SolverConfig s;
    s.algorithm = algorithm_from_name(string_or(j, "algorithm", "easap", "solver"));
    if (j.contains("gamma")) {
        const json& g = j["gamma"];
        if (g.is_object()) {
            check_keys(g, {"a", "b"}, "solver.gamma");
            if (g.contains("a")) s.gamma_a = parse_gamma_side(g["a"], "solver.gamma.a");
            if (g.contains("b")) s.gamma_b = parse_gamma_side(g["b"], "solver.gamma.b");
        } else {
            s.gamma_a = parse_gamma_side(g, "solver.gamma");
            s.gamma_b = s.gamma_a;
        }
    }
    s.add_iteration_to_step = bool_or(j, "add_iteration_to_step", s.add_iteration_to_step, "solver");
    s.max_iters = integer_or(j, "max_iters", s.max_iters, "solver");
    if (j.contains("epsilon")) s.epsilon = parse_extended_number(j["epsilon"], "solver.epsilon");
    s.seed = seed_or(j, "seed", s.seed, "solver");
    s.blocks_per_side = static_cast<int>(integer_or(j, "blocks_per_side", s.blocks_per_side, "solver"));
    if (j.contains("diagnostics")) {
        const json& d = j["diagnostics"];
        check_keys(d, {"stationarity", "descent_check", "lyapunov"}, "solver.diagnostics");
        s.diagnostics.stationarity = bool_or(d, "stationarity", s.diagnostics.stationarity, "solver.diagnostics");
        s.diagnostics.descent_check = bool_or(d, "descent_check", s.diagnostics.descent_check, "solver.diagnostics");
        s.diagnostics.lyapunov = bool_or(d, "lyapunov", s.diagnostics.lyapunov, "solver.diagnostics");
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        bad(std::string("solver: ") + e.what());
    }
    return s;
}

json extended_number_json(double v) {
    if (std::isinf(v) && v > 0.0) return json("infinity");
    return json(v);
}

}  // namespace

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Easap: return "easap";
        case Algorithm::Asap: return "asap";
        case Algorithm::AccelAsap: return "accel_asap";
    }
    return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "easap") return Algorithm::Easap;
    if (name == "asap") return Algorithm::Asap;
    if (name == "accel_asap" || name == "accel-asap") return Algorithm::AccelAsap;
    bad("unknown algorithm '" + name + "' (expected easap, asap or accel_asap)");
}

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j, {"problem", "model", "solver", "record_relerr", "record_wall_ms", "output_dir"}, "config");
    if (!j.contains("problem")) bad("config.problem is required");

    RunConfig cfg;
    cfg.problem = parse_problem(j["problem"]);
    if (j.contains("model")) cfg.model = parse_model(j["model"]);
    if (j.contains("solver")) cfg.solver = parse_solver(j["solver"]);
    cfg.record_relerr = bool_or(j, "record_relerr", cfg.record_relerr, "config");
    cfg.record_wall_ms = bool_or(j, "record_wall_ms", cfg.record_wall_ms, "config");
    cfg.output_dir = string_or(j, "output_dir", cfg.output_dir.string(), "config");

    // Source/model cross checks.
    if (const auto* synth = std::get_if<SyntheticSource>(&cfg.problem)) {
        if (cfg.model.kind != ModelConfig::Kind::LaplacianL1) {
            bad("a synthetic problem uses the laplacian_l1 model");
        }
        if (cfg.model.rank == 0) {
            cfg.model.rank = synth->spec.rank;
        } else if (cfg.model.rank != synth->spec.rank) {
            bad("model.rank contradicts problem.synthetic.rank");
        }
        try {
            synth->spec.validate();
        } catch (const std::invalid_argument& e) {
            bad(std::string("problem.synthetic: ") + e.what());
        }
    } else if (std::holds_alternative<HsrSource>(cfg.problem)) {
        if (cfg.model.kind != ModelConfig::Kind::JointGauss) {
            bad("an hsr problem uses the joint_gauss model");
        }
        if (!cfg.model.p1_file.empty() || !cfg.model.p2_file.empty() || !cfg.model.pm_file.empty()) {
            bad("model.p1/p2/pm come from the hsr degradation and cannot be set explicitly");
        }
        if (cfg.model.rank < 1) bad("model.rank is required (>= 1) for an hsr problem");
    } else {
        if (cfg.model.rank < 1) bad("model.rank is required (>= 1) for a files problem");
        if (cfg.model.kind == ModelConfig::Kind::JointGauss &&
            (cfg.model.p1_file.empty() || cfg.model.p2_file.empty() || cfg.model.pm_file.empty())) {
            bad("model.p1, model.p2 and model.pm are required for joint_gauss on a files problem");
        }
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) bad(path.string() + ": cannot open config file");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        bad(path.string() + ": " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json out;

    if (const auto* synth = std::get_if<SyntheticSource>(&problem)) {
        out["problem"]["synthetic"] = {
            {"dims_y", synth->spec.dims_y},
            {"dims_y_prime", synth->spec.dims_y_prime},
            {"rank", synth->spec.rank},
            {"snr_db", extended_number_json(synth->spec.snr_db)},
            {"laplace_scale", synth->spec.laplace_scale},
            {"seed", synth->spec.seed},
        };
    } else if (const auto* files = std::get_if<FileSource>(&problem)) {
        out["problem"]["files"] = {{"y", files->y.string()}, {"y_prime", files->y_prime.string()}};
    } else {
        const auto& hsr = std::get<HsrSource>(problem);
        out["problem"]["hsr"] = {
            {"sri", hsr.sri.string()},
            {"blur_kernel_size", hsr.degradation.blur_kernel_size},
            {"blur_sigma", hsr.degradation.blur_sigma},
            {"downsample_stride", hsr.degradation.downsample_stride},
            {"pm_bands", hsr.pm_bands},
        };
        if (!hsr.pm_file.empty()) out["problem"]["hsr"]["pm_file"] = hsr.pm_file.string();
    }

    json m;
    m["rank"] = model.rank;
    m["lambda"] = model.lambda;
    if (model.kind == ModelConfig::Kind::LaplacianL1) {
        m["type"] = "laplacian_l1";
        m["mu"] = model.mu;
        m["coupled_blocks"] = {model.coupled_a, model.coupled_b};
    } else {
        m["type"] = "joint_gauss";
        m["w1"] = model.w1;
        m["w2"] = model.w2;
        if (!model.p1_file.empty()) m["p1"] = model.p1_file.string();
        if (!model.p2_file.empty()) m["p2"] = model.p2_file.string();
        if (!model.pm_file.empty()) m["pm"] = model.pm_file.string();
    }
    out["model"] = std::move(m);

    out["solver"] = {
        {"algorithm", algorithm_name(solver.algorithm)},
        {"gamma", {{"a", solver.gamma_a}, {"b", solver.gamma_b}}},
        {"add_iteration_to_step", solver.add_iteration_to_step},
        {"max_iters", solver.max_iters},
        {"epsilon", extended_number_json(solver.epsilon)},
        {"seed", solver.seed},
        {"blocks_per_side", solver.blocks_per_side},
        {"diagnostics",
         {{"stationarity", solver.diagnostics.stationarity},
          {"descent_check", solver.diagnostics.descent_check},
          {"lyapunov", solver.diagnostics.lyapunov}}},
    };
    out["record_relerr"] = record_relerr;
    out["record_wall_ms"] = record_wall_ms;
    out["output_dir"] = output_dir.string();
    return out;
}

AssembledProblem assemble_problem(const RunConfig& cfg, const std::filesystem::path& base_dir) {
    const auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : base_dir / p; };
    AssembledProblem out;

    if (const auto* synth = std::get_if<SyntheticSource>(&cfg.problem)) {
        SynthResult r = gen_synthetic_coupled(synth->spec, cfg.model.mu);
        out.problem = std::move(r.problem);
        if (cfg.model.coupled_a != 3 || cfg.model.coupled_b != 1) {
            log::warn("synthetic data couples A3 to B1, but the model couples A" + std::to_string(cfg.model.coupled_a) +
                      " to B" + std::to_string(cfg.model.coupled_b));
        }
        out.problem.coupling = LaplacianCoupling{cfg.model.mu, cfg.model.coupled_a, cfg.model.coupled_b};
        out.problem.lambda = cfg.model.lambda;
        out.truth_a = std::move(r.truth_a);
        out.truth_b = std::move(r.truth_b);
    } else if (const auto* files = std::get_if<FileSource>(&cfg.problem)) {
        out.problem.y = read_tnsr(resolve(files->y));
        out.problem.y_prime = read_tnsr(resolve(files->y_prime));
        out.problem.rank_a = cfg.model.rank;
        out.problem.rank_b = cfg.model.rank;
        out.problem.lambda = cfg.model.lambda;
        if (cfg.model.kind == ModelConfig::Kind::LaplacianL1) {
            out.problem.coupling = LaplacianCoupling{cfg.model.mu, cfg.model.coupled_a, cfg.model.coupled_b};
        } else {
            JointGaussCoupling jg;
            jg.w1 = cfg.model.w1;
            jg.w2 = cfg.model.w2;
            jg.p1 = read_matrix_csv(resolve(cfg.model.p1_file));
            jg.p2 = read_matrix_csv(resolve(cfg.model.p2_file));
            jg.pm = read_matrix_csv(resolve(cfg.model.pm_file));
            out.problem.coupling = std::move(jg);
        }
    } else {
        const auto& hsr = std::get<HsrSource>(cfg.problem);
        const DenseTensor sri = read_tnsr(resolve(hsr.sri));
        DegradationSpec d = hsr.degradation;
        d.spectral_response = hsr.pm_file.empty() ? pm_band_aggregation(sri.dim(3), hsr.pm_bands)
                                                  : read_matrix_csv(resolve(hsr.pm_file));
        DegradeResult dr = degrade_sri(sri, d);
        JointGaussCoupling jg;
        jg.w1 = cfg.model.w1;
        jg.w2 = cfg.model.w2;
        jg.p1 = std::move(dr.p1);
        jg.p2 = std::move(dr.p2);
        jg.pm = std::move(d.spectral_response);
        out.problem.y = std::move(dr.hsi);
        out.problem.y_prime = std::move(dr.msi);
        out.problem.rank_a = cfg.model.rank;
        out.problem.rank_b = cfg.model.rank;
        out.problem.lambda = cfg.model.lambda;
        out.problem.coupling = std::move(jg);
    }

    try {
        out.problem.validate();
    } catch (const std::invalid_argument& e) {
        bad(std::string("assembled problem is inconsistent: ") + e.what());
    }
    return out;
}

}  // namespace cfuse
