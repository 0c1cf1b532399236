#include "coupledfuse/config.hpp"
#include "coupledfuse/io.hpp"
#include "coupledfuse/log.hpp"
#include "coupledfuse/metrics.hpp"
#include "coupledfuse/solver.hpp"
#include "coupledfuse/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error(path.string() + ": write failed");
}

void write_factors(const fs::path& dir, const cfuse::KruskalFactors& f, const char* prefix) {
    for (std::size_t n = 0; n < f.factors.size(); ++n) {
        cfuse::write_matrix_tnsr(dir / (std::string(prefix) + std::to_string(n + 1) + ".tnsr"), f.factors[n]);
    }
}

cfuse::KruskalFactors read_factors(const fs::path& dir, const char* prefix) {
    std::vector<cfuse::Matrix> fs3;
    for (int n = 1; n <= 3; ++n) {
        fs3.push_back(cfuse::read_matrix_tnsr(dir / (std::string(prefix) + std::to_string(n) + ".tnsr")));
    }
    return cfuse::KruskalFactors(std::move(fs3));
}

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::string out_override;
    unsigned jobs = 1;
};

cfuse::RunConfig load_config(const CommonArgs& args, const char* command) {
    if (args.config_path.empty()) {
        throw cfuse::ConfigError(std::string(command) + ": --config is required");
    }
    cfuse::RunConfig cfg = cfuse::RunConfig::from_file(args.config_path);
    if (!args.out_override.empty()) cfg.output_dir = args.out_override;
    if (args.seed_override.has_value()) {
        cfg.solver.seed = *args.seed_override;
        if (auto* synth = std::get_if<cfuse::SyntheticSource>(&cfg.problem)) {
            synth->spec.seed = *args.seed_override;
        }
    }
    return cfg;
}

json stop_reason_json(cfuse::StopReason r) {
    return r == cfuse::StopReason::Epsilon ? "epsilon" : "max_iters";
}

int cmd_synth(const CommonArgs& args) {
    cfuse::RunConfig cfg = load_config(args, "synth");
    const auto* src = std::get_if<cfuse::SyntheticSource>(&cfg.problem);
    if (src == nullptr) {
        throw cfuse::ConfigError("synth: the config must describe a synthetic problem");
    }
    cfuse::SynthResult r = cfuse::gen_synthetic_coupled(src->spec, cfg.model.mu);

    fs::create_directories(cfg.output_dir);
    cfuse::write_tnsr(cfg.output_dir / "Y.tnsr", r.problem.y);
    cfuse::write_tnsr(cfg.output_dir / "Yprime.tnsr", r.problem.y_prime);
    write_factors(cfg.output_dir, r.truth_a, "A");
    write_factors(cfg.output_dir, r.truth_b, "B");

    json manifest;
    manifest["command"] = "synth";
    manifest["config"] = cfg.to_json();
    manifest["files"] = {"Y.tnsr", "Yprime.tnsr", "A1.tnsr", "A2.tnsr", "A3.tnsr", "B1.tnsr", "B2.tnsr", "B3.tnsr"};
    write_json(cfg.output_dir / "manifest.json", manifest);

    std::printf("synth: wrote coupled pair (rank %lld, seed %llu) to %s\n",
                static_cast<long long>(src->spec.rank), static_cast<unsigned long long>(src->spec.seed),
                cfg.output_dir.string().c_str());
    return kExitOk;
}

json run_one(const cfuse::RunConfig& cfg, const fs::path& base_dir, const fs::path& out_dir) {
    cfuse::AssembledProblem ap = cfuse::assemble_problem(cfg, base_dir);
    auto [a0, b0] = cfuse::make_random_init(ap.problem, cfg.solver.seed);

    cfuse::RunOptions opts;
    opts.record_relerr = cfg.record_relerr;
    opts.record_wall_ms = cfg.record_wall_ms;
    if (ap.truth_a.has_value()) {
        opts.truth_a = &*ap.truth_a;
        opts.truth_b = &*ap.truth_b;
    }

    const auto t0 = std::chrono::steady_clock::now();
    cfuse::RunResult res = cfuse::run(ap.problem, std::move(a0), std::move(b0), cfg.solver, opts);
    const double wall_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(std::chrono::steady_clock::now() - t0)
            .count();

    fs::create_directories(out_dir);
    res.trace.write_csv(out_dir / "trace.csv");
    write_factors(out_dir, res.state.a, "A");
    write_factors(out_dir, res.state.b, "B");

    const cfuse::TraceRecord& last = res.trace.records.back();
    json final_block;
    final_block["J"] = last.j;
    if (last.step_norm) final_block["step_norm"] = *last.step_norm;
    if (last.stat_err) final_block["stat_err"] = *last.stat_err;
    final_block["relerr"] = cfuse::metric_relerr(ap.problem, res.state.a, res.state.b);
    if (ap.truth_a.has_value()) {
        final_block["fms"] = cfuse::metric_fms(res.state.a, res.state.b, *ap.truth_a, *ap.truth_b);
    }

    json summary;
    summary["command"] = "run";
    summary["algorithm"] = cfuse::algorithm_name(cfg.solver.algorithm);
    summary["seed"] = cfg.solver.seed;
    summary["sweeps"] = res.state.k;
    summary["stop_reason"] = stop_reason_json(res.stop_reason);
    summary["final"] = final_block;
    // Total wall time is the one intentionally non-reproducible field; the
    // trace stays byte-identical across runs unless record_wall_ms is set.
    summary["wall_ms_total"] = wall_ms;
    summary["config"] = cfg.to_json();
    write_json(out_dir / "summary.json", summary);
    return summary;
}

int cmd_run(const CommonArgs& args, long seeds) {
    cfuse::RunConfig cfg = load_config(args, "run");
    const fs::path base_dir = fs::path(args.config_path).parent_path();

    if (seeds <= 1) {
        const json summary = run_one(cfg, base_dir, cfg.output_dir);
        std::printf("run: %s, %lld sweep(s), final J = %.10g, wrote %s\n",
                    summary["stop_reason"].get<std::string>().c_str(), summary["sweeps"].get<long long>(),
                    summary["final"]["J"].get<double>(), cfg.output_dir.string().c_str());
        return kExitOk;
    }

    const std::uint64_t base_seed = cfg.solver.seed;
    std::vector<json> summaries(static_cast<std::size_t>(seeds));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(seeds));
    std::atomic<long> next{0};
    const unsigned workers = std::min<unsigned>(std::max(1u, args.jobs), static_cast<unsigned>(seeds));

    auto worker = [&]() {
        while (true) {
            const long i = next.fetch_add(1);
            if (i >= seeds) break;
            try {
                cfuse::RunConfig sub = cfg;
                const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
                sub.solver.seed = seed;
                if (auto* synth = std::get_if<cfuse::SyntheticSource>(&sub.problem)) {
                    synth->spec.seed = seed;
                }
                const fs::path out_dir = cfg.output_dir / ("seed_" + std::to_string(seed));
                summaries[static_cast<std::size_t>(i)] = run_one(sub, base_dir, out_dir);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    json aggregate;
    aggregate["command"] = "run";
    aggregate["seeds"] = json::array();
    std::vector<double> finals;
    for (const json& s : summaries) {
        aggregate["seeds"].push_back({{"seed", s["seed"]},
                                      {"sweeps", s["sweeps"]},
                                      {"stop_reason", s["stop_reason"]},
                                      {"final", s["final"]}});
        finals.push_back(s["final"]["J"].get<double>());
    }
    std::sort(finals.begin(), finals.end());
    const std::size_t n = finals.size();
    aggregate["median_final_J"] = n % 2 == 1 ? finals[n / 2] : 0.5 * (finals[n / 2 - 1] + finals[n / 2]);
    write_json(cfg.output_dir / "aggregate.json", aggregate);

    std::printf("run: %ld seed(s) complete, median final J = %.10g, wrote %s\n", seeds,
                aggregate["median_final_J"].get<double>(), cfg.output_dir.string().c_str());
    return kExitOk;
}

int cmd_metrics(const CommonArgs& args, const std::string& est_dir, const std::string& truth_dir,
                const std::string& est_sri, const std::string& true_sri) {
    const cfuse::KruskalFactors est_a = read_factors(est_dir, "A");
    const cfuse::KruskalFactors est_b = read_factors(est_dir, "B");
    const cfuse::KruskalFactors truth_a = read_factors(truth_dir, "A");
    const cfuse::KruskalFactors truth_b = read_factors(truth_dir, "B");

    json out;
    out["command"] = "metrics";
    out["fms_a"] = cfuse::fms_side(est_a, truth_a);
    out["fms_b"] = cfuse::fms_side(est_b, truth_b);
    out["fms"] = cfuse::metric_fms(est_a, est_b, truth_a, truth_b);

    const fs::path y_path = fs::path(truth_dir) / "Y.tnsr";
    const fs::path yp_path = fs::path(truth_dir) / "Yprime.tnsr";
    if (fs::exists(y_path) && fs::exists(yp_path)) {
        const cfuse::DenseTensor y = cfuse::read_tnsr(y_path);
        const cfuse::DenseTensor yp = cfuse::read_tnsr(yp_path);
        double ny = 0.0, nyp = 0.0;
        for (double v : y.values()) ny += v * v;
        for (double v : yp.values()) nyp += v * v;
        if (ny > 0.0 && nyp > 0.0) {
            out["relerr"] = cfuse::cp_fit_value(y, est_a) / ny + cfuse::cp_fit_value(yp, est_b) / nyp;
        }
    }

    if (!est_sri.empty() != !true_sri.empty()) {
        throw cfuse::ConfigError("metrics: --est-sri and --true-sri must be given together");
    }
    if (!est_sri.empty()) {
        const cfuse::DenseTensor est = cfuse::read_tnsr(est_sri);
        const cfuse::DenseTensor truth = cfuse::read_tnsr(true_sri);
        const cfuse::HsrMetrics h = cfuse::metric_hsr(est, truth);
        out["hsr"] = {{"rsnr", h.rsnr}, {"ssim", h.ssim}, {"cc", h.cc}, {"rmse", h.rmse}, {"sam", h.sam}};
    }

    const fs::path out_dir = args.out_override.empty() ? fs::path(".") : fs::path(args.out_override);
    fs::create_directories(out_dir);
    write_json(out_dir / "metrics.json", out);
    std::printf("metrics: fms = %.6f, wrote %s\n", out["fms"].get<double>(),
                (out_dir / "metrics.json").string().c_str());
    return kExitOk;
}

int cmd_hsr_degrade(const CommonArgs& args, const std::string& sri_path, cfuse::DegradationSpec dspec, long pm_bands,
                    const std::string& pm_file) {
    const cfuse::DenseTensor sri = cfuse::read_tnsr(sri_path);
    if (sri.order() != 3) {
        throw cfuse::ConfigError("hsr-degrade: the SRI must be a third-order tensor");
    }
    dspec.spectral_response =
        pm_file.empty() ? cfuse::pm_band_aggregation(sri.dim(3), pm_bands) : cfuse::read_matrix_csv(pm_file);
    const cfuse::DegradeResult dr = cfuse::degrade_sri(sri, dspec);

    const fs::path out_dir = args.out_override.empty() ? fs::path("out") : fs::path(args.out_override);
    fs::create_directories(out_dir);
    cfuse::write_tnsr(out_dir / "hsi.tnsr", dr.hsi);
    cfuse::write_tnsr(out_dir / "msi.tnsr", dr.msi);
    cfuse::write_matrix_csv(out_dir / "P1.csv", dr.p1);
    cfuse::write_matrix_csv(out_dir / "P2.csv", dr.p2);
    cfuse::write_matrix_csv(out_dir / "Pm.csv", dspec.spectral_response);

    json manifest;
    manifest["command"] = "hsr-degrade";
    manifest["sri"] = sri_path;
    manifest["sri_dims"] = sri.shape();
    manifest["hsi_dims"] = dr.hsi.shape();
    manifest["msi_dims"] = dr.msi.shape();
    manifest["blur_kernel_size"] = dspec.blur_kernel_size;
    manifest["blur_sigma"] = dspec.blur_sigma;
    manifest["downsample_stride"] = dspec.downsample_stride;
    manifest["pm_bands"] = dspec.spectral_response.rows();
    write_json(out_dir / "manifest.json", manifest);

    std::printf("hsr-degrade: %lldx%lldx%lld -> hsi %lldx%lldx%lld, msi %lldx%lldx%lld, wrote %s\n",
                static_cast<long long>(sri.dim(1)), static_cast<long long>(sri.dim(2)),
                static_cast<long long>(sri.dim(3)), static_cast<long long>(dr.hsi.dim(1)),
                static_cast<long long>(dr.hsi.dim(2)), static_cast<long long>(dr.hsi.dim(3)),
                static_cast<long long>(dr.msi.dim(1)), static_cast<long long>(dr.msi.dim(2)),
                static_cast<long long>(dr.msi.dim(3)), out_dir.string().c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coupled-fuse: coupled CP tensor decomposition via structure-adapted proximal gradients"};
    app.fallthrough();
    app.require_subcommand(1);

    CommonArgs common;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "override the data and init seeds");
    app.add_option("--config", common.config_path, "JSON run configuration");
    app.add_option("--out", common.out_override, "override the output directory");
    app.add_option("--jobs", common.jobs, "worker threads for seed sweeps")->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "generate a synthetic coupled problem and write it out");

    auto* run = app.add_subcommand("run", "solve a configured problem");
    long seeds = 1;
    run->add_option("--seeds", seeds, "run this many consecutive seeds into seed_<s>/ subdirectories")
        ->check(CLI::PositiveNumber);

    auto* metrics = app.add_subcommand("metrics", "score estimated factors against references");
    std::string est_dir, truth_dir, est_sri, true_sri;
    metrics->add_option("--est", est_dir, "directory with estimated A1..B3.tnsr")->required();
    metrics->add_option("--truth", truth_dir, "directory with reference A1..B3.tnsr (and optional Y/Yprime)")
        ->required();
    metrics->add_option("--est-sri", est_sri, "reconstructed image tensor for HSR metrics");
    metrics->add_option("--true-sri", true_sri, "reference image tensor for HSR metrics");

    auto* degrade = app.add_subcommand("hsr-degrade", "degrade an SRI tensor into an HSI/MSI pair");
    std::string sri_path, pm_file;
    cfuse::DegradationSpec dspec;
    long pm_bands = 6;
    degrade->add_option("--sri", sri_path, "input SRI tensor (.tnsr)")->required();
    degrade->add_option("--kernel-size", dspec.blur_kernel_size, "odd Gaussian kernel width");
    degrade->add_option("--sigma", dspec.blur_sigma, "Gaussian blur sigma");
    degrade->add_option("--stride", dspec.downsample_stride, "spatial downsampling stride");
    degrade->add_option("--pm-bands", pm_bands, "output bands of the default spectral response");
    degrade->add_option("--pm-file", pm_file, "explicit spectral response (CSV), overrides --pm-bands");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (seed_opt->count() > 0) common.seed_override = seed_value;

    try {
        if (synth->parsed()) return cmd_synth(common);
        if (run->parsed()) return cmd_run(common, seeds);
        if (metrics->parsed()) return cmd_metrics(common, est_dir, truth_dir, est_sri, true_sri);
        if (degrade->parsed()) return cmd_hsr_degrade(common, sri_path, dspec, pm_bands, pm_file);
    } catch (const cfuse::DivergenceError& e) {
        std::fprintf(stderr, "coupled-fuse: divergence: %s\n", e.what());
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "coupled-fuse: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
