#pragma once

#include "coupledfuse/model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace cfuse {

/// Iterates stopped producing finite values (objective or step norm became
/// NaN/inf). Carries the sweep index in the message.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Algorithm { Easap, Asap, AccelAsap };

struct DiagnosticsConfig {
    bool stationarity = true;
    bool descent_check = true;
    bool lyapunov = false;
};

struct SolverConfig {
    Algorithm algorithm = Algorithm::Easap;
    /// Stepsize inflation per block, tau = gamma * (estimate [+ k]); must be
    /// > 1. The stacked-side algorithms (asap, accel-asap, and easap with
    /// blocks_per_side = 1) use entry 0 of each side.
    std::array<double, 3> gamma_a{1.01, 1.01, 1.01};
    std::array<double, 3> gamma_b{1.01, 1.01, 1.01};
    /// Add the sweep counter k to the Lipschitz estimate before scaling by
    /// gamma. Only easap honors this; asap and accel-asap never add it.
    bool add_iteration_to_step = true;
    long max_iters = 200;
    /// Stop once ||z^{k+1} - z^k||_F <= epsilon; 0 runs to max_iters unless
    /// an exact fixed point is hit, +inf stops after the first sweep.
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    /// 3 updates each factor as its own block; 1 treats each side as a
    /// single stacked block (the asap block structure).
    int blocks_per_side = 3;
    DiagnosticsConfig diagnostics;

    void validate() const;
};

struct SolverState {
    KruskalFactors a, b;
    KruskalFactors prev_a, prev_b;
    double objective = 0.0;
    long k = 0;
    /// Extrapolation memory t_{k-1} for accel-asap; starts at 1.
    double t_prev = 1.0;

    /// Validates the initial factors against the problem, copies them into
    /// both current and previous slots (z^{-1} := z^0) and evaluates J.
    static SolverState init(const CoupledProblem& p, KruskalFactors a0, KruskalFactors b0);
};

/// Per-sweep byproducts. Stepsize and Lipschitz-estimate slots are ordered
/// A1, A2, A3, B1, B2, B3; side-stacked sweeps replicate the side value
/// into its three slots (the replicated form gives identical stationarity,
/// Lyapunov and descent numbers, so downstream code never branches).
/// B-side estimates include the lambda scaling of the B fit term.
struct SweepInfo {
    std::array<double, 6> stepsizes{};
    std::array<double, 6> lipschitz{};
    /// min over blocks of (tau - estimate); the descent constant is half this.
    double descent_margin = 0.0;
};

/// One Gauss-Seidel sweep of the extended scheme: per-block prox-gradient
/// with stepsizes from mixed-point Lipschitz estimates. Updates `state` in
/// place (prev_* receive the pre-sweep iterate, k increments, objective is
/// re-evaluated).
SweepInfo easap_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg);

/// One sweep treating each side as a single stacked block: all gradients of
/// a side evaluated at the pre-update iterate, one stepsize per side from
/// the stacked estimate.
SweepInfo asap_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg);

/// asap_sweep from an extrapolated point z + (t_{k-1}-1)/t_k * (z - z_prev);
/// both the gradients and the prox anchor use the extrapolated point. The
/// first sweep has weight 0 and so coincides with plain asap.
SweepInfo accel_asap_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg);

/// Blockwise prox-gradient residual at (a, b): every block's map is applied
/// at the same point (gradients and prox data unmixed), using the given
/// per-block stepsizes (slots as in SweepInfo). Returns the stacked
/// Frobenius norm of z - prox(z - grad/tau); 0 exactly at blockwise
/// stationary points.
double stationarity_error(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b,
                          std::span<const double, 6> stepsizes);

/// Lyapunov-style merit at state.(a,b) given the stepsizes/estimates of the
/// sweep that produced it:
///   J(z^k) + 1/2 sum_b (tau_b - mu_b) ||block^k - block^{k-1}||_F^2,
/// with J(z^k) read from state.objective.
double lyapunov_value(const SolverState& state, std::span<const double, 6> stepsizes,
                      std::span<const double, 6> lipschitz);

struct TraceRecord {
    long k = 0;
    double j = 0.0;
    std::optional<double> step_norm;
    std::optional<double> stat_err;
    std::optional<double> relerr;
    std::optional<double> fms;
    std::optional<double> wall_ms;
    std::optional<double> lyapunov;
    double descent_margin = 0.0;
};

/// Sufficient-decrease test between consecutive trace records:
///   J_next <= J_prev - (margin/2) ||step||^2 + 1e-8 (1 + |J_prev|).
/// `next` must carry a step norm.
bool descent_check(const TraceRecord& prev, const TraceRecord& next);

struct RunTrace {
    std::vector<TraceRecord> records;

    /// CSV with header k,J,step_norm,stat_err,relerr,fms,wall_ms; floats as
    /// %.17g, absent optionals as empty fields.
    void write_csv(std::ostream& os) const;
    void write_csv(const std::filesystem::path& path) const;
};

enum class StopReason { Epsilon, MaxIters };

struct RunResult {
    SolverState state;
    RunTrace trace;
    StopReason stop_reason = StopReason::MaxIters;
};

struct RunOptions {
    /// Reference factors enabling the fms column (and relerr).
    const KruskalFactors* truth_a = nullptr;
    const KruskalFactors* truth_b = nullptr;
    /// Record the data-fit relative error each sweep even without truth.
    bool record_relerr = false;
    /// Record per-sweep wall time. Off by default so identical runs produce
    /// byte-identical trace files.
    bool record_wall_ms = false;
};

/// Full solver loop: record z^0, sweep until the step norm falls to
/// cfg.epsilon or k reaches cfg.max_iters, tracing J / step / diagnostics
/// per sweep. Throws DivergenceError when iterates stop being finite.
RunResult run(const CoupledProblem& p, KruskalFactors init_a, KruskalFactors init_b, const SolverConfig& cfg,
              const RunOptions& opts = {});

}  // namespace cfuse
