#include "coupledfuse/solver.hpp"

#include "coupledfuse/io.hpp"
#include "coupledfuse/log.hpp"
#include "coupledfuse/metrics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace cfuse {

namespace {

constexpr std::array<BlockId, 6> kBlockOrder = {{
    {BlockId::Side::A, 1},
    {BlockId::Side::A, 2},
    {BlockId::Side::A, 3},
    {BlockId::Side::B, 1},
    {BlockId::Side::B, 2},
    {BlockId::Side::B, 3},
}};

const Matrix& block_of(const KruskalFactors& a, const KruskalFactors& b, BlockId blk) {
    const KruskalFactors& f = blk.side == BlockId::Side::A ? a : b;
    return f.factors[static_cast<std::size_t>(blk.index - 1)];
}

/// ||X (KR) Y||_F^2 without materializing the product.
double kr_sq_norm(const Matrix& x, const Matrix& y) {
    double acc = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
        acc += x.col(c).squaredNorm() * y.col(c).squaredNorm();
    }
    return acc;
}

/// Side-stacked Lipschitz surrogate, the literal three-term sum the
/// reference scheme uses for a third-order side (note the repeated 3-2
/// pairing in the last term; kept verbatim for bit-compatibility between
/// the stacked easap reduction and asap).
double stacked_estimate(const KruskalFactors& f) {
    const Matrix& f1 = f.factors[0];
    const Matrix& f2 = f.factors[1];
    const Matrix& f3 = f.factors[2];
    const double est = kr_sq_norm(f3, f2) + kr_sq_norm(f3, f1) + kr_sq_norm(f2, f3);
    return std::max(est, kBlockLipschitzFloor);
}

/// A non-finite stepsize means a factor already blew up (the estimate is a
/// polynomial of the factors), so report divergence rather than letting
/// prox_apply reject the value as a usage error.
double checked_stepsize(double tau, long k) {
    if (!std::isfinite(tau)) {
        throw DivergenceError("stepsize became non-finite at sweep " + std::to_string(k + 1));
    }
    return tau;
}

void check_side(const KruskalFactors& f, const DenseTensor& t, Index rank, const char* side) {
    if (f.order() != 3) {
        throw std::invalid_argument(std::string("solver: side ") + side + " must have exactly 3 factors");
    }
    f.validate();
    if (f.rank != rank) {
        throw std::invalid_argument(std::string("solver: side ") + side + " rank " + std::to_string(f.rank) +
                                    " does not match problem rank " + std::to_string(rank));
    }
    for (Index n = 1; n <= 3; ++n) {
        if (f.factors[static_cast<std::size_t>(n - 1)].rows() != t.dim(n)) {
            throw std::invalid_argument(std::string("solver: side ") + side + " factor " + std::to_string(n) +
                                        " rows do not match tensor dimension " + std::to_string(n));
        }
    }
}

/// One sweep with each side treated as a single stacked block. Shared by
/// asap_sweep and the blocks_per_side = 1 reduction of easap_sweep so the
/// two produce bit-identical iterates.
SweepInfo stacked_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg, bool add_k) {
    state.prev_a = state.a;
    state.prev_b = state.b;
    const double kadd = add_k ? static_cast<double>(state.k) : 0.0;
    SweepInfo info;

    const double est_a = stacked_estimate(state.a);
    const double tau = checked_stepsize(cfg.gamma_a[0] * (est_a + kadd), state.k);
    std::array<Matrix, 3> grads_a;
    for (int i = 1; i <= 3; ++i) {
        grads_a[static_cast<std::size_t>(i - 1)] = cp_fit_gradient_block(p.y, state.a, i);
    }
    for (int i = 1; i <= 3; ++i) {
        Matrix& x = state.a.factors[static_cast<std::size_t>(i - 1)];
        const Matrix v = x - grads_a[static_cast<std::size_t>(i - 1)] / tau;
        x = prox_apply(block_prox(p, {BlockId::Side::A, i}, state.prev_a, state.b), v, tau);
    }

    const double est_b = p.lambda * stacked_estimate(state.b);
    const double sigma = checked_stepsize(cfg.gamma_b[0] * (est_b + kadd), state.k);
    std::array<Matrix, 3> grads_b;
    for (int j = 1; j <= 3; ++j) {
        grads_b[static_cast<std::size_t>(j - 1)] = p.lambda * cp_fit_gradient_block(p.y_prime, state.b, j);
    }
    for (int j = 1; j <= 3; ++j) {
        Matrix& x = state.b.factors[static_cast<std::size_t>(j - 1)];
        const Matrix v = x - grads_b[static_cast<std::size_t>(j - 1)] / sigma;
        x = prox_apply(block_prox(p, {BlockId::Side::B, j}, state.a, state.prev_b), v, sigma);
    }

    for (int s = 0; s < 3; ++s) {
        info.stepsizes[static_cast<std::size_t>(s)] = tau;
        info.lipschitz[static_cast<std::size_t>(s)] = est_a;
        info.stepsizes[static_cast<std::size_t>(3 + s)] = sigma;
        info.lipschitz[static_cast<std::size_t>(3 + s)] = est_b;
    }
    info.descent_margin = std::min(tau - est_a, sigma - est_b);

    state.k += 1;
    state.objective = objective_value(p, state.a, state.b);
    return info;
}

/// Stepsizes the first sweep would use at the current point, with every
/// estimate taken unmixed; used for the k = 0 trace record.
SweepInfo point_info(const CoupledProblem& p, const SolverState& state, const SolverConfig& cfg) {
    SweepInfo info;
    if (cfg.algorithm == Algorithm::Easap && cfg.blocks_per_side == 3) {
        for (int s = 0; s < 6; ++s) {
            const BlockId blk = kBlockOrder[static_cast<std::size_t>(s)];
            const bool side_a = blk.side == BlockId::Side::A;
            const double scale = side_a ? 1.0 : p.lambda;
            const double est = scale * block_lipschitz_estimate(side_a ? state.a : state.b, blk.index);
            const double gamma =
                side_a ? cfg.gamma_a[static_cast<std::size_t>(blk.index - 1)] : cfg.gamma_b[static_cast<std::size_t>(blk.index - 1)];
            info.stepsizes[static_cast<std::size_t>(s)] = gamma * est;
            info.lipschitz[static_cast<std::size_t>(s)] = est;
        }
    } else {
        const double est_a = stacked_estimate(state.a);
        const double est_b = p.lambda * stacked_estimate(state.b);
        for (int s = 0; s < 3; ++s) {
            info.stepsizes[static_cast<std::size_t>(s)] = cfg.gamma_a[0] * est_a;
            info.lipschitz[static_cast<std::size_t>(s)] = est_a;
            info.stepsizes[static_cast<std::size_t>(3 + s)] = cfg.gamma_b[0] * est_b;
            info.lipschitz[static_cast<std::size_t>(3 + s)] = est_b;
        }
    }
    double margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 6; ++s) {
        margin = std::min(margin, info.stepsizes[static_cast<std::size_t>(s)] - info.lipschitz[static_cast<std::size_t>(s)]);
    }
    info.descent_margin = margin;
    return info;
}

double step_norm_from(const SolverState& state) {
    double acc = 0.0;
    for (int n = 0; n < 3; ++n) {
        acc += (state.a.factors[static_cast<std::size_t>(n)] - state.prev_a.factors[static_cast<std::size_t>(n)]).squaredNorm();
        acc += (state.b.factors[static_cast<std::size_t>(n)] - state.prev_b.factors[static_cast<std::size_t>(n)]).squaredNorm();
    }
    return std::sqrt(acc);
}

void write_field(std::ostream& os, const std::optional<double>& v) {
    os << ',';
    if (v.has_value()) os << format_csv_double(*v);
}

}  // namespace

void SolverConfig::validate() const {
    for (double g : gamma_a) {
        if (!(g > 1.0)) throw std::invalid_argument("SolverConfig: every gamma must be > 1");
    }
    for (double g : gamma_b) {
        if (!(g > 1.0)) throw std::invalid_argument("SolverConfig: every gamma must be > 1");
    }
    if (max_iters < 0) throw std::invalid_argument("SolverConfig: max_iters must be >= 0");
    if (std::isnan(epsilon) || epsilon < 0.0) throw std::invalid_argument("SolverConfig: epsilon must be >= 0");
    if (blocks_per_side != 1 && blocks_per_side != 3) {
        throw std::invalid_argument("SolverConfig: blocks_per_side must be 1 or 3");
    }
}

SolverState SolverState::init(const CoupledProblem& p, KruskalFactors a0, KruskalFactors b0) {
    p.validate();
    check_side(a0, p.y, p.rank_a, "A");
    check_side(b0, p.y_prime, p.rank_b, "B");
    SolverState s;
    s.a = std::move(a0);
    s.b = std::move(b0);
    s.prev_a = s.a;
    s.prev_b = s.b;
    s.objective = objective_value(p, s.a, s.b);
    s.k = 0;
    s.t_prev = 1.0;
    return s;
}

SweepInfo easap_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg) {
    if (cfg.blocks_per_side == 1) {
        return stacked_sweep(p, state, cfg, cfg.add_iteration_to_step);
    }
    state.prev_a = state.a;
    state.prev_b = state.b;
    const double kadd = cfg.add_iteration_to_step ? static_cast<double>(state.k) : 0.0;
    SweepInfo info;
    double margin = std::numeric_limits<double>::infinity();

    // A side: block i sees blocks < i already updated (state.a is the mixed
    // point), so both the gradient and the Lipschitz estimate come out at
    // the Gauss-Seidel point prescribed by the scheme.
    for (int i = 1; i <= 3; ++i) {
        const double est = block_lipschitz_estimate(state.a, i);
        const double tau = checked_stepsize(cfg.gamma_a[static_cast<std::size_t>(i - 1)] * (est + kadd), state.k);
        const BlockPartials bp = block_partials(p, {BlockId::Side::A, i}, state.a, state.b);
        Matrix& x = state.a.factors[static_cast<std::size_t>(i - 1)];
        const Matrix v = x - bp.smooth_gradient / tau;
        x = prox_apply(bp.prox, v, tau);
        info.stepsizes[static_cast<std::size_t>(i - 1)] = tau;
        info.lipschitz[static_cast<std::size_t>(i - 1)] = est;
        margin = std::min(margin, tau - est);
    }

    // B side: the fit term carries lambda, so both the gradient (inside
    // block_partials) and the estimate are lambda-scaled.
    for (int j = 1; j <= 3; ++j) {
        const double est = p.lambda * block_lipschitz_estimate(state.b, j);
        const double sigma = checked_stepsize(cfg.gamma_b[static_cast<std::size_t>(j - 1)] * (est + kadd), state.k);
        const BlockPartials bp = block_partials(p, {BlockId::Side::B, j}, state.a, state.b);
        Matrix& x = state.b.factors[static_cast<std::size_t>(j - 1)];
        const Matrix v = x - bp.smooth_gradient / sigma;
        x = prox_apply(bp.prox, v, sigma);
        info.stepsizes[static_cast<std::size_t>(2 + j)] = sigma;
        info.lipschitz[static_cast<std::size_t>(2 + j)] = est;
        margin = std::min(margin, sigma - est);
    }

    info.descent_margin = margin;
    state.k += 1;
    state.objective = objective_value(p, state.a, state.b);
    return info;
}

SweepInfo asap_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg) {
    return stacked_sweep(p, state, cfg, /*add_k=*/false);
}

SweepInfo accel_asap_sweep(const CoupledProblem& p, SolverState& state, const SolverConfig& cfg) {
    const double t_curr = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * state.t_prev * state.t_prev));
    const double weight = (state.t_prev - 1.0) / t_curr;

    KruskalFactors ea = state.a;
    KruskalFactors eb = state.b;
    for (int n = 0; n < 3; ++n) {
        ea.factors[static_cast<std::size_t>(n)] +=
            weight * (state.a.factors[static_cast<std::size_t>(n)] - state.prev_a.factors[static_cast<std::size_t>(n)]);
        eb.factors[static_cast<std::size_t>(n)] +=
            weight * (state.b.factors[static_cast<std::size_t>(n)] - state.prev_b.factors[static_cast<std::size_t>(n)]);
    }

    SweepInfo info;
    const double est_a = stacked_estimate(ea);
    const double tau = checked_stepsize(cfg.gamma_a[0] * est_a, state.k);
    KruskalFactors na = ea;
    for (int i = 1; i <= 3; ++i) {
        const Matrix grad = cp_fit_gradient_block(p.y, ea, i);
        const Matrix v = ea.factors[static_cast<std::size_t>(i - 1)] - grad / tau;
        na.factors[static_cast<std::size_t>(i - 1)] = prox_apply(block_prox(p, {BlockId::Side::A, i}, ea, eb), v, tau);
    }

    const double est_b = p.lambda * stacked_estimate(eb);
    const double sigma = checked_stepsize(cfg.gamma_b[0] * est_b, state.k);
    KruskalFactors nb = eb;
    for (int j = 1; j <= 3; ++j) {
        const Matrix grad = p.lambda * cp_fit_gradient_block(p.y_prime, eb, j);
        const Matrix v = eb.factors[static_cast<std::size_t>(j - 1)] - grad / sigma;
        nb.factors[static_cast<std::size_t>(j - 1)] = prox_apply(block_prox(p, {BlockId::Side::B, j}, na, eb), v, sigma);
    }

    state.prev_a = std::move(state.a);
    state.prev_b = std::move(state.b);
    state.a = std::move(na);
    state.b = std::move(nb);
    state.t_prev = t_curr;
    state.k += 1;
    state.objective = objective_value(p, state.a, state.b);

    for (int s = 0; s < 3; ++s) {
        info.stepsizes[static_cast<std::size_t>(s)] = tau;
        info.lipschitz[static_cast<std::size_t>(s)] = est_a;
        info.stepsizes[static_cast<std::size_t>(3 + s)] = sigma;
        info.lipschitz[static_cast<std::size_t>(3 + s)] = est_b;
    }
    info.descent_margin = std::min(tau - est_a, sigma - est_b);
    return info;
}

double stationarity_error(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b,
                          std::span<const double, 6> stepsizes) {
    double acc = 0.0;
    for (int s = 0; s < 6; ++s) {
        const BlockId blk = kBlockOrder[static_cast<std::size_t>(s)];
        const double tau = stepsizes[static_cast<std::size_t>(s)];
        if (!(tau > 0.0)) {
            throw std::invalid_argument("stationarity_error: stepsizes must be positive");
        }
        const BlockPartials bp = block_partials(p, blk, a, b);
        const Matrix& x = block_of(a, b, blk);
        const Matrix bar = prox_apply(bp.prox, x - bp.smooth_gradient / tau, tau);
        acc += (x - bar).squaredNorm();
    }
    return std::sqrt(acc);
}

double lyapunov_value(const SolverState& state, std::span<const double, 6> stepsizes,
                      std::span<const double, 6> lipschitz) {
    double r = state.objective;
    for (int s = 0; s < 6; ++s) {
        const BlockId blk = kBlockOrder[static_cast<std::size_t>(s)];
        const Matrix& curr = block_of(state.a, state.b, blk);
        const Matrix& prev = block_of(state.prev_a, state.prev_b, blk);
        r += 0.5 * (stepsizes[static_cast<std::size_t>(s)] - lipschitz[static_cast<std::size_t>(s)]) *
             (curr - prev).squaredNorm();
    }
    return r;
}

bool descent_check(const TraceRecord& prev, const TraceRecord& next) {
    if (!next.step_norm.has_value()) {
        throw std::invalid_argument("descent_check: next record has no step norm");
    }
    const double c = 0.5 * next.descent_margin;
    const double step = *next.step_norm;
    const double slack = 1e-8 * (1.0 + std::abs(prev.j));
    return next.j <= prev.j - c * step * step + slack;
}

void RunTrace::write_csv(std::ostream& os) const {
    os << "k,J,step_norm,stat_err,relerr,fms,wall_ms\n";
    for (const TraceRecord& r : records) {
        os << r.k << ',' << format_csv_double(r.j);
        write_field(os, r.step_norm);
        write_field(os, r.stat_err);
        write_field(os, r.relerr);
        write_field(os, r.fms);
        write_field(os, r.wall_ms);
        os << '\n';
    }
}

void RunTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
    write_csv(os);
    os.flush();
    if (!os) throw std::runtime_error(path.string() + ": write failed");
}

RunResult run(const CoupledProblem& p, KruskalFactors init_a, KruskalFactors init_b, const SolverConfig& cfg,
              const RunOptions& opts) {
    cfg.validate();
    SolverState state = SolverState::init(p, std::move(init_a), std::move(init_b));
    if (!std::isfinite(state.objective)) {
        throw DivergenceError("objective is not finite at the initial point");
    }
    if ((opts.truth_a == nullptr) != (opts.truth_b == nullptr)) {
        throw std::invalid_argument("run: provide both truth factor sets or neither");
    }
    const bool with_truth = opts.truth_a != nullptr;
    const bool with_relerr = opts.record_relerr || with_truth;

    RunTrace trace;
    {
        TraceRecord rec;
        rec.k = 0;
        rec.j = state.objective;
        if (cfg.diagnostics.stationarity) {
            const SweepInfo info0 = point_info(p, state, cfg);
            rec.stat_err = stationarity_error(p, state.a, state.b, info0.stepsizes);
        }
        if (cfg.diagnostics.lyapunov) rec.lyapunov = state.objective;
        if (with_relerr) rec.relerr = metric_relerr(p, state.a, state.b);
        if (with_truth) rec.fms = metric_fms(state.a, state.b, *opts.truth_a, *opts.truth_b);
        if (opts.record_wall_ms) rec.wall_ms = 0.0;
        trace.records.push_back(std::move(rec));
    }

    StopReason reason = StopReason::MaxIters;
    while (state.k < cfg.max_iters) {
        const auto t0 = std::chrono::steady_clock::now();
        SweepInfo info;
        switch (cfg.algorithm) {
            case Algorithm::Easap: info = easap_sweep(p, state, cfg); break;
            case Algorithm::Asap: info = asap_sweep(p, state, cfg); break;
            case Algorithm::AccelAsap: info = accel_asap_sweep(p, state, cfg); break;
        }
        const double wall_ms =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(std::chrono::steady_clock::now() - t0)
                .count();

        const double step = step_norm_from(state);
        if (!std::isfinite(state.objective) || !std::isfinite(step)) {
            throw DivergenceError("iterates stopped being finite at sweep " + std::to_string(state.k));
        }

        TraceRecord rec;
        rec.k = state.k;
        rec.j = state.objective;
        rec.step_norm = step;
        rec.descent_margin = info.descent_margin;
        if (cfg.diagnostics.stationarity) {
            rec.stat_err = stationarity_error(p, state.a, state.b, info.stepsizes);
        }
        if (cfg.diagnostics.lyapunov) rec.lyapunov = lyapunov_value(state, info.stepsizes, info.lipschitz);
        if (with_relerr) rec.relerr = metric_relerr(p, state.a, state.b);
        if (with_truth) rec.fms = metric_fms(state.a, state.b, *opts.truth_a, *opts.truth_b);
        if (opts.record_wall_ms) rec.wall_ms = wall_ms;

        if (cfg.diagnostics.descent_check && !descent_check(trace.records.back(), rec)) {
            log::warn("descent check failed at sweep " + std::to_string(state.k) + ": J went from " +
                      std::to_string(trace.records.back().j) + " to " + std::to_string(rec.j));
        }
        trace.records.push_back(std::move(rec));

        if (step <= cfg.epsilon) {
            reason = StopReason::Epsilon;
            break;
        }
    }

    return RunResult{std::move(state), std::move(trace), reason};
}

}  // namespace cfuse
