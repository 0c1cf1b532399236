#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <coupledfuse/config.hpp>
#include <coupledfuse/metrics.hpp>
#include <coupledfuse/prox.hpp>
#include <coupledfuse/solver.hpp>
#include <coupledfuse/synth.hpp>
#include <coupledfuse/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace py = pybind11;
using namespace cfuse;

namespace {

using CArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseTensor tensor_from_array(const CArray& arr) {
    Shape shape(static_cast<std::size_t>(arr.ndim()));
    for (py::ssize_t d = 0; d < arr.ndim(); ++d) shape[static_cast<std::size_t>(d)] = arr.shape(d);
    std::vector<double> values(arr.data(), arr.data() + arr.size());
    return DenseTensor(std::move(shape), std::move(values));
}

py::array_t<double> array_from_tensor(const DenseTensor& t) {
    const std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

py::list list_from_factors(const KruskalFactors& f) {
    py::list out;
    for (const Matrix& m : f.factors) out.append(m);
    return out;
}

py::array_t<double> column(const std::vector<TraceRecord>& recs, double (*pick)(const TraceRecord&)) {
    py::array_t<double> out(static_cast<py::ssize_t>(recs.size()));
    double* p = out.mutable_data();
    for (std::size_t i = 0; i < recs.size(); ++i) p[i] = pick(recs[i]);
    return out;
}

double opt_or_nan(const std::optional<double>& v) {
    return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

CoupledProblem laplacian_problem(const CArray& y, const CArray& y_prime, Index rank, double mu, double lambda) {
    CoupledProblem p;
    p.y = tensor_from_array(y);
    p.y_prime = tensor_from_array(y_prime);
    p.rank_a = rank;
    p.rank_b = rank;
    p.coupling = LaplacianCoupling{mu, 3, 1};
    p.lambda = lambda;
    return p;
}

py::dict solve_laplacian(const CArray& y, const CArray& y_prime, Index rank, double mu, double lambda,
                         const std::string& algorithm, double gamma, bool add_iteration_to_step, long max_iters,
                         double epsilon, std::uint64_t seed, int blocks_per_side,
                         std::optional<std::vector<Matrix>> truth_a, std::optional<std::vector<Matrix>> truth_b) {
    const CoupledProblem p = laplacian_problem(y, y_prime, rank, mu, lambda);

    SolverConfig cfg;
    cfg.algorithm = algorithm_from_name(algorithm);
    cfg.gamma_a.fill(gamma);
    cfg.gamma_b.fill(gamma);
    cfg.add_iteration_to_step = add_iteration_to_step;
    cfg.max_iters = max_iters;
    cfg.epsilon = epsilon;
    cfg.seed = seed;
    cfg.blocks_per_side = blocks_per_side;
    cfg.diagnostics.stationarity = false;
    cfg.diagnostics.descent_check = false;

    std::optional<KruskalFactors> ta, tb;
    if (truth_a.has_value() != truth_b.has_value()) {
        throw std::invalid_argument("solve: pass truth_a and truth_b together or not at all");
    }
    RunOptions opts;
    if (truth_a) {
        ta.emplace(std::move(*truth_a));
        tb.emplace(std::move(*truth_b));
        opts.truth_a = &*ta;
        opts.truth_b = &*tb;
    }

    auto [a0, b0] = make_random_init(p, seed);
    const RunResult res = run(p, std::move(a0), std::move(b0), cfg, opts);
    const auto& recs = res.trace.records;

    py::dict out;
    out["a"] = list_from_factors(res.state.a);
    out["b"] = list_from_factors(res.state.b);
    out["j"] = column(recs, [](const TraceRecord& r) { return r.j; });
    out["step_norm"] = column(recs, [](const TraceRecord& r) { return opt_or_nan(r.step_norm); });
    if (opts.truth_a != nullptr) {
        out["relerr"] = column(recs, [](const TraceRecord& r) { return opt_or_nan(r.relerr); });
        out["fms"] = column(recs, [](const TraceRecord& r) { return opt_or_nan(r.fms); });
    }
    out["n_sweeps"] = res.state.k;
    out["stop_reason"] = res.stop_reason == StopReason::Epsilon ? "epsilon" : "max_iters";
    return out;
}

py::dict gen_synthetic_py(const Shape& dims_y, const Shape& dims_y_prime, Index rank, double snr_db,
                          double laplace_scale, std::uint64_t seed, double mu) {
    SynthSpec spec;
    spec.dims_y = dims_y;
    spec.dims_y_prime = dims_y_prime;
    spec.rank = rank;
    spec.snr_db = snr_db;
    spec.laplace_scale = laplace_scale;
    spec.seed = seed;
    const SynthResult r = gen_synthetic_coupled(spec, mu);

    py::dict out;
    out["y"] = array_from_tensor(r.problem.y);
    out["y_prime"] = array_from_tensor(r.problem.y_prime);
    out["clean_y"] = array_from_tensor(r.clean_y);
    out["clean_y_prime"] = array_from_tensor(r.clean_y_prime);
    out["truth_a"] = list_from_factors(r.truth_a);
    out["truth_b"] = list_from_factors(r.truth_b);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Coupled CP tensor decomposition: tensor kernels, prox operators and solvers";
    m.attr("__version__") = "0.1.0";

    m.def("khatri_rao", &khatri_rao, py::arg("matrices"),
          "Column-wise Khatri-Rao product; the first matrix varies slowest.");

    m.def(
        "unfold", [](const CArray& t, Index mode) { return unfold(tensor_from_array(t), mode); }, py::arg("tensor"),
        py::arg("mode"), "Mode-n unfolding (1-based mode), first non-n index fastest along columns.");

    m.def(
        "fold",
        [](const Matrix& m_, Index mode, const Shape& shape) { return array_from_tensor(fold(m_, mode, shape)); },
        py::arg("matrix"), py::arg("mode"), py::arg("shape"), "Inverse of unfold.");

    m.def(
        "kruskal_reconstruct",
        [](std::vector<Matrix> factors) { return array_from_tensor(kruskal_reconstruct(KruskalFactors(std::move(factors)))); },
        py::arg("factors"), "Dense tensor from CP factors.");

    m.def(
        "mttkrp",
        [](const CArray& t, std::vector<Matrix> factors, Index mode) {
            return mttkrp(tensor_from_array(t), KruskalFactors(std::move(factors)), mode);
        },
        py::arg("tensor"), py::arg("factors"), py::arg("mode"),
        "Matricized-tensor times Khatri-Rao product (1-based mode).");

    m.def("prox_l1_offset", &prox_l1_offset, py::arg("v"), py::arg("offset"), py::arg("threshold"),
          "Elementwise soft threshold of v toward offset.");

    m.def("gen_synthetic", &gen_synthetic_py, py::arg("dims_y"), py::arg("dims_y_prime"), py::arg("rank") = 5,
          py::arg("snr_db") = 14.0, py::arg("laplace_scale") = 0.1, py::arg("seed") = 0, py::arg("mu") = 0.01,
          "Coupled synthetic pair with ground-truth factors (B1 = A3 + Laplace noise).");

    m.def("solve", &solve_laplacian, py::arg("y"), py::arg("y_prime"), py::arg("rank"), py::arg("mu") = 0.01,
          py::arg("lambda_") = 1.0, py::arg("algorithm") = "easap", py::arg("gamma") = 1.01,
          py::arg("add_iteration_to_step") = true, py::arg("max_iters") = 200, py::arg("epsilon") = 0.0,
          py::arg("seed") = 0, py::arg("blocks_per_side") = 3, py::arg("truth_a") = py::none(),
          py::arg("truth_b") = py::none(),
          "Run a solver on the laplacian-coupled model from a seeded random init; returns factors and the trace.");

    m.def(
        "metric_relerr",
        [](const CArray& y, const CArray& y_prime, std::vector<Matrix> a, std::vector<Matrix> b) {
            const KruskalFactors fa(std::move(a)), fb(std::move(b));
            const CoupledProblem p = laplacian_problem(y, y_prime, fa.rank, 0.0, 1.0);
            return metric_relerr(p, fa, fb);
        },
        py::arg("y"), py::arg("y_prime"), py::arg("a"), py::arg("b"),
        "Mean relative squared reconstruction error over the two tensors.");

    m.def(
        "metric_fms",
        [](std::vector<Matrix> ea, std::vector<Matrix> eb, std::vector<Matrix> ta, std::vector<Matrix> tb) {
            return metric_fms(KruskalFactors(std::move(ea)), KruskalFactors(std::move(eb)),
                              KruskalFactors(std::move(ta)), KruskalFactors(std::move(tb)));
        },
        py::arg("est_a"), py::arg("est_b"), py::arg("truth_a"), py::arg("truth_b"),
        "Two-sided factor match score after greedy column alignment.");

    m.def(
        "metric_hsr",
        [](const CArray& est, const CArray& truth) {
            const HsrMetrics h = metric_hsr(tensor_from_array(est), tensor_from_array(truth));
            py::dict out;
            out["rsnr"] = h.rsnr;
            out["ssim"] = h.ssim;
            out["cc"] = h.cc;
            out["rmse"] = h.rmse;
            out["sam"] = h.sam;
            return out;
        },
        py::arg("est"), py::arg("truth"), "R-SNR / SSIM / CC / RMSE / SAM between two image stacks.");
}
