// Independent reference implementations used to pin test expectations.
// Everything here is deliberately naive: plain loops over at()/explicit
// formulas, no shared code with the library under test beyond the data types.
#pragma once

#include <coupledfuse/tensor.hpp>

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

using cfuse::DenseTensor;
using cfuse::Index;
using cfuse::KruskalFactors;
using cfuse::Matrix;

// Sum over ranks of outer products, one scalar at a time.
inline DenseTensor naive_reconstruct(const KruskalFactors& f) {
    cfuse::Shape shape;
    for (const auto& m : f.factors) shape.push_back(m.rows());
    DenseTensor out(shape);
    std::vector<Index> idx(static_cast<std::size_t>(f.order()), 0);
    const Index total = out.size();
    for (Index flat = 0; flat < total; ++flat) {
        Index rem = flat;
        for (Index n = f.order() - 1; n >= 0; --n) {
            idx[static_cast<std::size_t>(n)] = rem % shape[static_cast<std::size_t>(n)];
            rem /= shape[static_cast<std::size_t>(n)];
        }
        double acc = 0.0;
        for (Index c = 0; c < f.rank; ++c) {
            double term = 1.0;
            for (Index n = 0; n < f.order(); ++n)
                term *= f.factors[static_cast<std::size_t>(n)](idx[static_cast<std::size_t>(n)], c);
            acc += term;
        }
        out[flat] = acc;
    }
    return out;
}

// MTTKRP straight from the definition: out(i_n, c) = sum over all other
// indices of T(i) * prod_{m != n} factor_m(i_m, c).
inline Matrix naive_mttkrp(const DenseTensor& t, const KruskalFactors& f, Index mode) {
    const Index n = mode - 1;
    const auto& shape = t.shape();
    Matrix out = Matrix::Zero(shape[static_cast<std::size_t>(n)], f.rank);
    std::vector<Index> idx(static_cast<std::size_t>(t.order()), 0);
    const Index total = t.size();
    for (Index flat = 0; flat < total; ++flat) {
        Index rem = flat;
        for (Index m = t.order() - 1; m >= 0; --m) {
            idx[static_cast<std::size_t>(m)] = rem % shape[static_cast<std::size_t>(m)];
            rem /= shape[static_cast<std::size_t>(m)];
        }
        for (Index c = 0; c < f.rank; ++c) {
            double w = 1.0;
            for (Index m = 0; m < t.order(); ++m) {
                if (m == n) continue;
                w *= f.factors[static_cast<std::size_t>(m)](idx[static_cast<std::size_t>(m)], c);
            }
            out(idx[static_cast<std::size_t>(n)], c) += t[flat] * w;
        }
    }
    return out;
}

// Khatri-Rao via the columnwise Kronecker definition, two explicit loops.
inline Matrix naive_khatri_rao(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols());
    for (Index c = 0; c < a.cols(); ++c)
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < b.rows(); ++j)
                out(i * b.rows() + j, c) = a(i, c) * b(j, c);
    return out;
}

// Central finite difference of a scalar functional at one coordinate.
inline double central_diff(const std::function<double(double)>& g, double x0, double h) {
    return (g(x0 + h) - g(x0 - h)) / (2.0 * h);
}

// Brute-force minimizer of 0.5*tau*(x-v)^2 + w*|x-o| on a grid; returns the
// argmin. Used to cross-check the closed-form soft threshold.
inline double grid_min_l1(double v, double offset, double weight, double tau,
                          double lo, double hi, double step) {
    double best_x = lo, best_val = 1e300;
    for (double x = lo; x <= hi + 0.5 * step; x += step) {
        const double val = 0.5 * tau * (x - v) * (x - v) + weight * std::abs(x - offset);
        if (val < best_val) {
            best_val = val;
            best_x = x;
        }
    }
    return best_x;
}

}  // namespace oracles
