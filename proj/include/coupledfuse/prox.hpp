#pragma once

#include "coupledfuse/tensor.hpp"

#include <vector>

namespace cfuse {

/// One quadratic penalty weight * ||coeff * X - target||_F^2 attached to a
/// block variable X.
struct QuadraticTerm {
    double weight = 0.0;
    Matrix coeff;
    Matrix target;
};

/// Nonsmooth-plus-quadratic piece a single block contributes to the coupling
/// term, in prox-friendly form.
struct ProxFunction {
    enum class Kind { Zero, L1Offset, Quadratic };

    Kind kind = Kind::Zero;
    // L1Offset: weight * ||vec(X - offset)||_1
    Matrix offset;
    double weight = 0.0;
    // Quadratic: sum of terms
    std::vector<QuadraticTerm> terms;

    static ProxFunction zero();
    static ProxFunction l1_offset(Matrix offset, double weight);
    static ProxFunction quadratic(std::vector<QuadraticTerm> terms);
};

/// Value of the function described by `p` at X.
double prox_value(const ProxFunction& p, const Matrix& x);

/// Elementwise soft threshold toward an offset: the unique minimizer of
/// t*||x - b||_1 + (1/2)(x - v)^2, i.e.
///   v + t  if v < b - t,   b  if |v - b| <= t,   v - t  otherwise.
Matrix prox_l1_offset(const Matrix& v, const Matrix& b, double t);

/// Minimizer of sum_i w_i ||C_i X - D_i||_F^2 + (tau/2)||X - V||_F^2,
/// solved column-by-column shared: (tau I + sum 2 w_i C_i^T C_i) X =
/// tau V + sum 2 w_i C_i^T D_i via LDLT.
Matrix prox_quadratic_block(const Matrix& v, const std::vector<QuadraticTerm>& terms, double tau);

/// argmin_x p(x) + (tau/2)||x - v||_F^2 for any ProxFunction kind.
Matrix prox_apply(const ProxFunction& p, const Matrix& v, double tau);

}  // namespace cfuse
