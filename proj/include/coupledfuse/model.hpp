#pragma once

#include "coupledfuse/prox.hpp"
#include "coupledfuse/tensor.hpp"

#include <variant>

namespace cfuse {

/// Sparse coupling mu * ||vec(A_{a_block} - B_{b_block})||_1 between one
/// factor of each side (1-based block indices).
struct LaplacianCoupling {
    double mu = 0.0;
    int a_block = 3;
    int b_block = 1;
};

/// Smooth quadratic coupling
///   w1 * (||A1 - P1 B1||^2 + ||A2 - P2 B2||^2 + ||B3 - Pm A3||^2)
/// + w2 * (||B1||^2 + ||B2||^2 + ||A3||^2),
/// the image-fusion layout: the A tensor is spatially degraded (P1, P2 act
/// on B's spatial factors), the B tensor spectrally degraded (Pm acts on A3).
struct JointGaussCoupling {
    double w1 = 0.0;
    double w2 = 0.0;
    Matrix p1, p2, pm;
};

using Coupling = std::variant<LaplacianCoupling, JointGaussCoupling>;

/// Identifies one factor block: side A or B, 1-based factor index.
struct BlockId {
    enum class Side { A, B };
    Side side = Side::A;
    int index = 1;
};

/// Two third-order data tensors, each fit by a CP model, joined by a
/// coupling term:
///   J(A, B) = 1/2 ||Y - [[A]]||^2 + lambda/2 ||Y' - [[B]]||^2 + H(A, B).
struct CoupledProblem {
    DenseTensor y;
    DenseTensor y_prime;
    Index rank_a = 0;
    Index rank_b = 0;
    Coupling coupling;
    double lambda = 1.0;

    /// Throws std::invalid_argument when tensors are not order 3, ranks are
    /// negative or unequal where the coupling requires it, or coupling
    /// operator shapes disagree with the tensor dimensions.
    void validate() const;
};

constexpr double kBlockLipschitzFloor = 1e-12;

/// 1/2 ||T - [[F]]||_F^2, computed through factor Grams and one MTTKRP
/// rather than a dense reconstruction.
double cp_fit_value(const DenseTensor& t, const KruskalFactors& f);

/// Gradient of cp_fit_value with respect to factor `mode` (1-based):
/// A_n (hadamard of other Grams) - mttkrp(T, F, n).
Matrix cp_fit_gradient_block(const DenseTensor& t, const KruskalFactors& f, Index mode);

/// Local Lipschitz surrogate for the block gradient at the current factors:
/// ||KR of the other factors||_F^2 = trace of the Hadamard Gram product,
/// floored at kBlockLipschitzFloor so stepsizes stay positive.
double block_lipschitz_estimate(const KruskalFactors& f, Index mode);

/// Coupling term H(A, B).
double coupling_value(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b);

/// Full objective J(A, B).
double objective_value(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b);

/// Everything a blockwise prox-gradient step needs at the given point: the
/// gradient of the smooth fit part (lambda-scaled on side B) and the
/// coupling's contribution to this block as a ProxFunction, with all other
/// blocks frozen at (a, b).
struct BlockPartials {
    Matrix smooth_gradient;
    ProxFunction prox;
};

BlockPartials block_partials(const CoupledProblem& p, BlockId blk, const KruskalFactors& a, const KruskalFactors& b);

/// Just the coupling piece of block_partials. The prox data of a block only
/// involves factors of the opposite side, so callers may pass a partially
/// updated same-side factor set.
ProxFunction block_prox(const CoupledProblem& p, BlockId blk, const KruskalFactors& a, const KruskalFactors& b);

}  // namespace cfuse
