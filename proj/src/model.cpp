#include "coupledfuse/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cfuse {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

const Matrix& factor(const KruskalFactors& f, int index, const char* side) {
    if (index < 1 || index > static_cast<int>(f.order())) {
        throw std::invalid_argument(std::string("block index ") + std::to_string(index) + " out of range for side " +
                                    side);
    }
    return f.factors[static_cast<std::size_t>(index - 1)];
}

}  // namespace

void CoupledProblem::validate() const {
    require(y.order() == 3, "CoupledProblem: y must be a third-order tensor");
    require(y_prime.order() == 3, "CoupledProblem: y_prime must be a third-order tensor");
    require(rank_a >= 0 && rank_b >= 0, "CoupledProblem: ranks must be nonnegative");
    require(lambda > 0.0, "CoupledProblem: lambda must be positive");
    if (const auto* lap = std::get_if<LaplacianCoupling>(&coupling)) {
        require(lap->mu >= 0.0, "CoupledProblem: coupling mu must be nonnegative");
        require(lap->a_block >= 1 && lap->a_block <= 3, "CoupledProblem: coupled A block out of range");
        require(lap->b_block >= 1 && lap->b_block <= 3, "CoupledProblem: coupled B block out of range");
        require(rank_a == rank_b, "CoupledProblem: laplacian coupling needs equal ranks");
        require(y.dim(lap->a_block) == y_prime.dim(lap->b_block),
                "CoupledProblem: coupled factors have different row counts");
    } else {
        const auto& jg = std::get<JointGaussCoupling>(coupling);
        require(jg.w1 >= 0.0 && jg.w2 >= 0.0, "CoupledProblem: coupling weights must be nonnegative");
        require(rank_a == rank_b, "CoupledProblem: joint-Gauss coupling needs equal ranks");
        require(jg.p1.rows() == y.dim(1) && jg.p1.cols() == y_prime.dim(1),
                "CoupledProblem: P1 must map y_prime dim 1 to y dim 1");
        require(jg.p2.rows() == y.dim(2) && jg.p2.cols() == y_prime.dim(2),
                "CoupledProblem: P2 must map y_prime dim 2 to y dim 2");
        require(jg.pm.rows() == y_prime.dim(3) && jg.pm.cols() == y.dim(3),
                "CoupledProblem: Pm must map y dim 3 to y_prime dim 3");
    }
}

double cp_fit_value(const DenseTensor& t, const KruskalFactors& f) {
    // 1/2 ||T - [[F]]||^2 = 1/2 (||T||^2 - 2 <T, [[F]]> + ||[[F]]||^2);
    // the cross term comes from one MTTKRP, the model norm from Grams.
    const Matrix m = mttkrp(t, f, 1);
    double norm_sq = 0.0;
    for (double v : t.values()) norm_sq += v * v;
    const Matrix& a1 = f.factors.front();
    const double cross = m.cwiseProduct(a1).sum();
    const Matrix gram = a1.transpose() * a1;
    const double model_sq = gram.cwiseProduct(gram_hadamard_others(f, 1)).sum();
    // Clamp the roundoff-negative exact-fit case, but let NaN through so
    // non-finite data or iterates surface as divergence, not as a zero fit.
    const double dist_sq = norm_sq - 2.0 * cross + model_sq;
    return dist_sq < 0.0 ? 0.0 : 0.5 * dist_sq;
}

Matrix cp_fit_gradient_block(const DenseTensor& t, const KruskalFactors& f, Index mode) {
    const Matrix m = mttkrp(t, f, mode);
    return factor(f, static_cast<int>(mode), "gradient") * gram_hadamard_others(f, mode) - m;
}

double block_lipschitz_estimate(const KruskalFactors& f, Index mode) {
    return std::max(gram_hadamard_others(f, mode).trace(), kBlockLipschitzFloor);
}

double coupling_value(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b) {
    if (const auto* lap = std::get_if<LaplacianCoupling>(&p.coupling)) {
        const Matrix& fa = factor(a, lap->a_block, "A");
        const Matrix& fb = factor(b, lap->b_block, "B");
        require(fa.rows() == fb.rows() && fa.cols() == fb.cols(), "coupling_value: coupled factor shapes differ");
        return lap->mu * (fa - fb).cwiseAbs().sum();
    }
    const auto& jg = std::get<JointGaussCoupling>(p.coupling);
    const Matrix& a1 = factor(a, 1, "A");
    const Matrix& a2 = factor(a, 2, "A");
    const Matrix& a3 = factor(a, 3, "A");
    const Matrix& b1 = factor(b, 1, "B");
    const Matrix& b2 = factor(b, 2, "B");
    const Matrix& b3 = factor(b, 3, "B");
    require(jg.p1.cols() == b1.rows() && jg.p1.rows() == a1.rows(), "coupling_value: P1 shape mismatch");
    require(jg.p2.cols() == b2.rows() && jg.p2.rows() == a2.rows(), "coupling_value: P2 shape mismatch");
    require(jg.pm.cols() == a3.rows() && jg.pm.rows() == b3.rows(), "coupling_value: Pm shape mismatch");
    require(a.rank == b.rank, "coupling_value: ranks differ");
    const double fit = (a1 - jg.p1 * b1).squaredNorm() + (a2 - jg.p2 * b2).squaredNorm() +
                       (b3 - jg.pm * a3).squaredNorm();
    const double ridge = b1.squaredNorm() + b2.squaredNorm() + a3.squaredNorm();
    return jg.w1 * fit + jg.w2 * ridge;
}

double objective_value(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b) {
    return cp_fit_value(p.y, a) + p.lambda * cp_fit_value(p.y_prime, b) + coupling_value(p, a, b);
}

BlockPartials block_partials(const CoupledProblem& p, BlockId blk, const KruskalFactors& a, const KruskalFactors& b) {
    BlockPartials out;
    if (blk.side == BlockId::Side::A) {
        out.smooth_gradient = cp_fit_gradient_block(p.y, a, blk.index);
    } else {
        out.smooth_gradient = p.lambda * cp_fit_gradient_block(p.y_prime, b, blk.index);
    }
    out.prox = block_prox(p, blk, a, b);
    return out;
}

ProxFunction block_prox(const CoupledProblem& p, BlockId blk, const KruskalFactors& a, const KruskalFactors& b) {
    const bool side_a = blk.side == BlockId::Side::A;
    if (const auto* lap = std::get_if<LaplacianCoupling>(&p.coupling)) {
        const bool coupled = side_a ? blk.index == lap->a_block : blk.index == lap->b_block;
        if (!coupled) {
            return ProxFunction::zero();
        }
        const Matrix& other = side_a ? factor(b, lap->b_block, "B") : factor(a, lap->a_block, "A");
        return ProxFunction::l1_offset(other, lap->mu);
    }

    const auto& jg = std::get<JointGaussCoupling>(p.coupling);
    const Index rank = side_a ? a.rank : b.rank;
    const Index rows = side_a ? p.y.dim(blk.index) : p.y_prime.dim(blk.index);
    const Matrix eye = Matrix::Identity(rows, rows);
    const Matrix zero_target = Matrix::Zero(rows, rank);
    std::vector<QuadraticTerm> terms;
    if (side_a) {
        switch (blk.index) {
            case 1: terms.push_back({jg.w1, eye, jg.p1 * factor(b, 1, "B")}); break;
            case 2: terms.push_back({jg.w1, eye, jg.p2 * factor(b, 2, "B")}); break;
            case 3:
                terms.push_back({jg.w1, jg.pm, factor(b, 3, "B")});
                terms.push_back({jg.w2, eye, zero_target});
                break;
            default: throw std::invalid_argument("block_prox: block index out of range");
        }
    } else {
        switch (blk.index) {
            case 1:
                terms.push_back({jg.w1, jg.p1, factor(a, 1, "A")});
                terms.push_back({jg.w2, eye, zero_target});
                break;
            case 2:
                terms.push_back({jg.w1, jg.p2, factor(a, 2, "A")});
                terms.push_back({jg.w2, eye, zero_target});
                break;
            case 3: terms.push_back({jg.w1, eye, jg.pm * factor(a, 3, "A")}); break;
            default: throw std::invalid_argument("block_prox: block index out of range");
        }
    }
    return ProxFunction::quadratic(std::move(terms));
}

}  // namespace cfuse
