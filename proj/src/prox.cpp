#include "coupledfuse/prox.hpp"

#include "coupledfuse/log.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfuse {

ProxFunction ProxFunction::zero() { return ProxFunction{}; }

ProxFunction ProxFunction::l1_offset(Matrix offset, double weight) {
    if (weight < 0.0) {
        throw std::invalid_argument("ProxFunction::l1_offset: weight must be nonnegative");
    }
    ProxFunction p;
    p.kind = Kind::L1Offset;
    p.offset = std::move(offset);
    p.weight = weight;
    return p;
}

ProxFunction ProxFunction::quadratic(std::vector<QuadraticTerm> terms) {
    for (const QuadraticTerm& t : terms) {
        if (t.weight < 0.0) {
            throw std::invalid_argument("ProxFunction::quadratic: weights must be nonnegative");
        }
        if (t.coeff.rows() != t.target.rows()) {
            throw std::invalid_argument("ProxFunction::quadratic: coeff and target row counts differ");
        }
    }
    ProxFunction p;
    p.kind = Kind::Quadratic;
    p.terms = std::move(terms);
    return p;
}

double prox_value(const ProxFunction& p, const Matrix& x) {
    switch (p.kind) {
        case ProxFunction::Kind::Zero:
            return 0.0;
        case ProxFunction::Kind::L1Offset:
            return p.weight * (x - p.offset).cwiseAbs().sum();
        case ProxFunction::Kind::Quadratic: {
            double acc = 0.0;
            for (const QuadraticTerm& t : p.terms) {
                acc += t.weight * (t.coeff * x - t.target).squaredNorm();
            }
            return acc;
        }
    }
    throw std::logic_error("prox_value: unknown kind");
}

Matrix prox_l1_offset(const Matrix& v, const Matrix& b, double t) {
    if (v.rows() != b.rows() || v.cols() != b.cols()) {
        throw std::invalid_argument("prox_l1_offset: v and b shapes differ");
    }
    if (t < 0.0) {
        throw std::invalid_argument("prox_l1_offset: threshold must be nonnegative");
    }
    Matrix out(v.rows(), v.cols());
    for (Index j = 0; j < v.cols(); ++j) {
        for (Index i = 0; i < v.rows(); ++i) {
            const double vi = v(i, j);
            const double bi = b(i, j);
            if (vi < bi - t) {
                out(i, j) = vi + t;
            } else if (vi > bi + t) {
                out(i, j) = vi - t;
            } else {
                out(i, j) = bi;
            }
        }
    }
    return out;
}

Matrix prox_quadratic_block(const Matrix& v, const std::vector<QuadraticTerm>& terms, double tau) {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("prox_quadratic_block: tau must be positive");
    }
    const Index k = v.rows();
    Matrix lhs = tau * Matrix::Identity(k, k);
    Matrix rhs = tau * v;
    for (const QuadraticTerm& t : terms) {
        if (t.coeff.cols() != k) {
            throw std::invalid_argument("prox_quadratic_block: coeff has " + std::to_string(t.coeff.cols()) +
                                        " columns, block has " + std::to_string(k) + " rows");
        }
        if (t.target.cols() != v.cols() || t.target.rows() != t.coeff.rows()) {
            throw std::invalid_argument("prox_quadratic_block: target shape mismatch");
        }
        lhs.noalias() += 2.0 * t.weight * (t.coeff.transpose() * t.coeff);
        rhs.noalias() += 2.0 * t.weight * (t.coeff.transpose() * t.target);
    }
    const Eigen::LDLT<Matrix> solver(lhs);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("prox_quadratic_block: LDLT factorization failed");
    }
    Matrix x = solver.solve(rhs);
    const double residual = (lhs * x - rhs).norm();
    const double limit = 1e-9 * (1.0 + v.norm());
    if (residual > limit) {
        log::warn("prox_quadratic_block: linear solve residual " + std::to_string(residual) + " exceeds " +
                  std::to_string(limit));
    }
    return x;
}

Matrix prox_apply(const ProxFunction& p, const Matrix& v, double tau) {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("prox_apply: tau must be positive");
    }
    switch (p.kind) {
        case ProxFunction::Kind::Zero:
            return v;
        case ProxFunction::Kind::L1Offset:
            return prox_l1_offset(v, p.offset, p.weight / tau);
        case ProxFunction::Kind::Quadratic:
            return prox_quadratic_block(v, p.terms, tau);
    }
    throw std::logic_error("prox_apply: unknown kind");
}

}  // namespace cfuse
