#include "coupledfuse/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfuse {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Index checked_element_count(const Shape& shape) {
    if (shape.empty()) {
        throw std::invalid_argument("DenseTensor: order must be at least 1");
    }
    Index count = 1;
    for (Index d : shape) {
        if (d < 1) {
            throw std::invalid_argument("DenseTensor: every dimension must be >= 1, got " + std::to_string(d));
        }
        count *= d;
    }
    return count;
}

void check_mode(const DenseTensor& t, Index mode, const char* what) {
    if (mode < 1 || mode > t.order()) {
        throw std::invalid_argument(std::string(what) + ": mode " + std::to_string(mode) +
                                    " out of range for order-" + std::to_string(t.order()) + " tensor");
    }
}

void check_factors_match(const DenseTensor& t, const KruskalFactors& f, const char* what) {
    f.validate();
    if (f.order() != t.order()) {
        throw std::invalid_argument(std::string(what) + ": factor count " + std::to_string(f.order()) +
                                    " does not match tensor order " + std::to_string(t.order()));
    }
    for (Index n = 0; n < t.order(); ++n) {
        if (f.factors[static_cast<std::size_t>(n)].rows() != t.shape()[static_cast<std::size_t>(n)]) {
            throw std::invalid_argument(std::string(what) + ": factor " + std::to_string(n + 1) + " has " +
                                        std::to_string(f.factors[static_cast<std::size_t>(n)].rows()) +
                                        " rows, tensor dimension is " +
                                        std::to_string(t.shape()[static_cast<std::size_t>(n)]));
        }
    }
}

}  // namespace

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(checked_element_count(shape_)), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    const Index expected = checked_element_count(shape_);
    if (expected != static_cast<Index>(values_.size())) {
        throw std::invalid_argument("DenseTensor: shape wants " + std::to_string(expected) + " values, got " +
                                    std::to_string(values_.size()));
    }
}

Index DenseTensor::dim(Index mode) const {
    check_mode(*this, mode, "DenseTensor::dim");
    return shape_[static_cast<std::size_t>(mode - 1)];
}

Index DenseTensor::offset(const std::vector<Index>& idx) const {
    if (static_cast<Index>(idx.size()) != order()) {
        throw std::invalid_argument("DenseTensor::offset: index count does not match order");
    }
    Index lin = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= shape_[k]) {
            throw std::out_of_range("DenseTensor::offset: index " + std::to_string(idx[k]) + " out of range for mode " +
                                    std::to_string(k + 1));
        }
        lin = lin * shape_[k] + idx[k];
    }
    return lin;
}

KruskalFactors::KruskalFactors(std::vector<Matrix> fs) : factors(std::move(fs)) {
    rank = factors.empty() ? 0 : static_cast<Index>(factors.front().cols());
    validate();
}

void KruskalFactors::validate() const {
    for (const Matrix& f : factors) {
        if (f.cols() != rank) {
            throw std::invalid_argument("KruskalFactors: factor has " + std::to_string(f.cols()) +
                                        " columns, expected rank " + std::to_string(rank));
        }
    }
}

double frobenius_norm(const DenseTensor& t) {
    double acc = 0.0;
    for (double v : t.values()) acc += v * v;
    return std::sqrt(acc);
}

double frobenius_dist_sq(const DenseTensor& a, const DenseTensor& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("frobenius_dist_sq: shapes differ");
    }
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (Index i = 0; i < a.size(); ++i) {
        const double d = pa[i] - pb[i];
        acc += d * d;
    }
    return acc;
}

Matrix unfold(const DenseTensor& t, Index mode) {
    check_mode(t, mode, "unfold");
    const Index n = mode - 1;
    const Shape& shape = t.shape();
    const Index order = t.order();

    // Column stride of mode k (k != n): product of the earlier non-n extents,
    // so the first non-n index varies fastest along a row.
    std::vector<Index> stride(static_cast<std::size_t>(order), 0);
    Index cols = 1;
    for (Index k = 0; k < order; ++k) {
        if (k == n) continue;
        stride[static_cast<std::size_t>(k)] = cols;
        cols *= shape[static_cast<std::size_t>(k)];
    }

    Matrix out(shape[static_cast<std::size_t>(n)], cols);
    std::vector<Index> idx(static_cast<std::size_t>(order), 0);
    const double* v = t.data();
    for (Index lin = 0; lin < t.size(); ++lin) {
        Index col = 0;
        for (Index k = 0; k < order; ++k) {
            if (k == n) continue;
            col += idx[static_cast<std::size_t>(k)] * stride[static_cast<std::size_t>(k)];
        }
        out(idx[static_cast<std::size_t>(n)], col) = v[lin];
        for (Index k = order - 1; k >= 0; --k) {
            if (++idx[static_cast<std::size_t>(k)] < shape[static_cast<std::size_t>(k)]) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
    }
    return out;
}

DenseTensor fold(const Matrix& m, Index mode, const Shape& shape) {
    DenseTensor out(shape);
    check_mode(out, mode, "fold");
    const Index n = mode - 1;
    const Index order = out.order();

    std::vector<Index> stride(static_cast<std::size_t>(order), 0);
    Index cols = 1;
    for (Index k = 0; k < order; ++k) {
        if (k == n) continue;
        stride[static_cast<std::size_t>(k)] = cols;
        cols *= shape[static_cast<std::size_t>(k)];
    }
    if (m.rows() != shape[static_cast<std::size_t>(n)] || m.cols() != cols) {
        throw std::invalid_argument("fold: matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                    ", expected " + std::to_string(shape[static_cast<std::size_t>(n)]) + "x" +
                                    std::to_string(cols));
    }

    std::vector<Index> idx(static_cast<std::size_t>(order), 0);
    double* v = out.data();
    for (Index lin = 0; lin < out.size(); ++lin) {
        Index col = 0;
        for (Index k = 0; k < order; ++k) {
            if (k == n) continue;
            col += idx[static_cast<std::size_t>(k)] * stride[static_cast<std::size_t>(k)];
        }
        v[lin] = m(idx[static_cast<std::size_t>(n)], col);
        for (Index k = order - 1; k >= 0; --k) {
            if (++idx[static_cast<std::size_t>(k)] < shape[static_cast<std::size_t>(k)]) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
    }
    return out;
}

Matrix khatri_rao(const std::vector<Matrix>& ms) {
    if (ms.empty()) {
        throw std::invalid_argument("khatri_rao: need at least one matrix");
    }
    const Index r = ms.front().cols();
    Index rows = 1;
    for (const Matrix& m : ms) {
        if (m.cols() != r) {
            throw std::invalid_argument("khatri_rao: column counts differ");
        }
        rows *= m.rows();
    }
    Matrix out(rows, r);
    for (Index c = 0; c < r; ++c) {
        Eigen::VectorXd acc = Eigen::VectorXd::Ones(1);
        for (const Matrix& m : ms) {
            Eigen::VectorXd next(acc.size() * m.rows());
            for (Index i = 0; i < acc.size(); ++i) {
                next.segment(i * m.rows(), m.rows()) = acc(i) * m.col(c);
            }
            acc = std::move(next);
        }
        out.col(c) = acc;
    }
    return out;
}

Matrix gram_hadamard_others(const KruskalFactors& f, Index mode) {
    f.validate();
    if (mode < 1 || mode > f.order()) {
        throw std::invalid_argument("gram_hadamard_others: mode out of range");
    }
    Matrix g = Matrix::Ones(f.rank, f.rank);
    for (Index k = 0; k < f.order(); ++k) {
        if (k == mode - 1) continue;
        const Matrix& a = f.factors[static_cast<std::size_t>(k)];
        g = g.cwiseProduct(Matrix(a.transpose() * a));
    }
    return g;
}

DenseTensor kruskal_reconstruct(const KruskalFactors& f) {
    f.validate();
    if (f.order() < 1) {
        throw std::invalid_argument("kruskal_reconstruct: need at least one factor");
    }
    Shape shape(static_cast<std::size_t>(f.order()));
    for (Index n = 0; n < f.order(); ++n) {
        shape[static_cast<std::size_t>(n)] = f.factors[static_cast<std::size_t>(n)].rows();
    }
    DenseTensor out(shape);
    const Index r = f.rank;
    if (r == 0) return out;

    if (f.order() == 3) {
        // One GEMM: the I x (J*K) row-major flattening equals A1 (KR of the
        // trailing factors, first slowest)^T.
        const Matrix kr = khatri_rao({f.factors[1], f.factors[2]});
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> flat(
            out.data(), shape[0], shape[1] * shape[2]);
        flat = f.factors[0] * kr.transpose();
        return out;
    }

    const Index order = f.order();
    const Index inner = shape.back();
    const Index outer = out.size() / inner;
    const Matrix& last = f.factors.back();
    std::vector<Index> idx(static_cast<std::size_t>(order - 1), 0);
    std::vector<double> base(static_cast<std::size_t>(r));
    double* v = out.data();
    Index lin = 0;
    for (Index o = 0; o < outer; ++o) {
        for (Index c = 0; c < r; ++c) {
            double p = 1.0;
            for (Index k = 0; k + 1 < order; ++k) {
                p *= f.factors[static_cast<std::size_t>(k)](idx[static_cast<std::size_t>(k)], c);
            }
            base[static_cast<std::size_t>(c)] = p;
        }
        for (Index i = 0; i < inner; ++i, ++lin) {
            double s = 0.0;
            for (Index c = 0; c < r; ++c) {
                s += base[static_cast<std::size_t>(c)] * last(i, c);
            }
            v[lin] = s;
        }
        for (Index k = order - 2; k >= 0; --k) {
            if (++idx[static_cast<std::size_t>(k)] < shape[static_cast<std::size_t>(k)]) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
    }
    return out;
}

Matrix mttkrp(const DenseTensor& t, const KruskalFactors& f, Index mode) {
    check_mode(t, mode, "mttkrp");
    check_factors_match(t, f, "mttkrp");
    const Index n = mode - 1;
    const Index r = f.rank;
    const Shape& shape = t.shape();
    Matrix out = Matrix::Zero(shape[static_cast<std::size_t>(n)], r);
    if (r == 0) return out;

    if (t.order() == 3) {
        // GEMM-backed paths through the row-major flattenings.
        const Index di = shape[0], dj = shape[1], dk = shape[2];
        const Matrix& a = f.factors[0];
        const Matrix& b = f.factors[1];
        const Matrix& c = f.factors[2];
        if (n == 0) {
            const RowMajorMap flat(t.data(), di, dj * dk);  // column (j,k), k fastest
            out.noalias() = flat * khatri_rao({b, c});
        } else if (n == 2) {
            const RowMajorMap flat(t.data(), di * dj, dk);  // row (i,j), j fastest
            out.noalias() = flat.transpose() * khatri_rao({a, b});
        } else {
            // out(j, :) = sum_i a(i, :) .* (slice_i * c), slice_i = t(i, :, :).
            for (Index i = 0; i < di; ++i) {
                const RowMajorMap slice(t.data() + i * dj * dk, dj, dk);
                out.noalias() += (slice * c).cwiseProduct(a.row(i).replicate(dj, 1));
            }
        }
        return out;
    }

    const Index order = t.order();
    const Index inner = shape.back();
    const Index outer = t.size() / inner;
    const Matrix& last = f.factors.back();
    std::vector<Index> idx(static_cast<std::size_t>(order - 1), 0);
    std::vector<double> base(static_cast<std::size_t>(r));
    const double* v = t.data();
    Index lin = 0;
    for (Index o = 0; o < outer; ++o) {
        for (Index c = 0; c < r; ++c) {
            double p = 1.0;
            for (Index k = 0; k + 1 < order; ++k) {
                if (k == n) continue;
                p *= f.factors[static_cast<std::size_t>(k)](idx[static_cast<std::size_t>(k)], c);
            }
            base[static_cast<std::size_t>(c)] = p;
        }
        if (n == order - 1) {
            for (Index i = 0; i < inner; ++i, ++lin) {
                const double tv = v[lin];
                for (Index c = 0; c < r; ++c) {
                    out(i, c) += tv * base[static_cast<std::size_t>(c)];
                }
            }
        } else {
            const Index row = idx[static_cast<std::size_t>(n)];
            for (Index i = 0; i < inner; ++i, ++lin) {
                const double tv = v[lin];
                for (Index c = 0; c < r; ++c) {
                    out(row, c) += tv * base[static_cast<std::size_t>(c)] * last(i, c);
                }
            }
        }
        for (Index k = order - 2; k >= 0; --k) {
            if (++idx[static_cast<std::size_t>(k)] < shape[static_cast<std::size_t>(k)]) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
    }
    return out;
}

DenseTensor mode_product(const DenseTensor& t, const Matrix& m, Index mode) {
    check_mode(t, mode, "mode_product");
    if (m.cols() != t.dim(mode)) {
        throw std::invalid_argument("mode_product: matrix has " + std::to_string(m.cols()) +
                                    " columns, tensor mode extent is " + std::to_string(t.dim(mode)));
    }
    const Matrix res = m * unfold(t, mode);
    Shape shape = t.shape();
    shape[static_cast<std::size_t>(mode - 1)] = m.rows();
    return fold(res, mode, shape);
}

Matrix tensor_to_matrix(const DenseTensor& t) {
    if (t.order() != 2) {
        throw std::invalid_argument("tensor_to_matrix: tensor order is " + std::to_string(t.order()) + ", expected 2");
    }
    Matrix out(t.dim(1), t.dim(2));
    const double* v = t.data();
    for (Index i = 0; i < out.rows(); ++i) {
        for (Index j = 0; j < out.cols(); ++j) {
            out(i, j) = v[i * out.cols() + j];
        }
    }
    return out;
}

DenseTensor matrix_to_tensor(const Matrix& m) {
    DenseTensor out(Shape{m.rows(), m.cols()});
    double* v = out.data();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            v[i * m.cols() + j] = m(i, j);
        }
    }
    return out;
}

}  // namespace cfuse
