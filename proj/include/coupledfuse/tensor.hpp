#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace cfuse {

using Matrix = Eigen::MatrixXd;
using Index = std::int64_t;
using Shape = std::vector<Index>;

/// Dense real tensor of arbitrary order, stored row-major: the last index
/// varies fastest in memory. For shape (I1, ..., IN) the entry (i1, ..., iN)
/// (0-based) lives at linear offset ((i1*I2 + i2)*I3 + i3)*... + iN.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<double> values);

    Index order() const { return static_cast<Index>(shape_.size()); }
    const Shape& shape() const { return shape_; }
    /// Extent of 1-based mode n.
    Index dim(Index mode) const;
    Index size() const { return static_cast<Index>(values_.size()); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double operator[](Index linear) const { return values_[static_cast<std::size_t>(linear)]; }
    double& operator[](Index linear) { return values_[static_cast<std::size_t>(linear)]; }

    /// Multi-index access, 0-based indices.
    double at(const std::vector<Index>& idx) const { return values_[static_cast<std::size_t>(offset(idx))]; }
    double& at(const std::vector<Index>& idx) { return values_[static_cast<std::size_t>(offset(idx))]; }
    Index offset(const std::vector<Index>& idx) const;

private:
    Shape shape_;
    std::vector<double> values_;
};

/// CP factor set: factors[n] is an I_{n+1} x rank matrix. All factors share
/// the same column count.
struct KruskalFactors {
    std::vector<Matrix> factors;
    Index rank = 0;

    KruskalFactors() = default;
    explicit KruskalFactors(std::vector<Matrix> fs);

    Index order() const { return static_cast<Index>(factors.size()); }
    /// Throws std::invalid_argument when column counts disagree.
    void validate() const;
};

double frobenius_norm(const DenseTensor& t);

/// Squared Frobenius distance between two same-shape tensors.
double frobenius_dist_sq(const DenseTensor& a, const DenseTensor& b);

/// Mode-n unfolding (1-based mode). Row i_n of the result collects every
/// entry with n-th index i_n; the remaining indices are flattened so that the
/// first non-n mode varies fastest:
///   column = i_1' + I_1'*(i_2' + I_2'*(...)), primes skipping mode n.
Matrix unfold(const DenseTensor& t, Index mode);

/// Inverse of unfold: refold an unfolded matrix back to `shape`.
DenseTensor fold(const Matrix& m, Index mode, const Shape& shape);

/// Column-wise Khatri-Rao product of the given matrices: column c of the
/// result is the Kronecker product of column c of each input, with the first
/// matrix varying slowest. All inputs must share a column count.
Matrix khatri_rao(const std::vector<Matrix>& ms);

/// Hadamard product over all k != mode (1-based) of the factor Gram matrices
/// A_k^T A_k. This equals H^T H where H is the Khatri-Rao product of the
/// other factors, without materializing H.
Matrix gram_hadamard_others(const KruskalFactors& f, Index mode);

/// Dense tensor from a CP factor set; the shape comes from the factor row
/// counts. Rank 0 yields the zero tensor.
DenseTensor kruskal_reconstruct(const KruskalFactors& f);

/// Matricized-tensor-times-Khatri-Rao-product for 1-based `mode`:
/// T_(n) * (A_N o ... o A_1 skipping A_n), computed entrywise without
/// forming the unfolding or the Khatri-Rao matrix.
Matrix mttkrp(const DenseTensor& t, const KruskalFactors& f, Index mode);

/// Mode-n product T x_n M: contracts mode n (1-based) of `t` with the rows
/// of `m`; m must have as many columns as dim n. The result's mode-n extent
/// is m.rows().
DenseTensor mode_product(const DenseTensor& t, const Matrix& m, Index mode);

/// Order-2 tensor <-> matrix conversions (copying).
Matrix tensor_to_matrix(const DenseTensor& t);
DenseTensor matrix_to_tensor(const Matrix& m);

}  // namespace cfuse
