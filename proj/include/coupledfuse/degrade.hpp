#pragma once

#include "coupledfuse/tensor.hpp"

namespace cfuse {

struct DegradationSpec {
    /// Odd width of the 1-D Gaussian blur kernel.
    int blur_kernel_size = 9;
    double blur_sigma = 4.0;
    /// Keep every stride-th sample after blurring.
    int downsample_stride = 4;
    /// Spectral response Pm (bands_out x bands_in, rows summing to 1).
    /// Must be set before degrade_sri; pm_band_aggregation builds a default.
    Matrix spectral_response;

    void validate() const;
};

/// Combined blur-then-downsample operator for one spatial dimension:
/// ceil(dim/stride) x dim, each row a border-truncated, renormalized
/// Gaussian centered on the kept sample, so rows sum to 1.
Matrix blur_downsample_operator(Index dim, const DegradationSpec& spec);

/// Simple synthetic spectral response: bands_out rows averaging contiguous,
/// near-equal blocks of the bands_in input bands; rows sum to 1 and every
/// input band belongs to exactly one row.
Matrix pm_band_aggregation(Index bands_in, Index bands_out);

struct DegradeResult {
    DenseTensor hsi;  ///< spatially degraded: sri x1 P1 x2 P2
    DenseTensor msi;  ///< spectrally degraded: sri x3 Pm
    Matrix p1, p2;
};

/// Degrade a super-resolution image (order-3, bands along mode 3) into the
/// coupled observation pair.
DegradeResult degrade_sri(const DenseTensor& sri, const DegradationSpec& spec);

}  // namespace cfuse
