#include "coupledfuse/degrade.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfuse {

void DegradationSpec::validate() const {
    if (blur_kernel_size < 1 || blur_kernel_size % 2 == 0) {
        throw std::invalid_argument("DegradationSpec: blur_kernel_size must be odd and >= 1");
    }
    if (!(blur_sigma > 0.0)) {
        throw std::invalid_argument("DegradationSpec: blur_sigma must be positive");
    }
    if (downsample_stride < 1) {
        throw std::invalid_argument("DegradationSpec: downsample_stride must be >= 1");
    }
}

Matrix blur_downsample_operator(Index dim, const DegradationSpec& spec) {
    spec.validate();
    if (dim < 1) throw std::invalid_argument("blur_downsample_operator: dim must be >= 1");
    const int half = (spec.blur_kernel_size - 1) / 2;
    const Index stride = spec.downsample_stride;
    const Index out_rows = (dim + stride - 1) / stride;

    Matrix out = Matrix::Zero(out_rows, dim);
    for (Index r = 0; r < out_rows; ++r) {
        const Index center = r * stride;
        double sum = 0.0;
        for (int t = -half; t <= half; ++t) {
            const Index j = center + t;
            if (j < 0 || j >= dim) continue;  // truncate at the borders
            const double w = std::exp(-0.5 * (static_cast<double>(t) / spec.blur_sigma) *
                                      (static_cast<double>(t) / spec.blur_sigma));
            out(r, j) = w;
            sum += w;
        }
        out.row(r) /= sum;  // renormalize so each row sums to 1
    }
    return out;
}

Matrix pm_band_aggregation(Index bands_in, Index bands_out) {
    if (bands_in < 1 || bands_out < 1) {
        throw std::invalid_argument("pm_band_aggregation: band counts must be >= 1");
    }
    if (bands_out > bands_in) {
        throw std::invalid_argument("pm_band_aggregation: cannot aggregate " + std::to_string(bands_in) +
                                    " bands into " + std::to_string(bands_out));
    }
    Matrix out = Matrix::Zero(bands_out, bands_in);
    for (Index r = 0; r < bands_out; ++r) {
        const Index lo = r * bands_in / bands_out;
        const Index hi = (r + 1) * bands_in / bands_out;
        for (Index j = lo; j < hi; ++j) {
            out(r, j) = 1.0 / static_cast<double>(hi - lo);
        }
    }
    return out;
}

DegradeResult degrade_sri(const DenseTensor& sri, const DegradationSpec& spec) {
    spec.validate();
    if (sri.order() != 3) {
        throw std::invalid_argument("degrade_sri: input must be a third-order tensor");
    }
    if (spec.spectral_response.size() == 0) {
        throw std::invalid_argument("degrade_sri: spectral_response is not set");
    }
    if (spec.spectral_response.cols() != sri.dim(3)) {
        throw std::invalid_argument("degrade_sri: spectral_response has " +
                                    std::to_string(spec.spectral_response.cols()) + " columns, input has " +
                                    std::to_string(sri.dim(3)) + " bands");
    }

    DegradeResult out;
    out.p1 = blur_downsample_operator(sri.dim(1), spec);
    out.p2 = blur_downsample_operator(sri.dim(2), spec);
    out.hsi = mode_product(mode_product(sri, out.p1, 1), out.p2, 2);
    out.msi = mode_product(sri, spec.spectral_response, 3);
    return out;
}

}  // namespace cfuse
