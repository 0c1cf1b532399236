#pragma once

#include "coupledfuse/model.hpp"

namespace cfuse {

/// Mean relative squared data-fit error over the two tensors:
///   1/2 (||Y - [[A]]||^2 / ||Y||^2 + ||Y' - [[B]]||^2 / ||Y'||^2).
double metric_relerr(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b);

/// Greedy column matching between estimated and reference factors: columns
/// are scored by the product over modes of absolute normalized inner
/// products, largest score assigned first (ties keep the smallest indices).
/// Returns perm with perm[t] = estimated column matched to truth column t.
std::vector<Index> align_columns(const KruskalFactors& est, const KruskalFactors& truth);

/// Factor match score of one factor set against a reference, after greedy
/// alignment: (1/r) sum_t prod_n <truth_n(:,t), est_n(:,perm[t])> /
/// (||truth_n(:,t)|| ||est_n(:,perm[t])||), inner products kept signed.
/// 1 means every column pair is parallel with consistent signs.
double fms_side(const KruskalFactors& est, const KruskalFactors& truth);

/// Two-sided factor match score: mean of fms_side over the A and B sets.
double metric_fms(const KruskalFactors& est_a, const KruskalFactors& est_b, const KruskalFactors& truth_a,
                  const KruskalFactors& truth_b);

/// Image-stack comparison metrics for order-3 tensors (bands along mode 3).
struct HsrMetrics {
    double rsnr = 0.0;  ///< 10 log10(||truth||^2 / ||truth - est||^2), capped at 300 dB
    double ssim = 0.0;  ///< mean SSIM over bands, uniform 8x8 windows
    double cc = 0.0;    ///< mean Pearson correlation over bands
    double rmse = 0.0;  ///< ||truth - est||_F / sqrt(#entries)
    double sam = 0.0;   ///< mean spectral angle (radians) over pixels
};

HsrMetrics metric_hsr(const DenseTensor& est, const DenseTensor& truth);

}  // namespace cfuse
