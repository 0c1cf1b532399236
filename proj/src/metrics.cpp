#include "coupledfuse/metrics.hpp"

#include "coupledfuse/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cfuse {

namespace {

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

void check_factor_pair(const KruskalFactors& est, const KruskalFactors& truth) {
    est.validate();
    truth.validate();
    if (est.order() != truth.order()) {
        throw std::invalid_argument("fms: factor counts differ");
    }
    if (est.rank != truth.rank || est.rank < 1) {
        throw std::invalid_argument("fms: ranks must match and be at least 1");
    }
    for (Index n = 0; n < est.order(); ++n) {
        if (est.factors[static_cast<std::size_t>(n)].rows() != truth.factors[static_cast<std::size_t>(n)].rows()) {
            throw std::invalid_argument("fms: factor " + std::to_string(n + 1) + " row counts differ");
        }
    }
}

/// Copy band k (1-based mode-3 slice) of an order-3 tensor into a matrix.
Matrix band_of(const DenseTensor& t, Index k) {
    const Index rows = t.dim(1);
    const Index cols = t.dim(2);
    const Index depth = t.dim(3);
    Matrix out(rows, cols);
    const double* v = t.data();
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            out(i, j) = v[(i * cols + j) * depth + k];
        }
    }
    return out;
}

double band_ssim(const Matrix& est, const Matrix& truth) {
    const Index rows = truth.rows();
    const Index cols = truth.cols();
    double range = truth.maxCoeff() - truth.minCoeff();
    if (range == 0.0) range = 1.0;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    const Index w = std::min<Index>(8, std::min(rows, cols));
    const double n = static_cast<double>(w * w);

    double acc = 0.0;
    Index windows = 0;
    for (Index u = 0; u + w <= rows; ++u) {
        for (Index v = 0; v + w <= cols; ++v) {
            double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (Index i = 0; i < w; ++i) {
                for (Index j = 0; j < w; ++j) {
                    const double x = truth(u + i, v + j);
                    const double y = est(u + i, v + j);
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
            const double mx = sx / n;
            const double my = sy / n;
            const double vx = sxx / n - mx * mx;
            const double vy = syy / n - my * my;
            const double cxy = sxy / n - mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    }
    return acc / static_cast<double>(windows);
}

}  // namespace

double metric_relerr(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b) {
    double ny = 0.0, nyp = 0.0;
    for (double v : p.y.values()) ny += v * v;
    for (double v : p.y_prime.values()) nyp += v * v;
    if (ny == 0.0 || nyp == 0.0) {
        throw std::invalid_argument("metric_relerr: data tensors must be nonzero");
    }
    // cp_fit_value already carries the 1/2, so this is
    // 1/2 (||Y - [[A]]||^2/||Y||^2 + ||Y' - [[B]]||^2/||Y'||^2).
    return cp_fit_value(p.y, a) / ny + cp_fit_value(p.y_prime, b) / nyp;
}

std::vector<Index> align_columns(const KruskalFactors& est, const KruskalFactors& truth) {
    check_factor_pair(est, truth);
    const Index r = truth.rank;
    Matrix score = Matrix::Ones(r, r);
    for (Index n = 0; n < truth.order(); ++n) {
        const Matrix& te = est.factors[static_cast<std::size_t>(n)];
        const Matrix& tt = truth.factors[static_cast<std::size_t>(n)];
        for (Index t = 0; t < r; ++t) {
            for (Index e = 0; e < r; ++e) {
                score(t, e) *= std::abs(cosine(tt.col(t), te.col(e)));
            }
        }
    }

    std::vector<Index> perm(static_cast<std::size_t>(r), -1);
    std::vector<bool> used_t(static_cast<std::size_t>(r), false);
    std::vector<bool> used_e(static_cast<std::size_t>(r), false);
    for (Index round = 0; round < r; ++round) {
        Index bt = -1, be = -1;
        double best = -1.0;
        for (Index t = 0; t < r; ++t) {
            if (used_t[static_cast<std::size_t>(t)]) continue;
            for (Index e = 0; e < r; ++e) {
                if (used_e[static_cast<std::size_t>(e)]) continue;
                if (score(t, e) > best) {
                    best = score(t, e);
                    bt = t;
                    be = e;
                }
            }
        }
        perm[static_cast<std::size_t>(bt)] = be;
        used_t[static_cast<std::size_t>(bt)] = true;
        used_e[static_cast<std::size_t>(be)] = true;
    }
    return perm;
}

double fms_side(const KruskalFactors& est, const KruskalFactors& truth) {
    const std::vector<Index> perm = align_columns(est, truth);
    const Index r = truth.rank;
    double acc = 0.0;
    for (Index t = 0; t < r; ++t) {
        double prod = 1.0;
        for (Index n = 0; n < truth.order(); ++n) {
            const Matrix& te = est.factors[static_cast<std::size_t>(n)];
            const Matrix& tt = truth.factors[static_cast<std::size_t>(n)];
            prod *= cosine(tt.col(t), te.col(perm[static_cast<std::size_t>(t)]));
        }
        acc += prod;
    }
    return acc / static_cast<double>(r);
}

double metric_fms(const KruskalFactors& est_a, const KruskalFactors& est_b, const KruskalFactors& truth_a,
                  const KruskalFactors& truth_b) {
    return 0.5 * (fms_side(est_a, truth_a) + fms_side(est_b, truth_b));
}

HsrMetrics metric_hsr(const DenseTensor& est, const DenseTensor& truth) {
    if (est.order() != 3 || truth.order() != 3) {
        throw std::invalid_argument("metric_hsr: tensors must be order 3");
    }
    if (est.shape() != truth.shape()) {
        throw std::invalid_argument("metric_hsr: shapes differ");
    }
    const Index rows = truth.dim(1);
    const Index cols = truth.dim(2);
    const Index bands = truth.dim(3);
    const double count = static_cast<double>(truth.size());

    HsrMetrics m;
    const double diff_sq = frobenius_dist_sq(est, truth);
    double truth_sq = 0.0;
    for (double v : truth.values()) truth_sq += v * v;

    if (diff_sq == 0.0) {
        m.rsnr = 300.0;
    } else {
        m.rsnr = std::min(10.0 * std::log10(truth_sq / diff_sq), 300.0);
    }
    m.rmse = std::sqrt(diff_sq / count);

    double cc_acc = 0.0, ssim_acc = 0.0;
    Index cc_kept = 0;
    Index flat_bands = 0;
    const double band_n = static_cast<double>(rows * cols);
    for (Index k = 0; k < bands; ++k) {
        const Matrix bt = band_of(truth, k);
        const Matrix be = band_of(est, k);
        ssim_acc += band_ssim(be, bt);

        const double mx = bt.mean();
        const double my = be.mean();
        const double vx = (bt.array() - mx).square().sum() / band_n;
        const double vy = (be.array() - my).square().sum() / band_n;
        if (vx == 0.0 || vy == 0.0) {
            ++flat_bands;
            continue;
        }
        const double cxy = ((bt.array() - mx) * (be.array() - my)).sum() / band_n;
        cc_acc += cxy / std::sqrt(vx * vy);
        ++cc_kept;
    }
    m.ssim = ssim_acc / static_cast<double>(bands);
    if (flat_bands > 0) {
        log::warn("metric_hsr: skipped " + std::to_string(flat_bands) + " zero-variance band(s) in the correlation");
    }
    if (cc_kept == 0) {
        log::warn("metric_hsr: no band had variance in both tensors, correlation is NaN");
        m.cc = quiet_nan();
    } else {
        m.cc = cc_acc / static_cast<double>(cc_kept);
    }

    double sam_acc = 0.0;
    Index sam_kept = 0;
    Index zero_fibers = 0;
    const double* pt = truth.data();
    const double* pe = est.data();
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const Index base = (i * cols + j) * bands;
            double dot = 0.0, nx = 0.0, ny = 0.0;
            for (Index k = 0; k < bands; ++k) {
                const double x = pt[base + k];
                const double y = pe[base + k];
                dot += x * y;
                nx += x * x;
                ny += y * y;
            }
            if (nx == 0.0 || ny == 0.0) {
                ++zero_fibers;
                continue;
            }
            const double c = std::clamp(dot / std::sqrt(nx * ny), -1.0, 1.0);
            sam_acc += std::acos(c);
            ++sam_kept;
        }
    }
    if (zero_fibers > 0) {
        log::warn("metric_hsr: skipped " + std::to_string(zero_fibers) + " zero fiber(s) in the spectral angle");
    }
    if (sam_kept == 0) {
        log::warn("metric_hsr: every fiber was zero, spectral angle is NaN");
        m.sam = quiet_nan();
    } else {
        m.sam = sam_acc / static_cast<double>(sam_kept);
    }
    return m;
}

}  // namespace cfuse
