#include "coupledfuse/synth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfuse {

namespace {

Matrix uniform_matrix(Index rows, Index cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = rng.next_double();
        }
    }
    return m;
}

Matrix normal_matrix(Index rows, Index cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = rng.next_normal();
        }
    }
    return m;
}

}  // namespace

void SynthSpec::validate() const {
    if (dims_y.size() != 3 || dims_y_prime.size() != 3) {
        throw std::invalid_argument("SynthSpec: both tensors must be third order");
    }
    for (Index d : dims_y) {
        if (d < 1) throw std::invalid_argument("SynthSpec: dims_y entries must be >= 1");
    }
    for (Index d : dims_y_prime) {
        if (d < 1) throw std::invalid_argument("SynthSpec: dims_y_prime entries must be >= 1");
    }
    if (dims_y[2] != dims_y_prime[0]) {
        throw std::invalid_argument("SynthSpec: dims_y[3] must equal dims_y_prime[1] so A3 and B1 can couple");
    }
    if (rank < 1) throw std::invalid_argument("SynthSpec: rank must be >= 1");
    if (std::isnan(snr_db)) throw std::invalid_argument("SynthSpec: snr_db must not be NaN");
    if (!(laplace_scale >= 0.0)) throw std::invalid_argument("SynthSpec: laplace_scale must be >= 0");
}

double sample_laplace(double scale, CounterRng& rng) {
    if (!(scale >= 0.0)) throw std::invalid_argument("sample_laplace: scale must be >= 0");
    return rng.next_laplace(scale);
}

DenseTensor add_noise_snr(const DenseTensor& x, double snr_db, CounterRng& rng) {
    if (std::isinf(snr_db) && snr_db > 0.0) return x;
    DenseTensor noise(x.shape());
    for (double& v : noise.values()) v = rng.next_normal();
    const double nx = frobenius_norm(x);
    const double nn = frobenius_norm(noise);
    if (nn == 0.0) return x;
    const double scale = std::pow(10.0, -snr_db / 20.0) * nx / nn;
    DenseTensor out = x;
    double* po = out.data();
    const double* pn = noise.data();
    for (Index i = 0; i < out.size(); ++i) po[i] += scale * pn[i];
    return out;
}

SynthResult gen_synthetic_coupled(const SynthSpec& spec, double mu) {
    spec.validate();
    if (!(mu >= 0.0)) throw std::invalid_argument("gen_synthetic_coupled: mu must be >= 0");
    CounterRng rng(spec.seed);
    const Index r = spec.rank;

    const Matrix a1 = uniform_matrix(spec.dims_y[0], r, rng);
    const Matrix a2 = uniform_matrix(spec.dims_y[1], r, rng);
    const Matrix a3 = uniform_matrix(spec.dims_y[2], r, rng);
    const Matrix b2 = uniform_matrix(spec.dims_y_prime[1], r, rng);
    const Matrix b3 = uniform_matrix(spec.dims_y_prime[2], r, rng);

    Matrix b1 = a3;
    for (Index i = 0; i < b1.rows(); ++i) {
        for (Index j = 0; j < b1.cols(); ++j) {
            b1(i, j) += sample_laplace(spec.laplace_scale, rng);
        }
    }

    SynthResult out;
    out.truth_a = KruskalFactors({a1, a2, a3});
    out.truth_b = KruskalFactors({b1, b2, b3});
    out.clean_y = kruskal_reconstruct(out.truth_a);
    out.clean_y_prime = kruskal_reconstruct(out.truth_b);

    out.problem.y = add_noise_snr(out.clean_y, spec.snr_db, rng);
    out.problem.y_prime = add_noise_snr(out.clean_y_prime, spec.snr_db, rng);
    out.problem.rank_a = r;
    out.problem.rank_b = r;
    out.problem.coupling = LaplacianCoupling{mu, 3, 1};
    out.problem.lambda = 1.0;
    out.problem.validate();
    return out;
}

std::pair<KruskalFactors, KruskalFactors> make_random_init(const CoupledProblem& p, std::uint64_t seed) {
    p.validate();
    CounterRng rng(seed);
    const Matrix a1 = normal_matrix(p.y.dim(1), p.rank_a, rng);
    const Matrix a2 = normal_matrix(p.y.dim(2), p.rank_a, rng);
    const Matrix a3 = uniform_matrix(p.y.dim(3), p.rank_a, rng);
    const Matrix b1 = normal_matrix(p.y_prime.dim(1), p.rank_b, rng);
    const Matrix b2 = uniform_matrix(p.y_prime.dim(2), p.rank_b, rng);
    const Matrix b3 = uniform_matrix(p.y_prime.dim(3), p.rank_b, rng);
    return {KruskalFactors({a1, a2, a3}), KruskalFactors({b1, b2, b3})};
}

}  // namespace cfuse
