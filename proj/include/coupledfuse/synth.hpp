#pragma once

#include "coupledfuse/model.hpp"
#include "coupledfuse/rng.hpp"

#include <utility>

namespace cfuse {

struct SynthSpec {
    Shape dims_y{30, 40, 50};
    Shape dims_y_prime{50, 60, 70};
    Index rank = 5;
    /// Additive Gaussian noise level in dB; +infinity means noiseless.
    double snr_db = 14.0;
    /// Scale of the Laplace perturbation linking B1 to A3; 0 couples them
    /// exactly.
    double laplace_scale = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthResult {
    CoupledProblem problem;
    KruskalFactors truth_a, truth_b;
    DenseTensor clean_y, clean_y_prime;
};

/// Coupled pair of rank-`rank` third-order problems: factors A1..A3, B2, B3
/// uniform [0,1), B1 = A3 + Laplace(scale) entries, data tensors the exact
/// reconstructions plus SNR-calibrated Gaussian noise, coupling
/// mu ||vec(A3 - B1)||_1. One seed stream drawn in the fixed order
/// A1, A2, A3, B2, B3, Laplace noise, Y noise, Y' noise (matrices filled
/// row by row), so every artifact is reproducible from the seed.
SynthResult gen_synthetic_coupled(const SynthSpec& spec, double mu = 0.01);

/// One Laplace(0, scale) draw from the stream.
double sample_laplace(double scale, CounterRng& rng);

/// x + 10^(-snr/20) * (||x||_F / ||n||_F) * n with n standard normal;
/// snr = +infinity returns x unchanged without consuming draws.
DenseTensor add_noise_snr(const DenseTensor& x, double snr_db, CounterRng& rng);

/// Random starting point in the style of the reference experiments:
/// A1, A2, B1 standard normal, A3, B2, B3 uniform [0,1), drawn in the order
/// A1, A2, A3, B1, B2, B3 from a fresh stream.
std::pair<KruskalFactors, KruskalFactors> make_random_init(const CoupledProblem& p, std::uint64_t seed);

}  // namespace cfuse
