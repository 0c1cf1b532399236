#include <coupledfuse/model.hpp>
#include <coupledfuse/rng.hpp>

#include <doctest.h>

#include "oracles.hpp"

using namespace cfuse;

namespace {

Matrix random_matrix(Index rows, Index cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
    return m;
}

KruskalFactors random_factors(const Shape& dims, Index rank, CounterRng& rng) {
    std::vector<Matrix> fs;
    for (Index d : dims) fs.push_back(random_matrix(d, rank, rng));
    return KruskalFactors(std::move(fs));
}

DenseTensor random_tensor(const Shape& shape, CounterRng& rng) {
    DenseTensor t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.next_normal();
    return t;
}

/// Laplacian-coupled problem on random data, rank 2, default (3, 1) linkage.
CoupledProblem make_lap_problem(CounterRng& rng, double mu = 0.05, double lambda = 0.7) {
    CoupledProblem p;
    p.y = random_tensor({4, 5, 6}, rng);
    p.y_prime = random_tensor({6, 3, 4}, rng);
    p.rank_a = p.rank_b = 2;
    p.lambda = lambda;
    p.coupling = LaplacianCoupling{mu, 3, 1};
    p.validate();
    return p;
}

/// Joint-Gauss problem: y is the spatially coarse tensor, y' the spectrally
/// coarse one; P1, P2 shrink y' spatial dims to y's, Pm shrinks y bands.
CoupledProblem make_jg_problem(CounterRng& rng, double w1 = 0.9, double w2 = 0.01) {
    CoupledProblem p;
    p.y = random_tensor({4, 5, 6}, rng);
    p.y_prime = random_tensor({8, 10, 3}, rng);
    p.rank_a = p.rank_b = 2;
    p.lambda = 1.3;
    JointGaussCoupling jg;
    jg.w1 = w1;
    jg.w2 = w2;
    jg.p1 = random_matrix(4, 8, rng);
    jg.p2 = random_matrix(5, 10, rng);
    jg.pm = random_matrix(3, 6, rng);
    p.coupling = jg;
    p.validate();
    return p;
}

KruskalFactors side_factors(const CoupledProblem& p, bool side_a, CounterRng& rng) {
    const DenseTensor& t = side_a ? p.y : p.y_prime;
    return random_factors(t.shape(), side_a ? p.rank_a : p.rank_b, rng);
}

/// coupling_value with one block swapped out.
double coupling_with_block(const CoupledProblem& p, const KruskalFactors& a, const KruskalFactors& b, BlockId blk,
                           const Matrix& x) {
    KruskalFactors a2 = a, b2 = b;
    auto& f = blk.side == BlockId::Side::A ? a2 : b2;
    f.factors[static_cast<std::size_t>(blk.index - 1)] = x;
    return coupling_value(p, a2, b2);
}

}  // namespace

TEST_CASE("cp_fit_value matches the dense definition and clamps at zero") {
    CounterRng rng(201);
    const DenseTensor t = random_tensor({4, 5, 6}, rng);
    const KruskalFactors f = random_factors({4, 5, 6}, 3, rng);
    const double ref = 0.5 * frobenius_dist_sq(t, oracles::naive_reconstruct(f));
    CHECK(cp_fit_value(t, f) == doctest::Approx(ref).epsilon(1e-10));

    // Exact data: the Gram shortcut hits cancellation territory, the clamp
    // keeps the value nonnegative and essentially zero.
    const DenseTensor exact = kruskal_reconstruct(f);
    const double v = cp_fit_value(exact, f);
    CHECK(v >= 0.0);
    CHECK(v < 1e-8 * (1.0 + frobenius_norm(exact)));
}

TEST_CASE("cp_fit_gradient_block agrees with central differences") {
    CounterRng rng(202);
    const DenseTensor t = random_tensor({3, 4, 3}, rng);
    KruskalFactors f = random_factors({3, 4, 3}, 2, rng);
    for (Index mode = 1; mode <= 3; ++mode) {
        const Matrix grad = cp_fit_gradient_block(t, f, mode);
        Matrix& fm = f.factors[static_cast<std::size_t>(mode - 1)];
        for (Index i = 0; i < fm.rows(); ++i) {
            for (Index c = 0; c < fm.cols(); ++c) {
                auto g = [&](double x) {
                    const double saved = fm(i, c);
                    fm(i, c) = x;
                    const double val = cp_fit_value(t, f);
                    fm(i, c) = saved;
                    return val;
                };
                const double fd = oracles::central_diff(g, fm(i, c), 1e-5);
                CHECK(std::abs(fd - grad(i, c)) <= 1e-6 * (1.0 + std::abs(grad(i, c))));
            }
        }
    }
}

TEST_CASE("block_lipschitz_estimate is the squared norm of the other-factor Khatri-Rao") {
    CounterRng rng(203);
    const KruskalFactors f = random_factors({4, 5, 6}, 3, rng);
    for (Index mode = 1; mode <= 3; ++mode) {
        std::vector<Matrix> others;
        for (Index m = 1; m <= 3; ++m)
            if (m != mode) others.push_back(f.factors[static_cast<std::size_t>(m - 1)]);
        const double ref = khatri_rao(others).squaredNorm();
        CHECK(block_lipschitz_estimate(f, mode) == doctest::Approx(ref).epsilon(1e-12));
    }

    const KruskalFactors empty({Matrix(4, 0), Matrix(5, 0), Matrix(6, 0)});
    CHECK(block_lipschitz_estimate(empty, 1) == kBlockLipschitzFloor);
}

TEST_CASE("coupling_value: laplacian term is mu times the l1 difference") {
    CounterRng rng(204);
    CoupledProblem p = make_lap_problem(rng, /*mu=*/0.25);
    KruskalFactors a = side_factors(p, true, rng);
    KruskalFactors b = side_factors(p, false, rng);
    // Overwrite the coupled pair with fixed values: |1-0| + |-2-1| + |0-0| +
    // |3-(-1)| summed over the 2x2 block gives 8, times mu.
    Matrix a3(6, 2), b1(6, 2);
    a3.setZero();
    b1.setZero();
    a3(0, 0) = 1.0;
    a3(1, 0) = -2.0;
    b1(1, 0) = 1.0;
    a3(2, 1) = 3.0;
    b1(2, 1) = -1.0;
    a.factors[2] = a3;
    b.factors[0] = b1;
    CHECK(coupling_value(p, a, b) == doctest::Approx(0.25 * 8.0));  // [DERIVED]
}

TEST_CASE("coupling_value: joint-Gauss matches the written-out formula") {
    CounterRng rng(205);
    CoupledProblem p = make_jg_problem(rng, 0.9, 0.01);
    const KruskalFactors a = side_factors(p, true, rng);
    const KruskalFactors b = side_factors(p, false, rng);
    const auto& jg = std::get<JointGaussCoupling>(p.coupling);
    const double ref = 0.9 * ((a.factors[0] - jg.p1 * b.factors[0]).squaredNorm() +
                              (a.factors[1] - jg.p2 * b.factors[1]).squaredNorm() +
                              (b.factors[2] - jg.pm * a.factors[2]).squaredNorm()) +
                       0.01 * (b.factors[0].squaredNorm() + b.factors[1].squaredNorm() +
                               a.factors[2].squaredNorm());
    CHECK(coupling_value(p, a, b) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("objective_value composes fit, lambda-weighted fit and coupling") {
    CounterRng rng(206);
    const CoupledProblem p = make_lap_problem(rng, 0.05, 0.7);
    const KruskalFactors a = side_factors(p, true, rng);
    const KruskalFactors b = side_factors(p, false, rng);
    const double ref = cp_fit_value(p.y, a) + 0.7 * cp_fit_value(p.y_prime, b) + coupling_value(p, a, b);
    CHECK(objective_value(p, a, b) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("block_partials: B-side gradients carry lambda, prox matches the coupling") {
    CounterRng rng(207);
    SUBCASE("laplacian") {
        const CoupledProblem p = make_lap_problem(rng, 0.25, 0.7);
        const KruskalFactors a = side_factors(p, true, rng);
        const KruskalFactors b = side_factors(p, false, rng);

        const BlockPartials gb2 = block_partials(p, {BlockId::Side::B, 2}, a, b);
        const Matrix ref = 0.7 * cp_fit_gradient_block(p.y_prime, b, 2);
        CHECK((gb2.smooth_gradient - ref).norm() <= 1e-12 * (1.0 + ref.norm()));
        CHECK(gb2.prox.kind == ProxFunction::Kind::Zero);

        const BlockPartials ga3 = block_partials(p, {BlockId::Side::A, 3}, a, b);
        REQUIRE(ga3.prox.kind == ProxFunction::Kind::L1Offset);
        CHECK(ga3.prox.weight == 0.25);
        CHECK((ga3.prox.offset - b.factors[0]).norm() == 0.0);

        const BlockPartials gb1 = block_partials(p, {BlockId::Side::B, 1}, a, b);
        REQUIRE(gb1.prox.kind == ProxFunction::Kind::L1Offset);
        CHECK((gb1.prox.offset - a.factors[2]).norm() == 0.0);
    }
    SUBCASE("joint-Gauss term tables") {
        const CoupledProblem p = make_jg_problem(rng, 0.9, 0.01);
        const KruskalFactors a = side_factors(p, true, rng);
        const KruskalFactors b = side_factors(p, false, rng);
        const auto& jg = std::get<JointGaussCoupling>(p.coupling);

        const ProxFunction a1 = block_prox(p, {BlockId::Side::A, 1}, a, b);
        REQUIRE(a1.kind == ProxFunction::Kind::Quadratic);
        REQUIRE(a1.terms.size() == 1);
        CHECK(a1.terms[0].weight == 0.9);
        CHECK((a1.terms[0].coeff - Matrix::Identity(4, 4)).norm() == 0.0);
        CHECK((a1.terms[0].target - jg.p1 * b.factors[0]).norm() == 0.0);

        const ProxFunction a3 = block_prox(p, {BlockId::Side::A, 3}, a, b);
        REQUIRE(a3.terms.size() == 2);
        CHECK(a3.terms[0].weight == 0.9);
        CHECK((a3.terms[0].coeff - jg.pm).norm() == 0.0);
        CHECK((a3.terms[0].target - b.factors[2]).norm() == 0.0);
        CHECK(a3.terms[1].weight == 0.01);
        CHECK(a3.terms[1].target.norm() == 0.0);

        const ProxFunction b1 = block_prox(p, {BlockId::Side::B, 1}, a, b);
        REQUIRE(b1.terms.size() == 2);
        CHECK((b1.terms[0].coeff - jg.p1).norm() == 0.0);
        CHECK((b1.terms[0].target - a.factors[0]).norm() == 0.0);
        CHECK(b1.terms[1].weight == 0.01);

        const ProxFunction b3 = block_prox(p, {BlockId::Side::B, 3}, a, b);
        REQUIRE(b3.terms.size() == 1);
        CHECK((b3.terms[0].target - jg.pm * a.factors[2]).norm() == 0.0);
    }
}

TEST_CASE("block prox value tracks the coupling as a function of that block") {
    CounterRng rng(208);
    std::vector<CoupledProblem> problems;
    problems.push_back(make_lap_problem(rng, 0.3));
    problems.push_back(make_jg_problem(rng));
    for (const CoupledProblem& p : problems) {
        const KruskalFactors a = side_factors(p, true, rng);
        const KruskalFactors b = side_factors(p, false, rng);
        for (int s = 0; s < 6; ++s) {
            const BlockId blk{s < 3 ? BlockId::Side::A : BlockId::Side::B, (s % 3) + 1};
            const Matrix& x0 = (blk.side == BlockId::Side::A ? a : b).factors[static_cast<std::size_t>(blk.index - 1)];
            const Matrix x1 = random_matrix(x0.rows(), x0.cols(), rng);
            const ProxFunction prox = block_prox(p, blk, a, b);
            // Substituting the block changes the coupling exactly as it
            // changes the prox function: everything else is constant in it.
            const double d_coupling = coupling_with_block(p, a, b, blk, x1) - coupling_with_block(p, a, b, blk, x0);
            const double d_prox = prox_value(prox, x1) - prox_value(prox, x0);
            CHECK(d_coupling == doctest::Approx(d_prox).epsilon(1e-10));
        }
    }
}

TEST_CASE("gradients vanish at an exact decoupled fit") {
    CounterRng rng(209);
    CoupledProblem p;
    const KruskalFactors a = random_factors({4, 5, 6}, 2, rng);
    const KruskalFactors b = random_factors({6, 3, 4}, 2, rng);
    p.y = kruskal_reconstruct(a);
    p.y_prime = kruskal_reconstruct(b);
    p.rank_a = p.rank_b = 2;
    p.lambda = 1.0;
    p.coupling = LaplacianCoupling{0.0, 3, 1};
    p.validate();
    for (Index mode = 1; mode <= 3; ++mode) {
        CHECK(cp_fit_gradient_block(p.y, a, mode).norm() < 1e-10 * (1.0 + frobenius_norm(p.y)));
        CHECK(cp_fit_gradient_block(p.y_prime, b, mode).norm() < 1e-10 * (1.0 + frobenius_norm(p.y_prime)));
    }
}

TEST_CASE("CoupledProblem::validate rejects inconsistent setups") {
    CounterRng rng(210);
    const CoupledProblem good = make_lap_problem(rng);

    CoupledProblem p = good;
    p.y = random_tensor({4, 5}, rng);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = good;
    p.lambda = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = good;
    p.rank_b = 3;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = good;
    p.coupling = LaplacianCoupling{-0.1, 3, 1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = good;
    p.coupling = LaplacianCoupling{0.1, 4, 1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    p = good;
    // (2, 1): y dim 2 is 5, y' dim 1 is 6 — row counts disagree.
    p.coupling = LaplacianCoupling{0.1, 2, 1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    CoupledProblem jp = make_jg_problem(rng);
    auto& jg = std::get<JointGaussCoupling>(jp.coupling);
    jg.w1 = -1.0;
    CHECK_THROWS_AS(jp.validate(), std::invalid_argument);
    jg.w1 = 1.0;
    jg.p1 = Matrix::Zero(3, 8);
    CHECK_THROWS_AS(jp.validate(), std::invalid_argument);
}
