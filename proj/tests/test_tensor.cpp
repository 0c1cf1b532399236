#include <coupledfuse/io.hpp>
#include <coupledfuse/rng.hpp>
#include <coupledfuse/tensor.hpp>

#include <doctest.h>

#include "oracles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace cfuse;

namespace {

Matrix random_matrix(Index rows, Index cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
    return m;
}

DenseTensor random_tensor(const Shape& shape, CounterRng& rng) {
    DenseTensor t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.next_normal();
    return t;
}

DenseTensor iota_tensor(const Shape& shape) {
    DenseTensor t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i + 1);
    return t;
}

std::filesystem::path temp_path(const char* stem) {
    return std::filesystem::temp_directory_path() / stem;
}

}  // namespace

TEST_CASE("DenseTensor layout is row-major with the last index fastest") {
    const DenseTensor t = iota_tensor({2, 3, 2});
    // [DERIVED] offsets computed by hand from ((i*3 + j)*2 + k).
    CHECK(t.at({0, 0, 0}) == 1.0);
    CHECK(t.at({0, 0, 1}) == 2.0);
    CHECK(t.at({0, 1, 0}) == 3.0);
    CHECK(t.at({1, 0, 0}) == 7.0);
    CHECK(t.at({1, 2, 1}) == 12.0);
    CHECK(t.dim(1) == 2);
    CHECK(t.dim(2) == 3);
    CHECK(t.dim(3) == 2);
    CHECK_THROWS_AS((void)t.dim(4), std::invalid_argument);
    CHECK_THROWS_AS(DenseTensor({2, 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(DenseTensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("unfold matches the hand-computed matricizations of a 2x3x2 tensor") {
    const DenseTensor t = iota_tensor({2, 3, 2});

    // [DERIVED] flattened by hand: the first remaining index varies fastest
    // along columns.
    Matrix m1(2, 6);
    m1 << 1, 3, 5, 2, 4, 6,
          7, 9, 11, 8, 10, 12;
    CHECK((unfold(t, 1) - m1).norm() == 0.0);

    Matrix m2(3, 4);
    m2 << 1, 7, 2, 8,
          3, 9, 4, 10,
          5, 11, 6, 12;
    CHECK((unfold(t, 2) - m2).norm() == 0.0);

    Matrix m3(2, 6);
    m3 << 1, 7, 3, 9, 5, 11,
          2, 8, 4, 10, 6, 12;
    CHECK((unfold(t, 3) - m3).norm() == 0.0);

    CHECK_THROWS_AS(unfold(t, 0), std::invalid_argument);
    CHECK_THROWS_AS(unfold(t, 4), std::invalid_argument);
}

TEST_CASE("fold inverts unfold on random tensors of order 2..4") {
    CounterRng rng(11);
    const std::vector<Shape> shapes{{4, 5}, {3, 4, 5}, {2, 3, 4, 3}};
    for (const auto& shape : shapes) {
        const DenseTensor t = random_tensor(shape, rng);
        for (Index mode = 1; mode <= t.order(); ++mode) {
            const DenseTensor back = fold(unfold(t, mode), mode, shape);
            REQUIRE(back.shape() == shape);
            // [TRIVIAL] exact inverse: both directions just permute entries.
            CHECK(back.values() == t.values());
        }
    }
    CHECK_THROWS_AS(fold(Matrix::Zero(3, 5), 1, Shape{3, 4}), std::invalid_argument);
}

TEST_CASE("khatri_rao pins the column-Kronecker convention") {
    Matrix a(2, 1), b(2, 1);
    a << 1, 2;
    b << 3, 4;
    Matrix expect(4, 1);
    // [DERIVED] first matrix slowest: [1*3, 1*4, 2*3, 2*4].
    expect << 3, 4, 6, 8;
    CHECK((khatri_rao({a, b}) - expect).norm() == 0.0);

    CounterRng rng(12);
    const Matrix x = random_matrix(3, 4, rng);
    const Matrix y = random_matrix(2, 4, rng);
    const Matrix z = random_matrix(5, 4, rng);
    CHECK((khatri_rao({x, y}) - oracles::naive_khatri_rao(x, y)).norm() == 0.0);
    // Three-way product associates as nested two-way products.
    const Matrix ref = oracles::naive_khatri_rao(oracles::naive_khatri_rao(x, y), z);
    CHECK((khatri_rao({x, y, z}) - ref).norm() < 1e-13 * ref.norm());

    CHECK_THROWS_AS(khatri_rao({x, random_matrix(2, 3, rng)}), std::invalid_argument);
    CHECK_THROWS_AS(khatri_rao({}), std::invalid_argument);
}

TEST_CASE("gram_hadamard_others equals the Gram of the other-factor Khatri-Rao") {
    CounterRng rng(13);
    KruskalFactors f({random_matrix(4, 3, rng), random_matrix(5, 3, rng), random_matrix(6, 3, rng)});
    for (Index mode = 1; mode <= 3; ++mode) {
        std::vector<Matrix> others;
        for (Index m = 1; m <= 3; ++m)
            if (m != mode) others.push_back(f.factors[static_cast<std::size_t>(m - 1)]);
        const Matrix kr = khatri_rao(others);
        const Matrix ref = kr.transpose() * kr;
        CHECK((gram_hadamard_others(f, mode) - ref).norm() < 1e-12 * (1.0 + ref.norm()));
    }
}

TEST_CASE("kruskal_reconstruct matches the naive sum of outer products") {
    CounterRng rng(14);
    SUBCASE("order 3 (GEMM path)") {
        KruskalFactors f({random_matrix(4, 3, rng), random_matrix(5, 3, rng), random_matrix(6, 3, rng)});
        const DenseTensor got = kruskal_reconstruct(f);
        const DenseTensor ref = oracles::naive_reconstruct(f);
        REQUIRE(got.shape() == ref.shape());
        CHECK(std::sqrt(frobenius_dist_sq(got, ref)) < 1e-12 * (1.0 + frobenius_norm(ref)));
    }
    SUBCASE("order 4 (generic path)") {
        KruskalFactors f({random_matrix(3, 2, rng), random_matrix(4, 2, rng), random_matrix(2, 2, rng),
                          random_matrix(5, 2, rng)});
        const DenseTensor got = kruskal_reconstruct(f);
        const DenseTensor ref = oracles::naive_reconstruct(f);
        CHECK(std::sqrt(frobenius_dist_sq(got, ref)) < 1e-12 * (1.0 + frobenius_norm(ref)));
    }
    SUBCASE("rank 0 reconstructs to zero") {
        KruskalFactors f({Matrix(3, 0), Matrix(4, 0), Matrix(5, 0)});
        const DenseTensor got = kruskal_reconstruct(f);
        CHECK(frobenius_norm(got) == 0.0);
    }
}

TEST_CASE("mttkrp agrees with the definition and the unfolding identity") {
    CounterRng rng(15);
    SUBCASE("order 3, all modes") {
        const DenseTensor t = random_tensor({4, 5, 6}, rng);
        KruskalFactors f({random_matrix(4, 3, rng), random_matrix(5, 3, rng), random_matrix(6, 3, rng)});
        for (Index mode = 1; mode <= 3; ++mode) {
            const Matrix got = mttkrp(t, f, mode);
            const Matrix ref = oracles::naive_mttkrp(t, f, mode);
            CHECK((got - ref).norm() < 1e-12 * (1.0 + ref.norm()));

            // unfold identity: others in reverse order so the Khatri-Rao
            // column layout matches the unfolding columns.
            std::vector<Matrix> others_rev;
            for (Index m = 3; m >= 1; --m)
                if (m != mode) others_rev.push_back(f.factors[static_cast<std::size_t>(m - 1)]);
            const Matrix ref2 = unfold(t, mode) * khatri_rao(others_rev);
            CHECK((got - ref2).norm() < 1e-12 * (1.0 + ref2.norm()));
        }
    }
    SUBCASE("order 4 falls back to the generic loop") {
        const DenseTensor t = random_tensor({3, 2, 4, 3}, rng);
        KruskalFactors f({random_matrix(3, 2, rng), random_matrix(2, 2, rng), random_matrix(4, 2, rng),
                          random_matrix(3, 2, rng)});
        for (Index mode = 1; mode <= 4; ++mode) {
            const Matrix got = mttkrp(t, f, mode);
            const Matrix ref = oracles::naive_mttkrp(t, f, mode);
            CHECK((got - ref).norm() < 1e-12 * (1.0 + ref.norm()));
        }
    }
    SUBCASE("shape mismatches are rejected") {
        const DenseTensor t = random_tensor({4, 5, 6}, rng);
        KruskalFactors bad({random_matrix(4, 3, rng), random_matrix(5, 3, rng), random_matrix(7, 3, rng)});
        CHECK_THROWS_AS(mttkrp(t, bad, 1), std::invalid_argument);
    }
}

TEST_CASE("mode_product contracts the chosen mode") {
    CounterRng rng(16);
    const DenseTensor t = random_tensor({3, 4, 5}, rng);
    for (Index mode = 1; mode <= 3; ++mode) {
        const Matrix m = random_matrix(2, t.dim(mode), rng);
        const DenseTensor got = mode_product(t, m, mode);
        REQUIRE(got.dim(mode) == 2);
        // Naive contraction, one output entry at a time.
        for (Index i = 0; i < got.dim(1); ++i)
            for (Index j = 0; j < got.dim(2); ++j)
                for (Index k = 0; k < got.dim(3); ++k) {
                    double acc = 0.0;
                    for (Index s = 0; s < t.dim(mode); ++s) {
                        std::vector<Index> idx{i, j, k};
                        const Index row = idx[static_cast<std::size_t>(mode - 1)];
                        idx[static_cast<std::size_t>(mode - 1)] = s;
                        acc += m(row, s) * t.at(idx);
                    }
                    CHECK(got.at({i, j, k}) == doctest::Approx(acc).epsilon(1e-12));
                }
    }
    CHECK_THROWS_AS(mode_product(t, Matrix::Zero(2, 99), 1), std::invalid_argument);
}

TEST_CASE("tensor/matrix conversions round-trip") {
    CounterRng rng(17);
    const Matrix m = random_matrix(4, 7, rng);
    const DenseTensor t = matrix_to_tensor(m);
    REQUIRE(t.order() == 2);
    CHECK((tensor_to_matrix(t) - m).norm() == 0.0);
    CHECK_THROWS_AS(tensor_to_matrix(random_tensor({2, 2, 2}, rng)), std::invalid_argument);
}

TEST_CASE("TNSR files round-trip bit-exactly and carry the pinned header") {
    CounterRng rng(18);
    const DenseTensor t = random_tensor({3, 4, 2}, rng);
    const auto path = temp_path("cfuse_test_roundtrip.tnsr");
    write_tnsr(path, t);

    const DenseTensor back = read_tnsr(path);
    REQUIRE(back.shape() == t.shape());
    CHECK(back.values() == t.values());

    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> head(8);
    in.read(reinterpret_cast<char*>(head.data()), 8);
    // [DERIVED] header layout: magic "TNSR", u16 LE version 1, u16 LE order.
    CHECK(head[0] == 0x54);
    CHECK(head[1] == 0x4E);
    CHECK(head[2] == 0x53);
    CHECK(head[3] == 0x52);
    CHECK(head[4] == 0x01);
    CHECK(head[5] == 0x00);
    CHECK(head[6] == 0x03);
    CHECK(head[7] == 0x00);
    std::filesystem::remove(path);
}

TEST_CASE("TNSR reader rejects malformed files") {
    CounterRng rng(19);
    const DenseTensor t = random_tensor({2, 3}, rng);
    const auto path = temp_path("cfuse_test_malformed.tnsr");

    auto write_bytes = [&](const std::vector<char>& bytes) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };
    auto file_bytes = [&]() {
        std::ifstream in(path, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };

    write_tnsr(path, t);
    std::vector<char> good = file_bytes();

    SUBCASE("bad magic") {
        auto bad = good;
        bad[0] = 'X';
        write_bytes(bad);
        CHECK_THROWS_AS(read_tnsr(path), std::runtime_error);
    }
    SUBCASE("unsupported version") {
        auto bad = good;
        bad[4] = 2;
        write_bytes(bad);
        CHECK_THROWS_AS(read_tnsr(path), std::runtime_error);
    }
    SUBCASE("zero dimension") {
        auto bad = good;
        for (int i = 0; i < 8; ++i) bad[8 + i] = 0;
        write_bytes(bad);
        CHECK_THROWS_AS(read_tnsr(path), std::runtime_error);
    }
    SUBCASE("truncated payload") {
        auto bad = good;
        bad.pop_back();
        write_bytes(bad);
        CHECK_THROWS_AS(read_tnsr(path), std::runtime_error);
    }
    SUBCASE("trailing bytes") {
        auto bad = good;
        bad.push_back(0);
        write_bytes(bad);
        CHECK_THROWS_AS(read_tnsr(path), std::runtime_error);
    }
    SUBCASE("missing file") {
        std::filesystem::remove(path);
        CHECK_THROWS_AS(read_tnsr(path), std::runtime_error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("CSV matrices round-trip exactly through %.17g") {
    CounterRng rng(20);
    Matrix m = random_matrix(5, 3, rng);
    m(0, 0) = 0.1;
    m(1, 1) = -1e-300;
    m(2, 2) = 12345678901234567.0;
    m(3, 0) = 0.0;
    const auto path = temp_path("cfuse_test_matrix.csv");
    write_matrix_csv(path, m);
    const Matrix back = read_matrix_csv(path);
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(back.cwiseEqual(m).all());
    std::filesystem::remove(path);

    // 17 significant digits, fixed precision (not shortest-round-trip).
    CHECK(format_csv_double(0.1) == "0.10000000000000001");
    CHECK(format_csv_double(1.0) == "1");
    CHECK(std::stod(format_csv_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("CSV reader rejects ragged rows and junk") {
    const auto path = temp_path("cfuse_test_ragged.csv");
    {
        std::ofstream out(path);
        out << "1,2\n3\n";
    }
    CHECK_THROWS_AS(read_matrix_csv(path), std::runtime_error);
    {
        std::ofstream out(path, std::ios::trunc);
        out << "1,two\n";
    }
    CHECK_THROWS_AS(read_matrix_csv(path), std::runtime_error);
    std::filesystem::remove(path);
}
