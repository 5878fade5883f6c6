#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hamming/linalg.hpp"

using namespace hamming;

namespace {

Matrix make(std::size_t r, std::size_t c, std::initializer_list<double> vals) {
    Matrix m(r, c);
    std::copy(vals.begin(), vals.end(), m.data.begin());
    return m;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(r, c);
    for (double& v : m.data) v = gauss(rng);
    return m;
}

}  // namespace

TEST_CASE("matvec and matmul against hand values") {
    Matrix a = make(2, 3, {1, 2, 3, 4, 5, 6});
    RealVector x = {1, -1, 2};
    RealVector y = matvec(a, x);
    CHECK(y[0] == doctest::Approx(5.0));   // 1 - 2 + 6
    CHECK(y[1] == doctest::Approx(11.0));  // 4 - 5 + 12

    Matrix b = make(3, 2, {1, 0, 0, 1, 1, 1});
    Matrix c = matmul(a, b);
    CHECK(c.rows == 2);
    CHECK(c.cols == 2);
    CHECK(c.at(0, 0) == doctest::Approx(4.0));
    CHECK(c.at(0, 1) == doctest::Approx(5.0));
    CHECK(c.at(1, 0) == doctest::Approx(10.0));
    CHECK(c.at(1, 1) == doctest::Approx(11.0));

    CHECK_THROWS_AS(matvec(a, RealVector{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("transpose and norms") {
    Matrix a = make(2, 3, {1, -2, 3, -4, 5, -6});
    Matrix t = transpose(a);
    CHECK(t.rows == 3);
    CHECK(t.cols == 2);
    CHECK(t.at(2, 1) == -6.0);
    CHECK(t.at(0, 1) == -4.0);

    CHECK(inf_norm(RealVector{1.0, -7.5, 3.0}) == 7.5);
    CHECK(inf_norm(a) == 15.0);  // row 1: 4 + 5 + 6
    CHECK(max_abs(a) == 6.0);
}

TEST_CASE("solve_square matches a hand-solved 2x2 system") {
    // 2x + y = 5, x + y = 3  =>  x = 2, y = 1
    Matrix a = make(2, 2, {2, 1, 1, 1});
    RealVector x = solve_square(a, {5, 3});
    CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solve_square residuals stay below the library threshold") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 12;
        Matrix a = random_matrix(rng, n, n);
        RealVector b(n);
        for (double& v : b) v = gauss(rng);
        RealVector x = solve_square(a, b);
        RealVector r = matvec(a, x);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::fabs(r[i] - b[i]) <= RESIDUAL_TOL * (1.0 + inf_norm(b)));
    }
}

TEST_CASE("singular and near-singular systems throw") {
    Matrix a = make(2, 2, {1, 2, 2, 4});  // rank 1
    CHECK_THROWS_AS(solve_square(a, {1, 1}), SingularMatrixError);
    CHECK_THROWS_AS(invert(a), SingularMatrixError);

    // second row differs from a multiple of the first at below the pivot
    // threshold relative to the largest entry
    Matrix b = make(2, 2, {1e6, 2e6, 0.5e6, 1e6 + 1e-9});
    CHECK_THROWS_AS(solve_square(b, {1, 1}), SingularMatrixError);
}

TEST_CASE("invert agrees with the adjugate formula on 2x2 matrices") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix a = random_matrix(rng, 2, 2);
        const double det = a.at(0, 0) * a.at(1, 1) - a.at(0, 1) * a.at(1, 0);
        if (std::fabs(det) < 1e-6) continue;
        Matrix inv = invert(a);
        CHECK(inv.at(0, 0) == doctest::Approx(a.at(1, 1) / det).epsilon(1e-9));
        CHECK(inv.at(0, 1) == doctest::Approx(-a.at(0, 1) / det).epsilon(1e-9));
        CHECK(inv.at(1, 0) == doctest::Approx(-a.at(1, 0) / det).epsilon(1e-9));
        CHECK(inv.at(1, 1) == doctest::Approx(a.at(0, 0) / det).epsilon(1e-9));
    }
}

TEST_CASE("invert produces a two-sided inverse") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 8;
        Matrix a = random_matrix(rng, n, n);
        Matrix inv = invert(a);
        Matrix left = matmul(inv, a);
        Matrix right = matmul(a, inv);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double want = i == j ? 1.0 : 0.0;
                CHECK(left.at(i, j) == doctest::Approx(want).epsilon(1e-8));
                CHECK(right.at(i, j) == doctest::Approx(want).epsilon(1e-8));
            }
    }
}

TEST_CASE("preimage_affine spans the full solution set") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> coef(-4.0, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t rows = 1 + trial % 5;
        const std::size_t cols = rows + 1 + trial % 4;
        Matrix a = random_matrix(rng, rows, cols);
        RealVector t(rows);
        for (double& v : t) v = gauss(rng);

        AffinePreimage pre = preimage_affine(a, t);
        CHECK(pre.particular.size() == cols);
        CHECK(pre.basis.size() == cols - rows);

        // particular solution hits the target
        RealVector r = matvec(a, pre.particular);
        for (std::size_t i = 0; i < rows; ++i)
            CHECK(r[i] == doctest::Approx(t[i]).epsilon(1e-8));

        // basis vectors lie in the null space
        for (const RealVector& bv : pre.basis) {
            RealVector img = matvec(a, bv);
            for (std::size_t i = 0; i < rows; ++i)
                CHECK(std::fabs(img[i]) <= 1e-8);
        }

        // arbitrary combinations stay on target
        RealVector x = pre.particular;
        for (const RealVector& bv : pre.basis) {
            const double c = coef(rng);
            for (std::size_t j = 0; j < cols; ++j) x[j] += c * bv[j];
        }
        r = matvec(a, x);
        for (std::size_t i = 0; i < rows; ++i)
            CHECK(r[i] == doctest::Approx(t[i]).epsilon(1e-7));
    }
}

TEST_CASE("preimage_affine rejects rank-deficient rows") {
    Matrix a = make(2, 3, {1, 2, 3, 2, 4, 6});
    CHECK_THROWS_AS(preimage_affine(a, {1, 2}), RankDeficientError);
}

TEST_CASE("preimage_affine handles the square full-rank case") {
    Matrix a = make(2, 2, {2, 1, 1, 1});
    AffinePreimage pre = preimage_affine(a, {5, 3});
    CHECK(pre.basis.empty());
    CHECK(pre.particular[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(pre.particular[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("condition_estimate on hand-checked matrices") {
    Matrix eye = make(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(condition_estimate(eye) == doctest::Approx(1.0));

    // |A|_inf = 3, A^-1 = [[1,-1],[-1,2]], |A^-1|_inf = 3  =>  cond = 9
    Matrix a = make(2, 2, {2, 1, 1, 1});
    CHECK(condition_estimate(a) == doctest::Approx(9.0).epsilon(1e-9));

    Matrix s = make(2, 2, {1, 2, 2, 4});
    CHECK(std::isinf(condition_estimate(s)));

    // scaling can push |A|_inf * |A^-1|_inf below 1 only through rounding;
    // the estimate clamps at 1
    Matrix tiny = make(1, 1, {0.5});
    CHECK(condition_estimate(tiny) >= 1.0);
}
