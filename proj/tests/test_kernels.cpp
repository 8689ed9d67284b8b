#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "vad/kernels.hpp"

using namespace vad::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen, double lo = -2.0,
                               double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

// Sizes chosen to cover empty input, sub-vector-width tails, exact
// vector-width multiples, and off-by-one around them.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 100, 1023};

}  // namespace

TEST_CASE("scalar reference kernels compute the textbook result") {
    const Backend& b = scalar();
    std::vector<double> x = {1.0, -2.0, 3.0, 0.0};
    std::vector<double> y = {0.5, 0.5, -1.0, 2.0};

    CHECK(b.dot(x.data(), y.data(), 4) == 1.0 * 0.5 - 2.0 * 0.5 - 3.0);
    CHECK(b.sum_squares(x.data(), 4) == 1.0 + 4.0 + 9.0);

    std::vector<double> acc = {1.0, 1.0, 1.0, 1.0};
    b.axpy(2.0, x.data(), acc.data(), 4);
    CHECK(acc == std::vector<double>{3.0, -3.0, 7.0, 1.0});

    std::vector<double> out(4);
    b.add(x.data(), y.data(), out.data(), 4);
    CHECK(out == std::vector<double>{1.5, -1.5, 2.0, 2.0});
    b.sub(x.data(), y.data(), out.data(), 4);
    CHECK(out == std::vector<double>{0.5, -2.5, 4.0, -2.0});
    b.mul(x.data(), y.data(), out.data(), 4);
    CHECK(out == std::vector<double>{0.5, -1.0, -3.0, 0.0});
    b.scale(x.data(), -3.0, out.data(), 4);
    CHECK(out == std::vector<double>{-3.0, 6.0, -9.0, 0.0});
    b.relu(x.data(), out.data(), 4);
    CHECK(out == std::vector<double>{1.0, 0.0, 3.0, 0.0});

    std::vector<double> g = {10.0, 10.0, 10.0, 10.0};
    std::vector<double> up = {1.0, 2.0, 3.0, 4.0};
    b.relu_backward(x.data(), up.data(), g.data(), 4);
    CHECK(g == std::vector<double>{11.0, 10.0, 13.0, 10.0});
}

TEST_CASE("avx2 variants match the scalar reference on every size class") {
    const Backend& s = scalar();
    const Backend& v = avx2();
    INFO("avx2 backend name: " << v.name);

    std::mt19937_64 gen(42);
    for (std::size_t n : kSizes) {
        CAPTURE(n);
        auto x = random_vec(n, gen);
        auto y = random_vec(n, gen);

        // Reductions: same split into vector lanes can reorder additions,
        // so allow tiny relative slack; elementwise ops must be bitwise.
        CHECK(v.dot(x.data(), y.data(), n) ==
              doctest::Approx(s.dot(x.data(), y.data(), n)).epsilon(1e-13));
        CHECK(v.sum_squares(x.data(), n) ==
              doctest::Approx(s.sum_squares(x.data(), n)).epsilon(1e-13));

        std::vector<double> a1(n), a2(n);
        s.add(x.data(), y.data(), a1.data(), n);
        v.add(x.data(), y.data(), a2.data(), n);
        CHECK(a1 == a2);
        s.sub(x.data(), y.data(), a1.data(), n);
        v.sub(x.data(), y.data(), a2.data(), n);
        CHECK(a1 == a2);
        s.mul(x.data(), y.data(), a1.data(), n);
        v.mul(x.data(), y.data(), a2.data(), n);
        CHECK(a1 == a2);
        s.scale(x.data(), 1.7, a1.data(), n);
        v.scale(x.data(), 1.7, a2.data(), n);
        CHECK(a1 == a2);
        s.relu(x.data(), a1.data(), n);
        v.relu(x.data(), a2.data(), n);
        CHECK(a1 == a2);

        auto g1 = random_vec(n, gen);
        auto g2 = g1;
        s.relu_backward(x.data(), y.data(), g1.data(), n);
        v.relu_backward(x.data(), y.data(), g2.data(), n);
        CHECK(g1 == g2);

        auto acc1 = random_vec(n, gen);
        auto acc2 = acc1;
        s.axpy(-0.3, x.data(), acc1.data(), n);
        v.axpy(-0.3, x.data(), acc2.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            // axpy may fuse multiply-add on the vector path; one rounding
            // step of difference per element is the worst case.
            CHECK(acc1[i] == doctest::Approx(acc2[i]).epsilon(1e-15));
        }
    }
}

TEST_CASE("relu handles signed zero and boundary values") {
    const Backend& s = scalar();
    const Backend& v = avx2();
    std::vector<double> x = {-0.0, 0.0, 1e-300, -1e-300, 1e300, -1e300};
    std::vector<double> o1(x.size()), o2(x.size());
    s.relu(x.data(), o1.data(), x.size());
    v.relu(x.data(), o2.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(o1[i] == o2[i]);
        CHECK(o1[i] == (x[i] > 0.0 ? x[i] : 0.0));
    }
}

TEST_CASE("active backend is one of the two published backends") {
    const Backend& a = active();
    const bool is_scalar = a.name == std::string(scalar().name);
    const bool is_avx2 = a.name == std::string(avx2().name);
    CHECK((is_scalar || is_avx2));
    if (!avx2_available()) CHECK(std::string(avx2().name) == scalar().name);
}
