#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "star/accum.hpp"

using star::accum::AccumulatorSpec;
using star::accum::Family;

namespace {

std::vector<AccumulatorSpec> families() {
    return {AccumulatorSpec::seqstep(0.3),
            AccumulatorSpec::seqstep(0.5),
            AccumulatorSpec::seqstep(0.7),
            AccumulatorSpec::forward_stop(),
            AccumulatorSpec::hinge_exp(0.5),
            AccumulatorSpec::hinge_exp(0.7),
            AccumulatorSpec::piecewise_constant({0.0, 0.4, 0.6, 1.0}, {0.0, 1.0, 3.0})};
}

// Composite Simpson on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
    const double step = (b - a) / n;
    double total = f(a) + f(b);
    for (int i = 1; i < n; ++i) total += f(a + i * step) * (i % 2 ? 4.0 : 2.0);
    return total * step / 3.0;
}

// Integral of h - 1 by quadrature, split at the kinks of each family.
double H_quadrature(const AccumulatorSpec& spec, double p) {
    std::vector<double> cuts{0.0};
    for (double k : {spec.pstar(), spec.flat_lo(), spec.flat_hi(), 0.4, 0.6, 0.99})
        if (k == k && k > 0.0 && k < p) cuts.push_back(k);
    if (spec.family() == Family::HingeExp) {
        const double cp = 1.0 - (1.0 - spec.pstar()) * std::exp(-spec.cap() * (1.0 - spec.pstar()));
        if (cp < p) cuts.push_back(cp);
    }
    cuts.push_back(p);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b - a < 1e-15) continue;
        const double eps = 1e-13;
        total += simpson([&](double x) { return spec.h(x) - 1.0; }, a + eps, b - eps, 2000);
    }
    return total;
}

}  // namespace

TEST_CASE("seqstep closed forms") {
    const auto s = AccumulatorSpec::seqstep(0.5);
    CHECK(s.h(0.2) == 0.0);
    CHECK(s.h(0.8) == doctest::Approx(2.0));
    CHECK(s.h_max() == doctest::Approx(2.0));
    CHECK(s.s(0.8) == doctest::Approx(0.2));
    CHECK(s.s(0.2) == doctest::Approx(0.8));
    CHECK(s.mask(0.8) == doctest::Approx(0.2));
    CHECK(s.mask(0.3) == doctest::Approx(0.3));
    CHECK(s.fixed_point() == doctest::Approx(0.5));
    CHECK(s.H(0.5) == doctest::Approx(-0.5));
    CHECK(s.H(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.s_derivative(0.2) == doctest::Approx(-1.0));

    const auto s3 = AccumulatorSpec::seqstep(0.3);
    // s(p) = p* (1 - p) / (1 - p*) on the upper branch
    CHECK(s3.s(0.65) == doctest::Approx(0.3 * 0.35 / 0.7));
    CHECK(s3.s_derivative(0.1) == doctest::Approx(-0.7 / 0.3));

    const auto pair = s.unmask_pair(0.2);
    CHECK(pair.low == doctest::Approx(0.2));
    CHECK(pair.high == doctest::Approx(0.8));
}

TEST_CASE("fdp estimate") {
    const auto s = AccumulatorSpec::seqstep(0.5);
    CHECK(s.fdp_hat(4.0, 9) == doctest::Approx(0.6));
    CHECK(s.fdp_hat(0.0, 0) == doctest::Approx(2.0));
}

TEST_CASE("forward stop normalization") {
    const auto f = AccumulatorSpec::forward_stop();
    CHECK(f.cap() == doctest::Approx(-std::log(0.01)));
    CHECK(std::abs(f.norm() - 0.99) <= 1e-12);
    CHECK(f.h(0.5) == doctest::Approx(std::log(2.0) / 0.99));
    CHECK(f.h(0.999) == doctest::Approx(-std::log(0.01) / 0.99));
}

TEST_CASE("every family integrates to one and H vanishes at the ends") {
    for (const auto& spec : families()) {
        CAPTURE(star::accum::to_string(spec.family()));
        CHECK(H_quadrature(spec, 1.0) == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(std::abs(spec.H(0.0)) <= 1e-12);
        CHECK(std::abs(spec.H(1.0)) <= 1e-9);
        for (double p : {0.05, 0.25, 0.45, 0.55, 0.75, 0.95})
            CHECK(spec.H(p) == doctest::Approx(H_quadrature(spec, p)).epsilon(1e-6));
    }
}

TEST_CASE("reflection is an involution that preserves H") {
    for (const auto& spec : families()) {
        CAPTURE(star::accum::to_string(spec.family()));
        double worst_h = 0.0, worst_s = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            const double p = i / 2000.0;
            const double q = spec.s(p);
            CHECK(q >= 0.0);
            CHECK(q <= 1.0);
            worst_h = std::max(worst_h, std::abs(spec.H(q) - spec.H(p)));
            worst_s = std::max(worst_s, std::abs(spec.s(q) - p));
            CHECK(spec.mask(p) <= spec.fixed_point() + 1e-12);
            CHECK(spec.mask(p) == std::min(p, q));
        }
        CHECK(worst_h <= 1e-9);
        CHECK(worst_s <= 1e-8);
    }
}

TEST_CASE("unmask pair maps back to the masked value") {
    for (const auto& spec : families()) {
        CAPTURE(star::accum::to_string(spec.family()));
        for (double q : {0.01, 0.1, 0.2, 0.29}) {
            const auto pr = spec.unmask_pair(q);
            CHECK(pr.low == doctest::Approx(q));
            CHECK(spec.mask(pr.high) == doctest::Approx(q).epsilon(1e-8));
            CHECK(pr.high >= spec.fixed_point());
        }
    }
}

TEST_CASE("masking condition holds in g-bins") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 200000, bins = 10;
    std::vector<double> p(n), g(n), h(n);
    for (const auto& spec : families()) {
        CAPTURE(star::accum::to_string(spec.family()));
        for (double& x : p) x = u(rng);
        spec.mask_all(p, g, h);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return g[a] < g[b]; });
        for (std::size_t b = 0; b < bins; ++b) {
            double total = 0.0;
            for (std::size_t k = b * n / bins; k < (b + 1) * n / bins; ++k) total += h[idx[k]];
            CHECK(total / (n / bins) == doctest::Approx(1.0).epsilon(0.05));
        }
    }
}

TEST_CASE("batch masking matches the pointwise functions") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(1000), g(1000), h(1000);
    for (double& x : p) x = u(rng);
    for (const auto& spec : families()) {
        spec.mask_all(p, g, h);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(g[i] == doctest::Approx(spec.mask(p[i])).epsilon(1e-14));
            CHECK(h[i] == doctest::Approx(spec.h(p[i])).epsilon(1e-14));
        }
    }
}

TEST_CASE("json round trip") {
    for (const auto& spec : families()) {
        nlohmann::json j = spec;
        const auto back = star::accum::accumulator_from_json(j);
        CHECK(back == spec);
    }
    CHECK_THROWS_AS(star::accum::accumulator_from_json({{"kind", "bogus"}}), std::invalid_argument);
    CHECK_THROWS_AS(star::accum::accumulator_from_json({{"kind", "hingeexp"}}), std::invalid_argument);
    CHECK_THROWS(AccumulatorSpec::seqstep(1.5));
}

TEST_CASE("knockoff one-bit p-values") {
    auto pos = star::accum::onebit_from_knockoff(2.5);
    CHECK(pos.p == 0.5);
    CHECK(pos.magnitude == 2.5);
    auto neg = star::accum::onebit_from_knockoff(-1.0);
    CHECK(neg.p == 1.0);
    CHECK(neg.magnitude == 1.0);
    CHECK(star::accum::onebit_from_knockoff(0.0).p == 1.0);
}
