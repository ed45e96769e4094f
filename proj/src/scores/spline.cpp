#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "star/scores.hpp"

namespace star::scores {
namespace {

constexpr int kDegree = 3;

double quantile(const std::vector<double>& sorted, double prob) {
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<double> SplineBasis::bspline_values(const std::vector<double>& t, double x) {
    const std::size_t count = t.size() - kDegree - 1;
    std::vector<double> out(count, 0.0);
    const double lo = t[kDegree];
    const double hi = t[count];
    x = std::clamp(x, lo, hi);
    // Knot span with t[span] <= x < t[span + 1]; the right end uses the last span.
    std::size_t span = kDegree;
    if (x >= hi) {
        span = count - 1;
        while (span > kDegree && t[span] == t[span + 1]) --span;
    } else {
        span = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    }
    double basis[kDegree + 1] = {1.0, 0.0, 0.0, 0.0};
    double left[kDegree + 1];
    double right[kDegree + 1];
    for (int j = 1; j <= kDegree; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom > 0.0 ? basis[r] / denom : 0.0;
            basis[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        basis[j] = saved;
    }
    for (int r = 0; r <= kDegree; ++r) out[span - kDegree + r] = basis[r];
    return out;
}

SplineBasis SplineBasis::fit(const engine::Dataset& data, int interior_knots) {
    if (interior_knots < 0) throw std::invalid_argument("spline: knot count must be >= 0");
    SplineBasis b;
    b.knots_.resize(data.dim);
    b.offset_.resize(data.dim);
    b.size_ = 1;
    std::vector<double> col(data.n);
    for (std::size_t j = 0; j < data.dim; ++j) {
        for (std::size_t i = 0; i < data.n; ++i) col[i] = data.covariates[i * data.dim + j];
        std::sort(col.begin(), col.end());
        const double lo = col.front();
        const double hi = col.back();
        b.offset_[j] = b.size_;
        if (!(hi > lo)) continue;
        std::vector<double> interior;
        for (int k = 1; k <= interior_knots; ++k) {
            const double v = quantile(col, static_cast<double>(k) / (interior_knots + 1));
            if (v > lo && v < hi && (interior.empty() || v > interior.back())) interior.push_back(v);
        }
        std::vector<double>& t = b.knots_[j];
        t.assign(kDegree + 1, lo);
        t.insert(t.end(), interior.begin(), interior.end());
        t.insert(t.end(), kDegree + 1, hi);
        b.size_ += t.size() - kDegree - 2;
    }
    return b;
}

void SplineBasis::row(std::span<const double> x, std::span<double> out) const {
    out[0] = 1.0;
    for (std::size_t j = 0; j < knots_.size(); ++j) {
        if (knots_[j].empty()) continue;
        const auto vals = bspline_values(knots_[j], x[j]);
        std::copy(vals.begin() + 1, vals.end(), out.begin() + offset_[j]);
    }
}

std::vector<double> SplineBasis::design(const engine::Dataset& data) const {
    std::vector<double> x(data.n * size_, 0.0);
    for (std::size_t i = 0; i < data.n; ++i)
        row(data.covariate(static_cast<Id>(i)), std::span<double>(x.data() + i * size_, size_));
    return x;
}

}  // namespace star::scores
