#include "star/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace star::stats {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_isf(double p) {
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    if (p >= 1.0) return -std::numeric_limits<double>::infinity();
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_quantile(double p) { return -normal_isf(p); }

double z_from_p(double p) { return std::clamp(normal_isf(p), -kZClip, kZClip); }

}  // namespace star::stats
