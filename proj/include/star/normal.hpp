#pragma once
// Standard normal distribution helpers.

namespace star::stats {

double normal_pdf(double x);
double normal_cdf(double x);
// 1 - Phi(x), accurate in the upper tail.
double normal_sf(double x);
double normal_quantile(double p);
// Phi^{-1}(1 - p), accurate for small p.
double normal_isf(double p);

inline constexpr double kZClip = 8.2;
// z = Phi^{-1}(1 - p) clipped to [-8.2, 8.2].
double z_from_p(double p);

}  // namespace star::stats
