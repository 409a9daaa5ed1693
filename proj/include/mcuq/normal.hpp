#pragma once

namespace mcuq {

double normal_pdf(double x);
double normal_cdf(double x);
/// Φ⁻¹(prob) for prob in (0, 1).
double normal_quantile(double prob);

}  // namespace mcuq
