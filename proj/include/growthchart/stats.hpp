#pragma once

namespace growthchart {

// Standard normal CDF.
double normal_cdf(double x);

// Inverse standard normal CDF for p in (0, 1).  Rational initial guess
// refined by one Halley step, accurate to near machine precision.
double normal_quantile(double p);

}  // namespace growthchart
