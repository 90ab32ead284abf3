#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace swlrt {

/// Standard normal CDF via erfc; absolute error well below 1e-12.
inline double norm_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal quantile, Wichura's PPND16 rational approximation
/// followed by one Newton step against norm_cdf.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("norm_quantile: p must lie in (0,1)");

  static constexpr double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2,
      1.9715909503065514427e3,  1.3731693765509461125e4,
      4.5921953931549871457e4,  6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static constexpr double b[8] = {
      1.0,                      4.2313330701600911252e1,
      6.8718700749205790830e2,  5.3941960214247511077e3,
      2.1213794301586595867e4,  3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static constexpr double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0,
      5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {
      1.0,                      2.05319162663775882187e0,
      1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0,
      1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {
      1.0,                      5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  auto horner = [](const double (&k)[8], double x) {
    double s = k[7];
    for (int i = 6; i >= 0; --i) s = s * x + k[i];
    return s;
  };

  const double q = p - 0.5;
  double x;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    x = q * horner(a, r) / horner(b, r);
  } else {
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = horner(c, r) / horner(d, r);
    } else {
      r -= 5.0;
      x = horner(e, r) / horner(f, r);
    }
    if (q < 0.0) x = -x;
  }

  const double dens = norm_pdf(x);
  if (dens > 1e-300) x -= (norm_cdf(x) - p) / dens;
  return x;
}

/// Lower-tail p-value of a standardized statistic.
inline double one_sided_p(double z) { return norm_cdf(z); }

/// 2 * (1 - Phi(|z|)), computed as erfc(|z|/sqrt(2)) to keep tail accuracy.
inline double two_sided_p(double z) {
  return std::erfc(std::fabs(z) / std::numbers::sqrt2);
}

}  // namespace swlrt
