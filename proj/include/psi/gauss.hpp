#ifndef PSI_GAUSS_HPP
#define PSI_GAUSS_HPP

#include <cmath>
#include <functional>

namespace psi {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kSqrtTwoPi = 2.5066282746310005024157652848110;
inline constexpr double kInvSqrtTwoPi = 0.39894228040143267793994605993438;

inline double normal_pdf(double x) { return kInvSqrtTwoPi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485); }

/// Inverse standard normal CDF (Wichura's AS241 rational approximations,
/// accurate to near machine precision over (0,1)).
double normal_quantile(double p);

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 40);

} // namespace psi

#endif
