#ifndef PSI_TRUNC_NORMAL_HPP
#define PSI_TRUNC_NORMAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include "psi/gauss.hpp"
#include "psi/tape.hpp"

namespace psi {

using std::exp;
using std::log;
using std::sqrt;

/// One-time stderr note when a truncated-normal normalizer underflows and is
/// clamped (extreme logits).
void note_normalizer_clamp();

inline constexpr double kPsiFloor = 1e-300;

// Scalar helpers so the formulas below instantiate for both double and Var.
inline double square(double x) { return x * x; }
inline double clamp_min_value(double x, double lo) {
    if (x < lo) {
        note_normalizer_clamp();
        return lo;
    }
    return x;
}
inline Var clamp_min_value(Var x, double lo) {
    return x.tape->clamp(x, lo, std::numeric_limits<double>::infinity());
}
inline double clamp_to_unit(double x) { return std::clamp(x, kPsiFloor, 1.0 - 1e-15); }
inline Var clamp_to_unit(Var x) { return x.tape->clamp(x, kPsiFloor, 1.0 - 1e-15); }
inline double normal_icdf(double p) { return normal_quantile(p); }

template <class T>
struct TruncStatsT {
    T psi;      // normalizer: mass of N(mu, sigma^2) on the selected half-line
    T omega;    // (-1)^label * (mu/sigma) * pdf(mu/sigma) / psi
    T mean;     // m
    T variance; // v^2
    T entropy;  // H
};

using TruncStats = TruncStatsT<double>;

/// Mass of N(mu, sigma^2) on y > 0 (label 1) or y <= 0 (label 0).
template <class T>
T trunc_normalizer(int label, T mu, T sigma) {
    const double sign = label == 1 ? 1.0 : -1.0;
    T a = mu / sigma;
    return clamp_min_value(normal_cdf(a * sign), kPsiFloor);
}

/// Closed-form statistics of the half-line truncated normal, in the regular
/// inverse-Mills form (finite at mu = 0).
template <class T>
TruncStatsT<T> trunc_stats(int label, T mu, T sigma) {
    const double sign = label == 1 ? 1.0 : -1.0;
    TruncStatsT<T> out;
    T a = mu / sigma;
    out.psi = clamp_min_value(normal_cdf(a * sign), kPsiFloor);
    T pdf_a = exp(square(a) * -0.5) * kInvSqrtTwoPi;
    T lambda = pdf_a / out.psi; // inverse Mills ratio
    out.omega = a * lambda * -sign;
    out.mean = mu + sigma * lambda * sign;
    out.variance = square(sigma) * (1.0 - a * lambda * sign - square(lambda));
    out.entropy = 0.5 * log(square(sigma) * (kTwoPi * 2.718281828459045235360287471353)) +
                  log(out.psi) - a * lambda * (0.5 * sign);
    return out;
}

/// Expectation over the truncated distribution of the untruncated log-density
/// log N(y; mu, sigma^2); the cross-entropy term of the classification bound.
template <class T>
T trunc_cross_entropy(const TruncStatsT<T>& stats, T mu, T sigma) {
    T var = square(sigma);
    return -0.5 * log(var * kTwoPi) -
           (stats.variance + square(stats.mean - mu)) / (var * 2.0);
}

template <class T>
T trunc_cross_entropy(int label, T mu, T sigma) {
    return trunc_cross_entropy(trunc_stats(label, mu, sigma), mu, sigma);
}

/// Inverse-transform draw from the half-line truncated normal; differentiable
/// in (mu, sigma) for reparameterized gradients. The sample sign matches the
/// label (y > 0 iff label = 1). The label-1 branch uses the complementary
/// quantile so the CDF argument never cancels against 1.
template <class T>
T trunc_sample(int label, T mu, T sigma, double u) {
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    T psi = trunc_normalizer(label, mu, sigma);
    if (label == 1) {
        return mu - sigma * normal_icdf(clamp_to_unit(psi * (1.0 - u)));
    }
    return mu + sigma * normal_icdf(clamp_to_unit(psi * u));
}

} // namespace psi

#endif
