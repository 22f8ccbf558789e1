// Test-only oracles: central finite differences, quadrature statistics of the
// half-line truncated normal, and a per-feature loop reference for the masked
// embedding network. These stay independent of the library paths they check.
#ifndef PSI_TESTS_ORACLES_HPP
#define PSI_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "psi/gauss.hpp"
#include "psi/model.hpp"
#include "psi/tape.hpp"

namespace psi::testing {

/// Largest mixed absolute/relative mismatch between analytic parameter
/// gradients and central finite differences of `loss_value` (which must
/// recompute the loss from current parameter values).
inline double max_gradient_mismatch(std::vector<Parameter*> params,
                                    const std::function<double()>& loss_value,
                                    const std::function<void()>& compute_gradients,
                                    double step = 1e-5) {
    for (Parameter* p : params) p->zero_grad();
    compute_gradients();
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->gradient);

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + step;
            const double up = loss_value();
            p->value[i] = saved - step;
            const double down = loss_value();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double ana = analytic[pi][i];
            const double denom = std::max({std::fabs(numeric), std::fabs(ana), 1.0});
            worst = std::max(worst, std::fabs(numeric - ana) / denom);
        }
    }
    for (Parameter* p : params) p->zero_grad();
    return worst;
}

struct TruncOracle {
    double psi;
    double mean;
    double variance;
    double entropy;
    double cross_entropy;
};

/// Quadrature statistics of N(mu, sigma^2) truncated to y > 0 (label 1) or
/// y <= 0 (label 0). Integrates the relative density phi(z)/phi(alpha) in
/// standardized coordinates so deep truncations (the density a thin spike
/// hugging the boundary) keep full relative precision; the entropy and
/// cross-entropy follow from the integrated log-moment E[z^2].
inline TruncOracle trunc_oracle_quadrature(int label, double mu, double sigma) {
    if (label == 0) {
        // Mirror symmetry: y -> -y maps the label-0 problem at mu onto the
        // label-1 problem at -mu.
        TruncOracle flipped = trunc_oracle_quadrature(1, -mu, sigma);
        flipped.mean = -flipped.mean;
        return flipped;
    }
    const double alpha = -mu / sigma; // truncation boundary in z units
    const double z_lo = alpha;
    const double z_hi = alpha > 1.0 ? alpha + 36.0 / alpha : std::max(alpha, 0.0) + 14.0;
    // Normalize at the in-interval mode so the integrand stays within [0, 1].
    const double z_mode = std::clamp(0.0, z_lo, z_hi);
    auto rel = [&](double z) { return std::exp(-0.5 * (z - z_mode) * (z + z_mode)); };

    const double tol = 1e-13 * std::max(1.0, z_hi - z_lo);
    const double i0 = adaptive_simpson(rel, z_lo, z_hi, tol);
    const double i1 =
        adaptive_simpson([&](double z) { return z * rel(z); }, z_lo, z_hi, tol);
    const double mean_z = i1 / i0;
    const double i2 = adaptive_simpson(
        [&](double z) { return (z - mean_z) * (z - mean_z) * rel(z); }, z_lo, z_hi, tol);
    const double var_z = i2 / i0;
    const double e_z2 = var_z + mean_z * mean_z;

    TruncOracle out;
    out.psi = normal_pdf(z_mode) * i0;
    out.mean = mu + sigma * mean_z;
    out.variance = sigma * sigma * var_z;
    // q(y) = phi(z) / (sigma * psi), so log q = -z^2/2 - log(sqrt(2pi) sigma psi).
    out.entropy = 0.5 * e_z2 + std::log(kSqrtTwoPi * sigma * out.psi);
    out.cross_entropy = -0.5 * e_z2 - std::log(kSqrtTwoPi * sigma);
    return out;
}

/// Loop reference for the embedding net: runs feature d through its own
/// sub-network sliced out of the masked layers.
inline std::vector<double> loop_embed_feature(const MaskedNet& net, double x_d,
                                              std::size_t feature) {
    std::vector<double> h = {x_d};
    std::vector<std::size_t> prev_band = {0}; // indices into the previous layer
    // Layer 0's input index for feature d is d itself.
    prev_band[0] = feature;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto [begin, end] = net.stack.bands[k][feature];
        const DenseLayer& layer = net.layers[k];
        std::vector<double> next(end - begin, 0.0);
        for (std::size_t j = begin; j < end; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < prev_band.size(); ++p) {
                acc += h[p] * layer.weight.value(prev_band[p], j) *
                       net.stack.masks[k](prev_band[p], j);
            }
            next[j - begin] = activate_scalar(layer.activation, acc + layer.bias.value[j]);
        }
        h = std::move(next);
        prev_band.resize(end - begin);
        for (std::size_t j = begin; j < end; ++j) prev_band[j - begin] = j;
    }
    return h;
}

/// Structurally null a feature: zero its first-layer weight band (constant
/// embedding), match the baseline to that constant, zero its output column.
inline void null_feature(PsiModel& model, std::size_t dead) {
    MaskedNet& net = model.menn1();
    const auto [begin, end] = net.stack.bands[0][dead];
    for (std::size_t l = begin; l < end; ++l) {
        for (std::size_t r = 0; r < net.layers[0].weight.value.rows(); ++r) {
            net.layers[0].weight.value(r, l) = 0.0;
        }
    }
    std::vector<double> probe(model.feature_count(), 0.123);
    Matrix z = model.embed_features(probe);
    for (std::size_t e = 0; e < model.embed_dim(); ++e) {
        model.baseline().value[dead * model.embed_dim() + e] = z(dead, e);
    }
    DenseLayer& out = model.f_head().back();
    for (std::size_t r = 0; r < out.weight.value.rows(); ++r) out.weight.value(r, dead) = 0.0;
    out.bias.value[dead] = 0.0;
}

/// Make features a and b interchangeable: shared embedding sub-net, baseline,
/// reducer block and f-head output column. Band widths must match.
inline void make_symmetric(PsiModel& model, std::size_t a, std::size_t b) {
    MaskedNet& net = model.menn1();
    const std::size_t Dz = model.embed_dim();
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto [ab, ae] = net.stack.bands[k][a];
        const auto [bb, be] = net.stack.bands[k][b];
        const auto [pab, pae] =
            k == 0 ? std::pair<std::size_t, std::size_t>{a, a + 1} : net.stack.bands[k - 1][a];
        const auto [pbb, pbe] =
            k == 0 ? std::pair<std::size_t, std::size_t>{b, b + 1} : net.stack.bands[k - 1][b];
        if (ae - ab != be - bb || pae - pab != pbe - pbb) {
            throw std::logic_error("make_symmetric: band widths differ");
        }
        for (std::size_t i = 0; i < pae - pab; ++i) {
            for (std::size_t j = 0; j < ae - ab; ++j) {
                net.layers[k].weight.value(pbb + i, bb + j) =
                    net.layers[k].weight.value(pab + i, ab + j);
            }
        }
        for (std::size_t j = 0; j < ae - ab; ++j) {
            net.layers[k].bias.value[bb + j] = net.layers[k].bias.value[ab + j];
        }
    }
    for (std::size_t e = 0; e < Dz; ++e) {
        model.baseline().value[b * Dz + e] = model.baseline().value[a * Dz + e];
    }
    for (std::size_t e = 0; e < Dz; ++e) {
        for (std::size_t c = 0; c < model.reducer().weight.value.cols(); ++c) {
            model.reducer().weight.value(b * Dz + e, c) =
                model.reducer().weight.value(a * Dz + e, c);
        }
    }
    DenseLayer& out = model.f_head().back();
    for (std::size_t r = 0; r < out.weight.value.rows(); ++r) {
        out.weight.value(r, b) = out.weight.value(r, a);
    }
    out.bias.value[b] = out.bias.value[a];
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

} // namespace psi::testing

#endif
