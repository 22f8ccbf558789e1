#include "psi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "psi/elbo.hpp"
#include "psi/shapley.hpp"

namespace psi {

double rmse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty() || predictions.size() != targets.size()) {
        throw std::domain_error("rmse: inputs empty or mismatched");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double r = predictions[i] - targets[i];
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

double pr_auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw std::domain_error("pr_auc: inputs empty or mismatched");
    }
    std::size_t positives = 0;
    for (double l : labels) positives += l > 0.5 ? 1 : 0;
    if (positives == 0 || positives == labels.size()) {
        throw std::domain_error("pr_auc: labels contain a single class");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0;
    std::size_t seen_pos = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]] > 0.5) {
            ++seen_pos;
            ap += static_cast<double>(seen_pos) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(positives);
}

AttributionReport attribute(const PsiModel& model, std::span<const double> x,
                            std::span<const double> z_values) {
    const std::size_t D = model.feature_count();
    PsiModel::ForwardValues fw = model.forward_one(x, RemovalMask::all_present(D));

    AttributionReport report;
    report.f.assign(fw.f.data(), fw.f.data() + D);
    report.sigma.assign(fw.sigma.data(), fw.sigma.data() + D);

    for (double z : z_values) {
        AttributionEntry entry;
        entry.z = z;
        entry.att.resize(D);
        for (std::size_t d = 0; d < D; ++d) {
            entry.att[d] = report.f[d] + z * report.sigma[d];
        }
        const auto [lo_it, hi_it] = std::minmax_element(entry.att.begin(), entry.att.end());
        const double lo = *lo_it, hi = *hi_it;
        entry.att_std.resize(D);
        if (hi - lo <= 0.0) {
            entry.degenerate = true;
            std::fill(entry.att_std.begin(), entry.att_std.end(), 0.0);
        } else {
            for (std::size_t d = 0; d < D; ++d) {
                entry.att_std[d] = (entry.att[d] - lo) / (hi - lo);
            }
        }
        std::vector<std::size_t> order(D);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return entry.att[a] > entry.att[b];
        });
        entry.rank.resize(D);
        for (std::size_t pos = 0; pos < D; ++pos) entry.rank[order[pos]] = pos + 1;
        report.per_z.push_back(std::move(entry));
    }
    return report;
}

PrfResult attribution_prf(const std::vector<std::vector<double>>& att_std,
                          const std::vector<std::vector<std::uint8_t>>& masks) {
    if (att_std.size() != masks.size() || att_std.empty()) {
        throw std::domain_error("attribution_prf: inputs empty or mismatched");
    }
    double tp_sum = 0.0, fn_sum = 0.0, fp_sum = 0.0;
    std::size_t tp_count = 0, fp_count = 0;
    for (std::size_t i = 0; i < att_std.size(); ++i) {
        const auto& a = att_std[i];
        const auto& m = masks[i];
        if (a.size() != m.size()) {
            throw std::domain_error("attribution_prf: instance shape mismatch");
        }
        double on = 0.0, on_miss = 0.0, off = 0.0;
        std::size_t n_on = 0, n_off = 0;
        for (std::size_t d = 0; d < a.size(); ++d) {
            if (m[d]) {
                on += a[d];
                on_miss += 1.0 - a[d];
                ++n_on;
            } else {
                off += a[d];
                ++n_off;
            }
        }
        if (n_on > 0) {
            tp_sum += on / static_cast<double>(n_on);
            fn_sum += on_miss / static_cast<double>(n_on);
            ++tp_count;
        }
        if (n_off > 0) {
            fp_sum += off / static_cast<double>(n_off);
            ++fp_count;
        }
    }
    const double tp = tp_count > 0 ? tp_sum / static_cast<double>(tp_count) : 0.0;
    const double fn = tp_count > 0 ? fn_sum / static_cast<double>(tp_count) : 0.0;
    const double fp = fp_count > 0 ? fp_sum / static_cast<double>(fp_count) : 0.0;

    PrfResult out;
    out.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    out.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    out.f_measure = out.precision + out.recall > 0.0
                        ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                        : 0.0;
    return out;
}

namespace {

struct CellCounts {
    int lhs = 0;
    int rhs = 0;
};

double kl_over_cells(const std::map<std::vector<std::uint16_t>, CellCounts>& cells,
                     double n_q, double n_p, double eps, bool q_is_lhs) {
    // Smoothing over the occupied union; cells empty on both sides carry no
    // probability on either side and drop out of both KL sums.
    const double cell_count = static_cast<double>(cells.size());
    const double qz = n_q + eps * cell_count;
    const double pz = n_p + eps * cell_count;
    double kl = 0.0;
    for (const auto& [key, c] : cells) {
        const double cq = q_is_lhs ? c.lhs : c.rhs;
        const double cp = q_is_lhs ? c.rhs : c.lhs;
        const double q = (cq + eps) / qz;
        const double p = (cp + eps) / pz;
        kl += q * std::log(q / p);
    }
    return kl;
}

} // namespace

double j_divergence_histogram(const Matrix& lhs, const Matrix& rhs, std::size_t bins) {
    if (bins < 2) throw std::domain_error("j_divergence_histogram: need at least 2 bins");
    if (lhs.cols() != rhs.cols() || lhs.rows() == 0 || rhs.rows() == 0) {
        throw std::domain_error("j_divergence_histogram: inputs empty or mismatched");
    }
    const std::size_t dims = lhs.cols();
    std::vector<double> lo(dims), hi(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        double mn = lhs(0, d), mx = lhs(0, d);
        for (std::size_t i = 0; i < lhs.rows(); ++i) {
            mn = std::min(mn, lhs(i, d));
            mx = std::max(mx, lhs(i, d));
        }
        for (std::size_t i = 0; i < rhs.rows(); ++i) {
            mn = std::min(mn, rhs(i, d));
            mx = std::max(mx, rhs(i, d));
        }
        lo[d] = mn;
        hi[d] = mx;
    }

    auto cell_of = [&](const Matrix& m, std::size_t row) {
        std::vector<std::uint16_t> key(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            if (hi[d] <= lo[d]) {
                key[d] = 0;
                continue;
            }
            const double t = (m(row, d) - lo[d]) / (hi[d] - lo[d]);
            auto b = static_cast<long long>(t * static_cast<double>(bins));
            if (b < 0) b = 0;
            if (b >= static_cast<long long>(bins)) b = static_cast<long long>(bins) - 1;
            key[d] = static_cast<std::uint16_t>(b);
        }
        return key;
    };

    std::map<std::vector<std::uint16_t>, CellCounts> cells;
    for (std::size_t i = 0; i < lhs.rows(); ++i) cells[cell_of(lhs, i)].lhs += 1;
    for (std::size_t i = 0; i < rhs.rows(); ++i) cells[cell_of(rhs, i)].rhs += 1;

    constexpr double eps = 1e-10;
    const double nl = static_cast<double>(lhs.rows());
    const double nr = static_cast<double>(rhs.rows());
    const double kl_qp = kl_over_cells(cells, nl, nr, eps, true);
    const double kl_pq = kl_over_cells(cells, nr, nl, eps, false);
    return 0.5 * (kl_qp + kl_pq);
}

double j_divergence_samples(const Matrix& lhs, const Matrix& rhs,
                            const JDivergenceConfig& config) {
    Rng rng(config.seed);
    double acc = 0.0;
    for (std::size_t k = 0; k < config.bin_draws; ++k) {
        const std::size_t bins =
            config.bin_min + static_cast<std::size_t>(
                                 rng.uniform_below(config.bin_max - config.bin_min + 1));
        acc += j_divergence_histogram(lhs, rhs, bins);
    }
    return acc / static_cast<double>(config.bin_draws);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

double j_divergence_protocol(const PsiModel& model, const Matrix& inputs,
                             std::span<const double> targets,
                             const JDivergenceConfig& config) {
    const std::size_t D = model.feature_count();
    if (D > kJDivergenceMaxFeatures) {
        throw CapacityError("j_divergence_protocol: D = " + std::to_string(D) +
                            " exceeds the coalition-enumeration guard " +
                            std::to_string(kJDivergenceMaxFeatures));
    }
    if (inputs.cols() != D || inputs.rows() == 0 || inputs.rows() != targets.size()) {
        throw std::domain_error("j_divergence_protocol: bad data shapes");
    }
    const std::size_t N = inputs.rows();
    const std::size_t M = config.samples_per_side;

    struct Pair {
        std::size_t pivot;
        std::uint32_t coalition;
    };
    std::vector<Pair> pairs;
    for (std::size_t j = 0; j < D; ++j) {
        for (std::uint32_t s = 0; s < (1u << D); ++s) {
            if (s & (1u << j)) continue;
            pairs.push_back({j, s});
        }
    }

    std::vector<double> weighted(pairs.size(), 0.0);
    const long long P = static_cast<long long>(pairs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (max_threads() > 1)
#endif
    for (long long pi = 0; pi < P; ++pi) {
        const Pair pair = pairs[static_cast<std::size_t>(pi)];
        const FeatureSubset s{pair.coalition};
        const std::vector<std::size_t> cols = s.to_mask(D).retained_indices();
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(pi)));

        // Empirical joint [y, x_s].
        Matrix emp(M, cols.size() + 1);
        for (std::size_t i = 0; i < M; ++i) {
            const std::size_t row = static_cast<std::size_t>(rng.uniform_below(N));
            emp(i, 0) = targets[row];
            for (std::size_t c = 0; c < cols.size(); ++c) {
                emp(i, c + 1) = inputs(row, cols[c]);
            }
        }

        // Model joint [y_hat, x_s] with y_hat ~ N(mu(x_s), var(x_s)).
        Matrix cond_x(M, D);
        std::vector<std::size_t> cond_rows(M);
        for (std::size_t i = 0; i < M; ++i) {
            const std::size_t row = static_cast<std::size_t>(rng.uniform_below(N));
            cond_rows[i] = row;
            for (std::size_t d = 0; d < D; ++d) cond_x(i, d) = inputs(row, d);
        }
        Matrix mask_rows(M, D);
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t d = 0; d < D; ++d) {
                mask_rows(i, d) = s.contains(d) ? 1.0 : 0.0;
            }
        }
        PsiModel::ForwardValues fw = model.forward(cond_x, mask_rows);
        const double phi0 = model.phi0().value[0];
        const double sigma0 = model.sigma0();
        Matrix mod(M, cols.size() + 1);
        for (std::size_t i = 0; i < M; ++i) {
            double mu = phi0;
            double var = sigma0 * sigma0;
            for (std::size_t d = 0; d < D; ++d) {
                mu += fw.f(i, d);
                var += fw.sigma(i, d) * fw.sigma(i, d);
            }
            mod(i, 0) = mu + std::sqrt(var) * rng.normal();
            for (std::size_t c = 0; c < cols.size(); ++c) {
                mod(i, c + 1) = cond_x(i, cols[c]);
            }
        }

        JDivergenceConfig bin_cfg = config;
        bin_cfg.seed = mix_seed(config.seed, 0x5eedull + static_cast<std::uint64_t>(pi));
        const double j = j_divergence_samples(emp, mod, bin_cfg);
        weighted[static_cast<std::size_t>(pi)] =
            shapley_kernel_weight(s.cardinality(), D) * j / static_cast<double>(D);
    }

    double total = 0.0;
    for (double w : weighted) total += w;
    return total;
}

} // namespace psi
