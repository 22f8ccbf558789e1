#include "psi/shapley.hpp"

#include <cmath>
#include <string>

namespace psi {

double shapley_kernel_weight(std::size_t subset_size, std::size_t d_count) {
    if (d_count == 0 || subset_size >= d_count) {
        throw std::domain_error("shapley_kernel_weight: subset size " +
                                std::to_string(subset_size) + " must be below D = " +
                                std::to_string(d_count));
    }
    // |S|!(D-|S|-1)!/D! = 1 / (D * C(D-1, |S|)).
    double binom = 1.0;
    for (std::size_t i = 1; i <= subset_size; ++i) {
        binom *= static_cast<double>(d_count - 1 - subset_size + i) / static_cast<double>(i);
    }
    return 1.0 / (static_cast<double>(d_count) * binom);
}

BatchSubsetValue batch_from_scalar(SubsetValue f) {
    return [f = std::move(f)](std::span<const double> x,
                              const std::vector<RemovalMask>& masks) {
        std::vector<double> out;
        out.reserve(masks.size());
        for (const RemovalMask& m : masks) out.push_back(f(x, m));
        return out;
    };
}

ShapleyResult exact_shapley_all(const BatchSubsetValue& f, std::span<const double> x,
                                std::size_t d_count) {
    if (d_count == 0 || d_count > kExactShapleyMaxFeatures) {
        throw CapacityError("exact_shapley: D = " + std::to_string(d_count) +
                            " outside supported range 1.." +
                            std::to_string(kExactShapleyMaxFeatures));
    }
    const std::uint32_t n_subsets = 1u << d_count;
    std::vector<double> values(n_subsets);

    constexpr std::uint32_t kChunk = 4096;
    std::vector<RemovalMask> masks;
    for (std::uint32_t begin = 0; begin < n_subsets; begin += kChunk) {
        const std::uint32_t end = std::min(begin + kChunk, n_subsets);
        masks.clear();
        for (std::uint32_t t = begin; t < end; ++t) {
            masks.push_back(FeatureSubset{t}.to_mask(d_count));
        }
        std::vector<double> chunk = f(x, masks);
        for (std::uint32_t t = begin; t < end; ++t) values[t] = chunk[t - begin];
    }

    std::vector<double> weight(d_count);
    for (std::size_t s = 0; s < d_count; ++s) weight[s] = shapley_kernel_weight(s, d_count);

    ShapleyResult result;
    result.phi.assign(d_count, 0.0);
    result.f_full = values[n_subsets - 1];
    result.f_empty = values[0];
    for (std::size_t d = 0; d < d_count; ++d) {
        const std::uint32_t bit = 1u << d;
        double phi = 0.0;
        for (std::uint32_t t = 0; t < n_subsets; ++t) {
            if (t & bit) continue;
            phi += weight[static_cast<std::size_t>(__builtin_popcount(t))] *
                   (values[t | bit] - values[t]);
        }
        result.phi[d] = phi;
    }
    return result;
}

ShapleyResult exact_shapley_all(const PsiModel& model, std::span<const double> x) {
    BatchSubsetValue f = [&model](std::span<const double> xx,
                                  const std::vector<RemovalMask>& masks) {
        Matrix inputs(masks.size(), xx.size());
        for (std::size_t i = 0; i < masks.size(); ++i) {
            for (std::size_t d = 0; d < xx.size(); ++d) inputs(i, d) = xx[d];
        }
        Matrix fm = model.forward_f(inputs, removal_matrix(masks));
        std::vector<double> out(masks.size(), 0.0);
        for (std::size_t i = 0; i < fm.rows(); ++i) {
            for (std::size_t j = 0; j < fm.cols(); ++j) out[i] += fm(i, j);
        }
        return out;
    };
    return exact_shapley_all(f, x, model.feature_count());
}

double exact_shapley(const SubsetValue& f, std::span<const double> x, std::size_t d_count,
                     std::size_t pivot) {
    return exact_shapley_all(batch_from_scalar(f), x, d_count).phi[pivot];
}

namespace {

FeatureSubset uniform_subset(std::vector<std::size_t>& candidates, std::size_t k, Rng& rng) {
    FeatureSubset s;
    const std::size_t n = candidates.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
        std::swap(candidates[i], candidates[j]);
        s.add(candidates[i]);
    }
    return s;
}

} // namespace

FeatureSubset sample_coalition(std::size_t pivot, std::size_t d_count, Rng& rng) {
    std::vector<std::size_t> candidates;
    candidates.reserve(d_count - 1);
    for (std::size_t d = 0; d < d_count; ++d) {
        if (d != pivot) candidates.push_back(d);
    }
    const std::size_t k = static_cast<std::size_t>(rng.uniform_below(d_count));
    return uniform_subset(candidates, k, rng);
}

FeatureSubset sample_coalition_within(const std::vector<std::size_t>& universe,
                                      std::size_t pivot, Rng& rng) {
    std::vector<std::size_t> candidates;
    candidates.reserve(universe.size());
    for (std::size_t d : universe) {
        if (d != pivot) candidates.push_back(d);
    }
    const std::size_t k = static_cast<std::size_t>(rng.uniform_below(candidates.size() + 1));
    return uniform_subset(candidates, k, rng);
}

double d_shap_exact(const PsiModel& model, std::span<const double> x) {
    const std::size_t D = model.feature_count();
    ShapleyResult oracle = exact_shapley_all(model, x);
    PsiModel::ForwardValues full = model.forward_one(x, RemovalMask::all_present(D));
    double total = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
        const double gap = oracle.phi[d] - full.f[d];
        const double sd = full.sigma[d];
        total += gap * gap / (2.0 * sd * sd);
    }
    return total;
}

double d_shap_hat_core(const SubsetValue& f_sum, std::span<const double> x,
                       const RemovalMask& retained, std::size_t pivot, double f_pivot,
                       double sigma_pivot, Rng& rng, std::size_t k1, std::size_t k2) {
    const std::vector<std::size_t> universe = retained.retained_indices();
    if (universe.empty()) return 0.0;
    const double d_prime = static_cast<double>(universe.size());
    const std::size_t d_count = retained.size();

    auto marginal_mean = [&](std::size_t k_draws) {
        double acc = 0.0;
        for (std::size_t k = 0; k < k_draws; ++k) {
            FeatureSubset s = sample_coalition_within(universe, pivot, rng);
            FeatureSubset s_with = s;
            s_with.add(pivot);
            acc += f_sum(x, s_with.to_mask(d_count)) - f_sum(x, s.to_mask(d_count));
        }
        return acc / static_cast<double>(k_draws);
    };

    const double term1 = marginal_mean(k1) - f_pivot;
    const double term2 = marginal_mean(k2) - f_pivot;
    return d_prime * std::fabs(term1 * term2) / (2.0 * sigma_pivot * sigma_pivot);
}

double d_shap_hat(const PsiModel& model, std::span<const double> x,
                  const RemovalMask& retained, Rng& rng, std::size_t k1, std::size_t k2) {
    const std::vector<std::size_t> universe = retained.retained_indices();
    if (universe.empty()) return 0.0;
    const std::size_t pivot = universe[rng.uniform_below(universe.size())];
    PsiModel::ForwardValues under_mask = model.forward_one(x, retained);
    SubsetValue f = [&model](std::span<const double> xx, const RemovalMask& m) {
        return model.f_sum(xx, m);
    };
    return d_shap_hat_core(f, x, retained, pivot, under_mask.f[pivot],
                           under_mask.sigma[pivot], rng, k1, k2);
}

} // namespace psi
