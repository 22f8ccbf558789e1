#ifndef PSI_SHAPLEY_HPP
#define PSI_SHAPLEY_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "psi/model.hpp"
#include "psi/removal.hpp"
#include "psi/rng.hpp"

namespace psi {

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Coalition over [D]: a feature subset excluding some pivot feature.
struct FeatureSubset {
    std::uint32_t bits = 0;

    bool contains(std::size_t d) const { return (bits >> d) & 1u; }
    void add(std::size_t d) { bits |= (1u << d); }
    std::size_t cardinality() const { return static_cast<std::size_t>(__builtin_popcount(bits)); }

    RemovalMask to_mask(std::size_t d_count) const {
        RemovalMask m(d_count, false);
        for (std::size_t d = 0; d < d_count; ++d) m.set(d, contains(d));
        return m;
    }

    bool operator==(const FeatureSubset&) const = default;
};

/// Kernel weight |S|! (D - |S| - 1)! / D! for coalitions excluding one pivot.
/// Weights over all subsets of a (D-1)-element ground set sum to one.
double shapley_kernel_weight(std::size_t subset_size, std::size_t d_count);

/// f evaluated on one input under one removal mask.
using SubsetValue = std::function<double(std::span<const double>, const RemovalMask&)>;
/// f evaluated on one input under many removal masks at once.
using BatchSubsetValue =
    std::function<std::vector<double>(std::span<const double>, const std::vector<RemovalMask>&)>;

BatchSubsetValue batch_from_scalar(SubsetValue f);

struct ShapleyResult {
    std::vector<double> phi;
    double f_full = 0.0;
    double f_empty = 0.0;
};

/// Enumeration is 2^D forwards; larger inputs are refused.
inline constexpr std::size_t kExactShapleyMaxFeatures = 20;

/// Exact Shapley values of every feature by full coalition enumeration
/// (binary-counter order), reusing each subset evaluation across pivots.
ShapleyResult exact_shapley_all(const BatchSubsetValue& f, std::span<const double> x,
                                std::size_t d_count);
ShapleyResult exact_shapley_all(const PsiModel& model, std::span<const double> x);

double exact_shapley(const SubsetValue& f, std::span<const double> x, std::size_t d_count,
                     std::size_t pivot);

/// Coalition from the Shapley kernel law: size uniform on {0..D-1}, then a
/// uniform subset of that size from [D] minus the pivot.
FeatureSubset sample_coalition(std::size_t pivot, std::size_t d_count, Rng& rng);

/// Same law with the retained set as the universe. `universe` must contain
/// the pivot; the coalition is a subset of universe minus pivot.
FeatureSubset sample_coalition_within(const std::vector<std::size_t>& universe,
                                      std::size_t pivot, Rng& rng);

/// Exact Shapley KL divergence between the model's variational attribution
/// distribution and its own Shapley prior:
/// sum_d (phi_d - f_d(x))^2 / (2 sigma_d(x)^2), full-feature forward.
double d_shap_exact(const PsiModel& model, std::span<const double> x);

/// Single-draw stochastic estimate restricted to a retained feature set.
/// Draw order: pivot first, then the K1 coalitions, then the K2 coalitions.
/// An empty retained set contributes zero.
double d_shap_hat(const PsiModel& model, std::span<const double> x,
                  const RemovalMask& retained, Rng& rng, std::size_t k1 = 1,
                  std::size_t k2 = 1);

/// Variant for arbitrary predictors (component values supplied by the caller
/// under the retained mask).
double d_shap_hat_core(const SubsetValue& f_sum, std::span<const double> x,
                       const RemovalMask& retained, std::size_t pivot, double f_pivot,
                       double sigma_pivot, Rng& rng, std::size_t k1 = 1, std::size_t k2 = 1);

} // namespace psi

#endif
