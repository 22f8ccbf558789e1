#ifndef PSI_METRICS_HPP
#define PSI_METRICS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "psi/model.hpp"
#include "psi/rng.hpp"

namespace psi {

double rmse(std::span<const double> predictions, std::span<const double> targets);

/// Area under the precision-recall curve by average precision over the
/// descending-score ranking. Labels must contain both classes.
double pr_auc(std::span<const double> scores, std::span<const double> labels);

/// Probabilistic attribution report for one instance: att_d(z) = f_d + z sigma_d,
/// standardized per instance to [0, 1], ranked descending (rank 1 = largest).
struct AttributionEntry {
    double z = 0.0;
    std::vector<double> att;
    std::vector<double> att_std;
    std::vector<std::size_t> rank; // 1-based, permutation of 1..D
    bool degenerate = false;       // sup == inf; att_std all zero
};

struct AttributionReport {
    std::vector<double> f;
    std::vector<double> sigma;
    std::vector<AttributionEntry> per_z;
};

AttributionReport attribute(const PsiModel& model, std::span<const double> x,
                            std::span<const double> z_values);

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
};

/// Attribution precision/recall/F against binary ground-truth masks.
/// att_std and masks are per instance (aligned); instances with an empty mask
/// contribute to the false-positive mean only.
PrfResult attribution_prf(const std::vector<std::vector<double>>& att_std,
                          const std::vector<std::vector<std::uint8_t>>& masks);

struct JDivergenceConfig {
    std::size_t bin_draws = 20;
    std::size_t bin_min = 10;
    std::size_t bin_max = 200;
    std::size_t samples_per_side = 4096;
    std::uint64_t seed = 0;
};

/// Symmetrized histogram KL between two sample sets (rows = samples), with a
/// fixed per-dimension bin count over the union range and additive smoothing
/// over the occupied cells.
double j_divergence_histogram(const Matrix& lhs, const Matrix& rhs, std::size_t bins);

/// Average of j_divergence_histogram over sampled bin counts.
double j_divergence_samples(const Matrix& lhs, const Matrix& rhs,
                            const JDivergenceConfig& config);

inline constexpr std::size_t kJDivergenceMaxFeatures = 10;

/// Coalition-weighted divergence between empirical joints [y, x_s] and model
/// joints [y_hat, x_s] with y_hat drawn from the model marginal, summed over
/// every pivot and coalition with Shapley-kernel weights.
double j_divergence_protocol(const PsiModel& model, const Matrix& inputs,
                             std::span<const double> targets,
                             const JDivergenceConfig& config);

} // namespace psi

#endif
