#ifndef PSI_DATAGEN_HPP
#define PSI_DATAGEN_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "psi/matrix.hpp"
#include "psi/rng.hpp"
#include "psi/train.hpp"

namespace psi {

struct DatasetTabular {
    Matrix features;            // N x D
    std::vector<double> target; // N; real values or {0,1} labels
    Task task = Task::regression;

    // Latent attribution record, for evaluation only. Empty when not generated.
    Matrix latent_mean; // N x D true per-feature mean components
    Matrix latent_draw; // N x D drawn attribution values (mean for deterministic ones)

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
    bool has_latent() const { return !latent_mean.empty(); }

    void validate() const;
};

/// Fresnel sine integral S(t) = integral_0^t sin(pi u^2 / 2) du.
double fresnel_s(double t);

/// The five synthetic regression processes (three uniform features on
/// (-4, 4), per-feature components, optional interactions and noise).
DatasetTabular gen_synth(int which, std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kSynthDefaultN = 8000;

/// True per-feature attribution mean / stddev of the first synthetic process.
double synth1_mean(std::size_t feature, double x);
double synth1_stddev(std::size_t feature, double x);

/// Synthetic binary-classification process: linear logit over three uniform
/// features, label drawn Bernoulli(logits = y). Artifact addition for the
/// classification path; the latent record stores per-feature logit components.
DatasetTabular gen_synth_class(std::size_t n, std::uint64_t seed);

struct Standardizer {
    std::vector<double> feature_mean;
    std::vector<double> feature_stddev;
    bool standardize_target = false;
    double target_mean = 0.0;
    double target_stddev = 1.0;

    void apply(DatasetTabular& data) const;
    void invert(DatasetTabular& data) const;
    double apply_target(double y) const {
        return standardize_target ? (y - target_mean) / target_stddev : y;
    }
    double invert_target(double y) const {
        return standardize_target ? y * target_stddev + target_mean : y;
    }
};

/// Column statistics from the given rows only (training folds); the target is
/// standardized for regression tasks. Constant columns are refused.
Standardizer fit_standardizer(const DatasetTabular& data, std::span<const std::size_t> rows);

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Disjoint near-equal folds covering every row, deterministic under seed.
std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed);

DatasetTabular select_rows(const DatasetTabular& data, std::span<const std::size_t> rows);

} // namespace psi

#endif
