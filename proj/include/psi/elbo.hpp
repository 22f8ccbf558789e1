#ifndef PSI_ELBO_HPP
#define PSI_ELBO_HPP

#include <span>
#include <vector>

#include "psi/model.hpp"
#include "psi/shapley.hpp"
#include "psi/trunc_normal.hpp"

namespace psi {

/// Marginal Gaussian statistics of y | x with the attribution prior
/// integrated out: mu = phi0 + sum_d f_d, var = sigma0^2 + sum_d sigma_d^2.
struct GaussianStats {
    double mu = 0.0;
    double var = 1.0;
};

GaussianStats marginal_stats(std::span<const double> f_values,
                             std::span<const double> sigma_values, double phi0, double sigma0);

/// -log N(y; mu, var).
double nll_gaussian(const GaussianStats& stats, double y);

/// Cross-entropy term of the classification bound for the marginal stats.
double cross_entropy_logit(int label, const GaussianStats& stats);

/// All randomness a loss evaluation consumes, drawn up front so losses are
/// pure functions of (model, batch, plan).
struct InstancePlan {
    RemovalMask removal;
    std::size_t pivot = 0; // meaningful only when the retained set is nonempty
    std::vector<FeatureSubset> coalitions1;
    std::vector<FeatureSubset> coalitions2;
    double u = 0.5; // classification reparameterization draw
};

struct BatchPlan {
    std::vector<InstancePlan> instances;
};

/// Draw coalitions and pivots for masks that are already fixed. Per instance:
/// pivot uniform over the retained set, then k1 + k2 coalitions inside it,
/// then the uniform u draw (when classification).
void complete_plan(BatchPlan& plan, std::size_t k1, std::size_t k2, bool classification,
                   Rng& rng);

struct LossBuild {
    Var loss;                                 // 1x1, the value to minimize
    std::vector<double> per_instance;         // objective per row (diagnostics)
    std::vector<double> per_instance_dshap;   // Shapley-KL draw per row
};

/// Mean over the batch of [gaussian NLL + beta * stochastic Shapley KL];
/// minimizing it maximizes the regression bound.
LossBuild v_reg_loss(Tape& tape, PsiModel& model, const Matrix& inputs,
                     std::span<const double> targets, const BatchPlan& plan, double beta);

/// Classification bound: mean of -[log Bern(label; logits = y_sample)
/// + cross-entropy + entropy] + beta * Shapley KL, with one reparameterized
/// logit sample per instance.
LossBuild v_class_loss(Tape& tape, PsiModel& model, const Matrix& inputs,
                       std::span<const double> labels, const BatchPlan& plan, double beta);

} // namespace psi

#endif
