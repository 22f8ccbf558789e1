#ifndef PSI_TRAIN_HPP
#define PSI_TRAIN_HPP

#include <functional>
#include <iosfwd>
#include <optional>

#include "psi/elbo.hpp"

namespace psi {

enum class Task { regression, classification };
enum class RemovalMode { bernoulli, shapley };

Task task_from_string(const std::string& s);
std::string to_string(Task t);
RemovalMode removal_mode_from_string(const std::string& s);
std::string to_string(RemovalMode m);

struct TrainConfig {
    std::size_t batch_size = 256;
    RemovalMode removal_mode = RemovalMode::bernoulli;
    double removal_p = 0.5; // per-feature retention probability (bernoulli mode)
    double beta = 0.0;
    std::size_t epochs = 300;
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    Task task = Task::regression;
    std::size_t coalition_draws_1 = 1;
    std::size_t coalition_draws_2 = 1;
    std::size_t eval_subsample = 2048;
    /// Global L2 gradient-norm cap applied before each optimizer step;
    /// 0 disables. Tames the heavy tail of the single-draw attribution
    /// regularizer (its denominator holds squared per-feature scales).
    double grad_clip_norm = 0.0;

    /// Test hook: sees every removal mask as it is drawn.
    std::function<void(std::size_t epoch, std::size_t row, const RemovalMask&)> mask_observer;

    void validate(std::size_t d_count) const;
};

struct TrainTrace {
    std::vector<double> loss;                 // per epoch
    std::vector<std::vector<double>> mean_fd; // per epoch, D entries
    std::vector<double> seconds;              // per epoch

    std::size_t epochs_completed() const { return loss.size(); }
};

/// bernoulli(p): features retained independently; shapley: retained-set size
/// uniform on {0..D} then a uniform subset of that size.
RemovalMask sample_removal_mask(std::size_t d_count, RemovalMode mode, double p, Rng& rng);

/// One pass over shuffled mini-batches: draw removal masks, coalitions and
/// pivots, minimize the task's bound, step the optimizer. Returns mean loss.
double train_epoch(PsiModel& model, const Matrix& inputs, std::span<const double> targets,
                   const TrainConfig& config, Rng& rng, Optimizer& optimizer,
                   std::size_t epoch_index = 0);

/// Fixed-epoch training. Per epoch the trace records the mean loss, the mean
/// per-feature output over a fixed full-feature subsample (at most
/// eval_subsample rows), and wall time. Optional stream receives one CSV row
/// per epoch: epoch,loss,mean_f1..fD,seconds.
TrainTrace fit(PsiModel& model, const Matrix& inputs, std::span<const double> targets,
               const TrainConfig& config, std::ostream* trace_stream = nullptr);

/// Column means of a full-feature forward over the first rows of the data.
std::vector<double> mean_feature_outputs(const PsiModel& model, const Matrix& inputs,
                                         std::size_t max_rows);

} // namespace psi

#endif
