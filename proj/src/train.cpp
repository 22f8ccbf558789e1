#include "psi/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace psi {

Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw std::invalid_argument("unknown task: " + s);
}

std::string to_string(Task t) {
    return t == Task::regression ? "regression" : "classification";
}

RemovalMode removal_mode_from_string(const std::string& s) {
    if (s == "bernoulli") return RemovalMode::bernoulli;
    if (s == "shapley") return RemovalMode::shapley;
    throw std::invalid_argument("unknown removal mode: " + s);
}

std::string to_string(RemovalMode m) {
    return m == RemovalMode::bernoulli ? "bernoulli" : "shapley";
}

void TrainConfig::validate(std::size_t d_count) const {
    if (batch_size == 0) throw ConfigError("train config: batch size must be at least 1");
    if (removal_mode == RemovalMode::bernoulli && (removal_p <= 0.0 || removal_p > 1.0)) {
        throw ConfigError("train config: removal probability must be in (0, 1]");
    }
    if (beta < 0.0) throw ConfigError("train config: beta must be nonnegative");
    if (coalition_draws_1 == 0 || coalition_draws_2 == 0) {
        throw ConfigError("train config: coalition draw counts must be positive");
    }
    if (d_count == 0) throw ConfigError("train config: data has no features");
}

RemovalMask sample_removal_mask(std::size_t d_count, RemovalMode mode, double p, Rng& rng) {
    RemovalMask mask(d_count, false);
    if (mode == RemovalMode::bernoulli) {
        for (std::size_t d = 0; d < d_count; ++d) mask.set(d, rng.uniform() < p);
        return mask;
    }
    // shapley mode: size uniform over {0..D}, then a uniform subset.
    const std::size_t k = static_cast<std::size_t>(rng.uniform_below(d_count + 1));
    std::vector<std::size_t> idx(d_count);
    for (std::size_t d = 0; d < d_count; ++d) idx[d] = d;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(d_count - i));
        std::swap(idx[i], idx[j]);
        mask.set(idx[i], true);
    }
    return mask;
}

namespace {

std::string diagnostic_dump(const PsiModel& model, const Matrix& inputs,
                            const BatchPlan& plan, std::span<const double> targets,
                            const std::vector<double>& per_instance) {
    for (std::size_t i = 0; i < per_instance.size(); ++i) {
        if (std::isfinite(per_instance[i])) continue;
        const std::size_t D = inputs.cols();
        std::vector<double> x(D);
        for (std::size_t d = 0; d < D; ++d) x[d] = inputs(i, d);
        PsiModel::ForwardValues fw = model.forward_one(x, plan.instances[i].removal);
        GaussianStats stats = marginal_stats(
            std::span<const double>(fw.f.data(), D),
            std::span<const double>(fw.sigma.data(), D), model.phi0().value[0],
            model.sigma0());
        return "instance " + std::to_string(i) + ": objective=" +
               std::to_string(per_instance[i]) + " target=" + std::to_string(targets[i]) +
               " mu=" + std::to_string(stats.mu) + " var=" + std::to_string(stats.var) +
               " retained=" + std::to_string(plan.instances[i].removal.retained_count());
    }
    return "no per-instance diagnostic available";
}

} // namespace

double train_epoch(PsiModel& model, const Matrix& inputs, std::span<const double> targets,
                   const TrainConfig& config, Rng& rng, Optimizer& optimizer,
                   std::size_t epoch_index) {
    const std::size_t N = inputs.rows();
    const std::size_t D = inputs.cols();
    config.validate(D);

    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<Parameter*> params = model.parameters();
    double loss_sum = 0.0;

    for (std::size_t begin = 0; begin < N; begin += config.batch_size) {
        const std::size_t end = std::min(begin + config.batch_size, N);
        const std::size_t B = end - begin;

        Matrix batch_x(B, D);
        std::vector<double> batch_y(B);
        for (std::size_t i = 0; i < B; ++i) {
            const std::size_t row = order[begin + i];
            for (std::size_t d = 0; d < D; ++d) batch_x(i, d) = inputs(row, d);
            batch_y[i] = targets[row];
        }

        BatchPlan plan;
        plan.instances.resize(B);
        for (std::size_t i = 0; i < B; ++i) {
            plan.instances[i].removal =
                sample_removal_mask(D, config.removal_mode, config.removal_p, rng);
            if (config.mask_observer) {
                config.mask_observer(epoch_index, order[begin + i], plan.instances[i].removal);
            }
        }
        complete_plan(plan, config.coalition_draws_1, config.coalition_draws_2,
                      config.task == Task::classification, rng);

        Tape tape;
        LossBuild build = config.task == Task::regression
                              ? v_reg_loss(tape, model, batch_x, batch_y, plan, config.beta)
                              : v_class_loss(tape, model, batch_x, batch_y, plan, config.beta);
        const double loss_value = tape.value(build.loss)[0];
        if (!std::isfinite(loss_value)) {
            throw NumericError(
                "train_epoch: non-finite loss in batch starting at shuffled index " +
                std::to_string(begin) + "; " +
                diagnostic_dump(model, batch_x, plan, batch_y, build.per_instance));
        }
        tape.backward(build.loss);
        if (config.grad_clip_norm > 0.0) {
            double norm_sq = 0.0;
            for (Parameter* p : params) {
                for (std::size_t i = 0; i < p->gradient.size(); ++i) {
                    norm_sq += p->gradient[i] * p->gradient[i];
                }
            }
            const double norm = std::sqrt(norm_sq);
            if (norm > config.grad_clip_norm) {
                const double scale = config.grad_clip_norm / norm;
                for (Parameter* p : params) {
                    for (std::size_t i = 0; i < p->gradient.size(); ++i) {
                        p->gradient[i] *= scale;
                    }
                }
            }
        }
        optimizer.step(params);
        loss_sum += loss_value * static_cast<double>(B);
    }
    return loss_sum / static_cast<double>(N);
}

std::vector<double> mean_feature_outputs(const PsiModel& model, const Matrix& inputs,
                                         std::size_t max_rows) {
    const std::size_t rows = std::min(inputs.rows(), max_rows);
    const std::size_t D = inputs.cols();
    Matrix sub(rows, D);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t d = 0; d < D; ++d) sub(i, d) = inputs(i, d);
    }
    Matrix f = model.forward_f(sub, Matrix(rows, D, 1.0));
    std::vector<double> mean(D, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t d = 0; d < D; ++d) mean[d] += f(i, d);
    }
    for (double& m : mean) m /= static_cast<double>(rows);
    return mean;
}

TrainTrace fit(PsiModel& model, const Matrix& inputs, std::span<const double> targets,
               const TrainConfig& config, std::ostream* trace_stream) {
    config.validate(inputs.cols());
    if (inputs.rows() != targets.size()) {
        throw ShapeError("fit: row count and target count differ");
    }
    Rng rng(config.seed);
    Optimizer optimizer(config.optimizer, config.learning_rate, config.weight_decay);

    TrainTrace trace;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const double loss = train_epoch(model, inputs, targets, config, rng, optimizer, epoch);
        std::vector<double> mean_fd = mean_feature_outputs(model, inputs, config.eval_subsample);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        trace.loss.push_back(loss);
        trace.mean_fd.push_back(mean_fd);
        trace.seconds.push_back(seconds);
        if (trace_stream != nullptr) {
            (*trace_stream) << epoch << ',' << loss;
            for (double m : mean_fd) (*trace_stream) << ',' << m;
            (*trace_stream) << ',' << seconds << '\n';
        }
    }
    return trace;
}

} // namespace psi
