#include "psi/elbo.hpp"

#include <cmath>

namespace psi {

GaussianStats marginal_stats(std::span<const double> f_values,
                             std::span<const double> sigma_values, double phi0,
                             double sigma0) {
    GaussianStats stats;
    double fsum = 0.0;
    for (double f : f_values) fsum += f;
    stats.mu = fsum + phi0;
    double vsum = 0.0;
    for (double s : sigma_values) vsum += s * s;
    stats.var = vsum + sigma0 * sigma0;
    return stats;
}

double nll_gaussian(const GaussianStats& stats, double y) {
    const double r = y - stats.mu;
    return 0.5 * std::log(kTwoPi * stats.var) + r * r / (2.0 * stats.var);
}

double cross_entropy_logit(int label, const GaussianStats& stats) {
    const double sigma = std::sqrt(stats.var);
    return trunc_cross_entropy(label, stats.mu, sigma);
}

void complete_plan(BatchPlan& plan, std::size_t k1, std::size_t k2, bool classification,
                   Rng& rng) {
    for (InstancePlan& inst : plan.instances) {
        const std::vector<std::size_t> universe = inst.removal.retained_indices();
        inst.coalitions1.assign(k1, FeatureSubset{});
        inst.coalitions2.assign(k2, FeatureSubset{});
        if (!universe.empty()) {
            inst.pivot = universe[rng.uniform_below(universe.size())];
            for (std::size_t k = 0; k < k1; ++k) {
                inst.coalitions1[k] = sample_coalition_within(universe, inst.pivot, rng);
            }
            for (std::size_t k = 0; k < k2; ++k) {
                inst.coalitions2[k] = sample_coalition_within(universe, inst.pivot, rng);
            }
        } else {
            inst.pivot = 0;
        }
        if (classification) inst.u = rng.uniform_open();
    }
}

namespace {

struct Marginals {
    Var mu;  // batch x 1
    Var var; // batch x 1
};

Marginals build_marginals(Tape& tape, PsiModel& model, Var f, Var sigma, std::size_t rows) {
    Var mu = tape.add(tape.rowsum(f), tape.bcast_rows(tape.leaf(model.phi0()), rows));
    Var sigma0_sq = tape.exp(tape.scale(tape.leaf(model.log_sigma0()), 2.0));
    Var var = tape.add(tape.rowsum(tape.square(sigma)), tape.bcast_rows(sigma0_sq, rows));
    return {mu, var};
}

/// Per-instance stochastic Shapley KL draws as a batch x 1 column, already
/// scaled by the retained-set size (zero rows for empty retained sets).
/// All coalition evaluations (with and without the pivot, both sample
/// groups) run as one stacked forward pass.
Var build_dshap(Tape& tape, PsiModel& model, const Matrix& inputs, const BatchPlan& plan,
                Var f_main, Var sigma_main) {
    const std::size_t B = plan.instances.size();
    const std::size_t D = inputs.cols();
    const std::size_t k1 = plan.instances.front().coalitions1.size();
    const std::size_t k2 = plan.instances.front().coalitions2.size();
    const std::size_t blocks = 2 * (k1 + k2); // with/without per coalition draw

    Matrix stacked_inputs(blocks * B, D);
    Matrix stacked_masks(blocks * B, D, 0.0);
    std::size_t block = 0;
    auto fill_block = [&](bool second, std::size_t k, bool with_pivot) {
        const std::size_t offset = block * B;
        for (std::size_t i = 0; i < B; ++i) {
            const InstancePlan& inst = plan.instances[i];
            const FeatureSubset s = second ? inst.coalitions2[k] : inst.coalitions1[k];
            for (std::size_t d = 0; d < D; ++d) {
                stacked_inputs(offset + i, d) = inputs(i, d);
                stacked_masks(offset + i, d) = s.contains(d) ? 1.0 : 0.0;
            }
            if (with_pivot) stacked_masks(offset + i, inst.pivot) = 1.0;
        }
        ++block;
    };
    for (std::size_t k = 0; k < k1; ++k) {
        fill_block(false, k, true);
        fill_block(false, k, false);
    }
    for (std::size_t k = 0; k < k2; ++k) {
        fill_block(true, k, true);
        fill_block(true, k, false);
    }

    Var sums = tape.rowsum(model.forward_f(tape, stacked_inputs, stacked_masks));
    auto block_diff_mean = [&](std::size_t first_block, std::size_t draws) {
        Var acc{};
        for (std::size_t k = 0; k < draws; ++k) {
            const std::size_t with_at = (first_block + 2 * k) * B;
            Var diff = tape.sub(tape.slice_rows(sums, with_at, B),
                                tape.slice_rows(sums, with_at + B, B));
            acc = k == 0 ? diff : tape.add(acc, diff);
        }
        return tape.scale(acc, 1.0 / static_cast<double>(draws));
    };
    Var mean1 = block_diff_mean(0, k1);
    Var mean2 = block_diff_mean(2 * k1, k2);

    std::vector<std::size_t> pivots(B);
    Matrix dprime(B, 1, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        pivots[i] = plan.instances[i].pivot;
        dprime(i, 0) = static_cast<double>(plan.instances[i].removal.retained_count());
    }
    Var f_pivot = tape.gather_cols(f_main, pivots);
    Var sigma_pivot = tape.gather_cols(sigma_main, pivots);
    Var prod = tape.abs(tape.mul(tape.sub(mean1, f_pivot), tape.sub(mean2, f_pivot)));
    Var denom = tape.scale(tape.square(sigma_pivot), 2.0);
    return tape.mul_const(tape.div(prod, denom), dprime);
}

Matrix plan_removal_matrix(const BatchPlan& plan) {
    std::vector<RemovalMask> masks;
    masks.reserve(plan.instances.size());
    for (const InstancePlan& inst : plan.instances) masks.push_back(inst.removal);
    return removal_matrix(masks);
}

} // namespace

LossBuild v_reg_loss(Tape& tape, PsiModel& model, const Matrix& inputs,
                     std::span<const double> targets, const BatchPlan& plan, double beta) {
    const std::size_t B = inputs.rows();
    Matrix removal = plan_removal_matrix(plan);
    PsiModel::ForwardVars fwd = model.forward(tape, inputs, removal);
    Marginals marg = build_marginals(tape, model, fwd.f, fwd.sigma, B);

    Matrix y(B, 1);
    for (std::size_t i = 0; i < B; ++i) y(i, 0) = targets[i];
    Var resid = tape.sub(tape.constant(y), marg.mu);
    Var nll = tape.add(tape.scale(tape.log(tape.scale(marg.var, kTwoPi)), 0.5),
                       tape.div(tape.square(resid), tape.scale(marg.var, 2.0)));

    Var dshap = build_dshap(tape, model, inputs, plan, fwd.f, fwd.sigma);
    Var per_row = tape.add(nll, tape.scale(dshap, beta));
    Var loss = tape.scale(tape.sum_all(per_row), 1.0 / static_cast<double>(B));

    LossBuild out;
    out.loss = loss;
    const Matrix& rows = tape.value(per_row);
    const Matrix& drows = tape.value(dshap);
    out.per_instance.assign(rows.data(), rows.data() + rows.size());
    out.per_instance_dshap.assign(drows.data(), drows.data() + drows.size());
    return out;
}

LossBuild v_class_loss(Tape& tape, PsiModel& model, const Matrix& inputs,
                       std::span<const double> labels, const BatchPlan& plan, double beta) {
    const std::size_t B = inputs.rows();
    Matrix removal = plan_removal_matrix(plan);
    PsiModel::ForwardVars fwd = model.forward(tape, inputs, removal);
    Marginals marg = build_marginals(tape, model, fwd.f, fwd.sigma, B);
    Var sigma_col = tape.sqrt(marg.var);

    Var dshap = build_dshap(tape, model, inputs, plan, fwd.f, fwd.sigma);

    LossBuild out;
    out.per_instance.resize(B);
    Var acc{};
    for (std::size_t i = 0; i < B; ++i) {
        const int label = labels[i] > 0.5 ? 1 : 0;
        Var mu_i = tape.cell(marg.mu, i, 0);
        Var sg_i = tape.cell(sigma_col, i, 0);
        TruncStatsT<Var> ts = trunc_stats(label, mu_i, sg_i);
        Var ce = trunc_cross_entropy(ts, mu_i, sg_i);
        Var y = trunc_sample(label, mu_i, sg_i, plan.instances[i].u);
        Var log_bern =
            label == 1 ? tape.sub(y, tape.softplus(y)) : tape.neg(tape.softplus(y));
        Var objective = tape.add(tape.add(log_bern, ce), ts.entropy);
        acc = i == 0 ? objective : tape.add(acc, objective);
        out.per_instance[i] = -tape.value(objective)[0];
    }
    Var loss = tape.scale(
        tape.add(tape.neg(acc), tape.scale(tape.sum_all(dshap), beta)),
        1.0 / static_cast<double>(B));

    out.loss = loss;
    const Matrix& drows = tape.value(dshap);
    out.per_instance_dshap.assign(drows.data(), drows.data() + drows.size());
    for (std::size_t i = 0; i < B; ++i) {
        out.per_instance[i] += beta * out.per_instance_dshap[i];
    }
    return out;
}

} // namespace psi
