#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "psi/elbo.hpp"

using namespace psi;

namespace {

ModelConfig loss_config(std::size_t d, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.feature_count = d;
    cfg.activation = Activation::elu; // smooth, keeps finite differences honest
    cfg.embed_dim = 2;
    cfg.menn_hidden = {std::max<std::size_t>(d, 6)};
    cfg.menn2_hidden = {std::max<std::size_t>(d, 6)};
    cfg.f_hidden = {6};
    cfg.sigma_hidden = {6};
    cfg.init_seed = seed;
    return cfg;
}

struct FixedBatch {
    Matrix inputs;
    std::vector<double> targets;
    BatchPlan plan;
};

FixedBatch make_batch(std::size_t b, std::size_t d, bool classification,
                      std::uint64_t seed) {
    Rng rng(seed);
    FixedBatch batch;
    batch.inputs = Matrix(b, d);
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) batch.inputs[i] = rng.normal();
    batch.targets.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        batch.targets[i] = classification ? (rng.uniform() < 0.5 ? 1.0 : 0.0) : rng.normal();
    }
    batch.plan.instances.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        RemovalMask mask(d, false);
        for (std::size_t k = 0; k < d; ++k) mask.set(k, rng.uniform() < 0.7);
        batch.plan.instances[i].removal = mask;
    }
    complete_plan(batch.plan, 1, 1, classification, rng);
    return batch;
}

} // namespace

TEST_CASE("marginal stats: composition of means and variances") {
    std::vector<double> f = {0.0, 0.0, 0.0};
    std::vector<double> s = {1e-6, 1e-6, 1e-6};
    GaussianStats stats = marginal_stats(f, s, 0.7, 1.0);
    CHECK(stats.mu == doctest::Approx(0.7));
    CHECK(stats.var == doctest::Approx(1.0).epsilon(1e-9));

    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> fv(4), sv(4);
        for (auto& v : fv) v = rng.normal();
        for (auto& v : sv) v = 0.1 + rng.uniform();
        const double phi0 = rng.normal();
        const double sigma0 = 0.5 + rng.uniform();
        GaussianStats st = marginal_stats(fv, sv, phi0, sigma0);
        double fsum = 0.0, vsum = sigma0 * sigma0;
        for (double v : fv) fsum += v;
        for (double v : sv) vsum += v * v;
        CHECK(st.mu - phi0 == doctest::Approx(fsum).epsilon(1e-12));
        CHECK(st.var == doctest::Approx(vsum).epsilon(1e-12));
    }
}

TEST_CASE("gaussian nll: textbook value and translation invariance") {
    GaussianStats unit{0.0, 1.0};
    CHECK(nll_gaussian(unit, 0.0) == doctest::Approx(0.5 * std::log(kTwoPi)));
    CHECK(0.5 * std::log(kTwoPi) == doctest::Approx(0.9189385332046727));

    GaussianStats shifted{3.7, 2.0};
    CHECK(nll_gaussian(shifted, 3.7 + 0.5) ==
          doctest::Approx(nll_gaussian(GaussianStats{0.0, 2.0}, 0.5)).epsilon(1e-12));

    // Against a direct density evaluation on a few points.
    for (double y : {-1.0, 0.3, 2.5}) {
        const double mu = 0.4, var = 1.7;
        const double density =
            std::exp(-(y - mu) * (y - mu) / (2.0 * var)) / std::sqrt(kTwoPi * var);
        CHECK(nll_gaussian(GaussianStats{mu, var}, y) ==
              doctest::Approx(-std::log(density)).epsilon(1e-12));
    }
}

TEST_CASE("v_reg_loss at beta 0 is the mean gaussian NLL") {
    PsiModel model = PsiModel::build(loss_config(3, 10));
    FixedBatch batch = make_batch(6, 3, false, 77);

    Tape tape;
    LossBuild build = v_reg_loss(tape, model, batch.inputs, batch.targets, batch.plan, 0.0);

    double expected = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        std::vector<double> x(3);
        for (std::size_t d = 0; d < 3; ++d) x[d] = batch.inputs(i, d);
        PsiModel::ForwardValues fw = model.forward_one(x, batch.plan.instances[i].removal);
        GaussianStats st = marginal_stats(std::span<const double>(fw.f.data(), 3),
                                          std::span<const double>(fw.sigma.data(), 3),
                                          model.phi0().value[0], model.sigma0());
        expected += nll_gaussian(st, batch.targets[i]);
    }
    expected /= 6.0;
    CHECK(tape.value(build.loss)[0] == doctest::Approx(expected).epsilon(1e-12));
    for (double d : build.per_instance_dshap) CHECK(d >= 0.0);
}

TEST_CASE("beta ordering surrogate on a fixed batch") {
    PsiModel model = PsiModel::build(loss_config(3, 11));
    FixedBatch batch = make_batch(8, 3, false, 78);
    auto loss_at = [&](double beta) {
        Tape tape;
        LossBuild b = v_reg_loss(tape, model, batch.inputs, batch.targets, batch.plan, beta);
        return std::pair<double, std::vector<double>>(tape.value(b.loss)[0],
                                                      b.per_instance_dshap);
    };
    auto [l0, d0] = loss_at(0.0);
    auto [l1, d1] = loss_at(0.8);
    double max_term = 0.0;
    for (double v : d1) max_term = std::max(max_term, v);
    CHECK(l0 <= l1 + 1e-12);
    CHECK(l1 <= l0 + 0.8 * max_term + 1e-12);
}

TEST_CASE("regression loss gradients match finite differences") {
    PsiModel model = PsiModel::build(loss_config(3, 12));
    FixedBatch batch = make_batch(4, 3, false, 79);
    std::vector<Parameter*> params = model.parameters();

    // The frozen sigma-path inputs are recorded once and replayed, so the
    // differences probe exactly the function the tape differentiates.
    BarrierReplay replay;
    auto loss_value = [&] {
        Tape tape;
        tape.set_barrier_replay(&replay);
        return tape.value(
            v_reg_loss(tape, model, batch.inputs, batch.targets, batch.plan, 0.7).loss)[0];
    };
    auto compute = [&] {
        Tape tape;
        tape.set_barrier_replay(&replay);
        LossBuild b = v_reg_loss(tape, model, batch.inputs, batch.targets, batch.plan, 0.7);
        tape.backward(b.loss);
        replay.recording = false;
    };
    CHECK(psi::testing::max_gradient_mismatch(params, loss_value, compute) < 1e-4);
}

TEST_CASE("classification loss gradients match finite differences") {
    PsiModel model = PsiModel::build(loss_config(3, 13));
    FixedBatch batch = make_batch(4, 3, true, 80);
    std::vector<Parameter*> params = model.parameters();

    BarrierReplay replay;
    auto loss_value = [&] {
        Tape tape;
        tape.set_barrier_replay(&replay);
        return tape.value(
            v_class_loss(tape, model, batch.inputs, batch.targets, batch.plan, 0.5).loss)[0];
    };
    auto compute = [&] {
        Tape tape;
        tape.set_barrier_replay(&replay);
        LossBuild b = v_class_loss(tape, model, batch.inputs, batch.targets, batch.plan, 0.5);
        tape.backward(b.loss);
        replay.recording = false;
    };
    CHECK(psi::testing::max_gradient_mismatch(params, loss_value, compute) < 1e-4);
}

TEST_CASE("classification loss: beta 0 removes the attribution term") {
    PsiModel model = PsiModel::build(loss_config(3, 14));
    FixedBatch batch = make_batch(5, 3, true, 81);
    Tape t1, t2;
    LossBuild b0 = v_class_loss(t1, model, batch.inputs, batch.targets, batch.plan, 0.0);
    LossBuild b1 = v_class_loss(t2, model, batch.inputs, batch.targets, batch.plan, 1.0);
    double mean_dshap = 0.0;
    for (double v : b1.per_instance_dshap) mean_dshap += v;
    mean_dshap /= 5.0;
    CHECK(t2.value(b1.loss)[0] ==
          doctest::Approx(t1.value(b0.loss)[0] + mean_dshap).epsilon(1e-10));
}

TEST_CASE("well-separated stats: bernoulli term vanishes, entropy terms cancel") {
    // mu = +10 with label 1: the sampled logit sits near 10, the bernoulli
    // log-likelihood is ~0, and H approximately cancels the cross-entropy.
    const double mu = 10.0, sigma = 1.0;
    TruncStats st = trunc_stats(1, mu, sigma);
    const double ce = trunc_cross_entropy(st, mu, sigma);
    CHECK(std::fabs(st.entropy + ce) < 1e-6);
    const double y = trunc_sample(1, mu, sigma, 0.37);
    const double log_bern = y - softplus_value(y);
    CHECK(std::fabs(log_bern) < 1e-3);
    CHECK(std::fabs(st.entropy) > 0.5);
}

TEST_CASE("cross_entropy_logit spec shape on marginal stats") {
    GaussianStats st{0.0, 1.0};
    const double ce = cross_entropy_logit(1, st);
    auto oracle = psi::testing::trunc_oracle_quadrature(1, 0.0, 1.0);
    CHECK(ce == doctest::Approx(oracle.cross_entropy).epsilon(1e-9));
    CHECK(cross_entropy_logit(1, GaussianStats{0.6, 1.3}) ==
          doctest::Approx(cross_entropy_logit(0, GaussianStats{-0.6, 1.3})).epsilon(1e-12));
}

TEST_CASE("complete_plan: pivots inside the retained set, coalitions within it") {
    Rng rng(15);
    BatchPlan plan;
    plan.instances.resize(40);
    for (std::size_t i = 0; i < 40; ++i) {
        RemovalMask mask(6, false);
        for (std::size_t d = 0; d < 6; ++d) mask.set(d, rng.uniform() < 0.5);
        plan.instances[i].removal = mask;
    }
    complete_plan(plan, 2, 3, true, rng);
    for (const InstancePlan& inst : plan.instances) {
        CHECK(inst.coalitions1.size() == 2);
        CHECK(inst.coalitions2.size() == 3);
        if (inst.removal.retained_count() == 0) continue;
        CHECK(inst.removal.present(inst.pivot));
        for (const auto& group : {inst.coalitions1, inst.coalitions2}) {
            for (const FeatureSubset& s : group) {
                CHECK(!s.contains(inst.pivot));
                for (std::size_t d = 0; d < 6; ++d) {
                    if (s.contains(d)) CHECK(inst.removal.present(d));
                }
            }
        }
        CHECK(inst.u > 0.0);
        CHECK(inst.u < 1.0);
    }
}

TEST_CASE("empty retained set: likelihood only, zero attribution term") {
    PsiModel model = PsiModel::build(loss_config(3, 16));
    FixedBatch batch = make_batch(3, 3, false, 82);
    batch.plan.instances[1].removal = RemovalMask::none_present(3);
    Rng rng(1);
    complete_plan(batch.plan, 1, 1, false, rng);

    Tape tape;
    LossBuild b = v_reg_loss(tape, model, batch.inputs, batch.targets, batch.plan, 2.0);
    CHECK(b.per_instance_dshap[1] == 0.0);
    CHECK(std::isfinite(tape.value(b.loss)[0]));

    // Its likelihood term uses mu = phi0 plus nothing.
    std::vector<double> x = {batch.inputs(1, 0), batch.inputs(1, 1), batch.inputs(1, 2)};
    PsiModel::ForwardValues fw = model.forward_one(x, RemovalMask::none_present(3));
    for (std::size_t d = 0; d < 3; ++d) CHECK(fw.f[d] == 0.0);
}
