#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>

#include "psi/datagen.hpp"
#include "psi/gauss.hpp"

using namespace psi;

TEST_CASE("feature support and defaults") {
    CHECK(kSynthDefaultN == 8000);
    for (int k = 1; k <= 5; ++k) {
        DatasetTabular data = gen_synth(k, 500, 11);
        CHECK(data.n() == 500);
        CHECK(data.d() == 3);
        CHECK(data.task == Task::regression);
        for (std::size_t i = 0; i < data.n(); ++i) {
            for (std::size_t d = 0; d < 3; ++d) {
                CHECK(data.features(i, d) >= -4.0);
                CHECK(data.features(i, d) <= 4.0);
            }
        }
    }
    CHECK_THROWS_AS(gen_synth(0, 10, 1), std::domain_error);
    CHECK_THROWS_AS(gen_synth(6, 10, 1), std::domain_error);
    CHECK_THROWS_AS(gen_synth(2, 0, 1), std::domain_error);
}

TEST_CASE("fixed seed reproduces the dataset bit for bit") {
    for (int k : {1, 3}) {
        DatasetTabular a = gen_synth(k, 300, 42);
        DatasetTabular b = gen_synth(k, 300, 42);
        for (std::size_t i = 0; i < a.features.size(); ++i) {
            CHECK(a.features[i] == b.features[i]);
        }
        for (std::size_t i = 0; i < a.n(); ++i) CHECK(a.target[i] == b.target[i]);
        DatasetTabular c = gen_synth(k, 300, 43);
        bool any_diff = false;
        for (std::size_t i = 0; i < a.n() && !any_diff; ++i) {
            any_diff = a.target[i] != c.target[i];
        }
        CHECK(any_diff);
    }
}

TEST_CASE("synth1: drawn attributions reconstruct the target exactly") {
    DatasetTabular data = gen_synth(1, 2000, 7);
    REQUIRE(data.has_latent());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double sum =
            data.latent_draw(i, 0) + data.latent_draw(i, 1) + data.latent_draw(i, 2);
        CHECK(std::fabs(sum - data.target[i]) < 1e-12);
        // Feature 3 is deterministic.
        CHECK(data.latent_draw(i, 2) == data.latent_mean(i, 2));
    }
}

TEST_CASE("synth1 mean functions are centered over the input range") {
    // The subtracted constants equal the range averages of the raw shapes,
    // checked against direct quadrature.
    const double avg1 =
        adaptive_simpson([](double x) { return std::exp(-x * x); }, -4.0, 4.0, 1e-12) / 8.0;
    const double avg2 =
        adaptive_simpson([](double x) { return std::sin(-x * x); }, -4.0, 4.0, 1e-12) / 8.0;
    const double c1 = std::exp(0.0) - synth1_mean(0, 0.0); // recovers the constant
    const double c2 = synth1_mean(1, 0.0) - std::sin(0.0);
    CHECK(c1 == doctest::Approx(avg1).epsilon(1e-10));
    CHECK(c2 == doctest::Approx(-avg2).epsilon(1e-10));

    const double i1 = adaptive_simpson([](double x) { return synth1_mean(0, x); }, -4.0, 4.0,
                                       1e-12);
    const double i2 = adaptive_simpson([](double x) { return synth1_mean(1, x); }, -4.0, 4.0,
                                       1e-12);
    CHECK(std::fabs(i1) < 1e-9);
    CHECK(std::fabs(i2) < 1e-9);
}

TEST_CASE("synth1 noise shapes") {
    CHECK(synth1_stddev(0, 0.0) == doctest::Approx(std::sqrt(0.6)));
    CHECK(synth1_stddev(1, 0.0) == 0.0);
    CHECK(synth1_stddev(1, -2.0) == doctest::Approx(std::sqrt(0.4)));
    CHECK(synth1_stddev(2, 1.0) == 0.0);
    CHECK(synth1_stddev(0, 4.0) < 0.1); // the cosine power decays hard
    CHECK(synth1_mean(2, 1.0) ==
          doctest::Approx(3.0 * std::cos(3.0) + 4.0 * std::sin(5.0)).epsilon(1e-12));
}

TEST_CASE("synth2 components match the formulas and sum to the target") {
    DatasetTabular data = gen_synth(2, 1000, 3);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double x1 = data.features(i, 0);
        const double x2 = data.features(i, 1);
        const double x3 = data.features(i, 2);
        CHECK(data.latent_mean(i, 0) == doctest::Approx(std::exp(-x1 * x1) * x1).epsilon(1e-12));
        CHECK(data.latent_mean(i, 1) ==
              doctest::Approx(0.5 * x2 * std::sin(x2)).epsilon(1e-12));
        CHECK(data.latent_mean(i, 2) ==
              doctest::Approx(std::cos(3.0 * x3) * std::sin(x3)).epsilon(1e-12));
        const double sum =
            data.latent_mean(i, 0) + data.latent_mean(i, 1) + data.latent_mean(i, 2);
        CHECK(sum == doctest::Approx(data.target[i]).epsilon(1e-12));
    }
}

TEST_CASE("synth3 and synth5 observation noise has variance 0.01") {
    for (int which : {3, 5}) {
        DatasetTabular data = gen_synth(which, 8000, 5);
        std::vector<double> residual(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) {
            const double x1 = data.features(i, 0);
            const double x2 = data.features(i, 1);
            const double x3 = data.features(i, 2);
            double deterministic =
                data.latent_mean(i, 0) + data.latent_mean(i, 1) + data.latent_mean(i, 2);
            if (which == 3) {
                deterministic += std::exp(-(x1 + x2) * (x1 + x2));
                deterministic += (x1 - 3.0) * x3 * std::sin(x1) * std::cos(x3) / 2.0;
                deterministic += x2 * x3 / 2.0;
            } else {
                deterministic +=
                    5.0 * std::pow(std::pow(x1, 10.0) + std::pow(x2, 10.0), 0.1) / 2.0;
            }
            residual[i] = data.target[i] - deterministic;
        }
        double mean = std::accumulate(residual.begin(), residual.end(), 0.0) /
                      static_cast<double>(data.n());
        double var = 0.0;
        for (double r : residual) var += (r - mean) * (r - mean);
        var /= static_cast<double>(data.n() - 1);
        // 3-sigma band for the sample variance of N(0, 0.01) at n = 8000.
        const double band = 3.0 * 0.01 * std::sqrt(2.0 / (data.n() - 1.0));
        CHECK(std::fabs(var - 0.01) < band);
        CHECK(std::fabs(mean) < 3.0 * 0.1 / std::sqrt(static_cast<double>(data.n())));
    }
}

TEST_CASE("fresnel integral against reference values") {
    CHECK(fresnel_s(0.0) == doctest::Approx(0.0));
    CHECK(fresnel_s(1.0) == doctest::Approx(0.43825914739035476).epsilon(1e-10));
    CHECK(fresnel_s(2.0) == doctest::Approx(0.34341567836369824).epsilon(1e-10));
    CHECK(fresnel_s(-1.0) == doctest::Approx(-0.43825914739035476).epsilon(1e-10));
}

TEST_CASE("classification process: valid labels, separable logits") {
    DatasetTabular data = gen_synth_class(4000, 9);
    CHECK(data.task == Task::classification);
    std::size_t positives = 0;
    std::size_t strong = 0, strong_agree = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        CHECK((data.target[i] == 0.0 || data.target[i] == 1.0));
        positives += data.target[i] == 1.0 ? 1 : 0;
        const double logit =
            data.latent_mean(i, 0) + data.latent_mean(i, 1) + data.latent_mean(i, 2);
        if (std::fabs(logit) > 4.0) {
            ++strong;
            if (data.target[i] == (logit > 0.0 ? 1.0 : 0.0)) ++strong_agree;
        }
    }
    CHECK(positives > 1000);
    CHECK(positives < 3000);
    // Bernoulli flips at |logit| > 4 happen below sigmoid(-4) of the time.
    CHECK(strong > 2000);
    CHECK(static_cast<double>(strong_agree) / static_cast<double>(strong) > 0.95);
}

TEST_CASE("standardizer: z-scores, round trip and no test-fold leakage") {
    DatasetTabular data = gen_synth(2, 1200, 21);
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < 800; ++i) train_rows.push_back(i);

    Standardizer st = fit_standardizer(data, train_rows);
    DatasetTabular standardized = data;
    st.apply(standardized);

    // Mean/sd of the training rows after the transform.
    for (std::size_t d = 0; d < 3; ++d) {
        double m = 0.0;
        for (std::size_t i : train_rows) m += standardized.features(i, d);
        m /= 800.0;
        CHECK(std::fabs(m) < 1e-12);
    }

    // Refitting on standardized training rows is the identity transform.
    Standardizer st2 = fit_standardizer(standardized, train_rows);
    for (std::size_t d = 0; d < 3; ++d) {
        CHECK(std::fabs(st2.feature_mean[d]) < 1e-12);
        CHECK(st2.feature_stddev[d] == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Round trip.
    DatasetTabular back = standardized;
    st.invert(back);
    for (std::size_t i = 0; i < data.features.size(); ++i) {
        CHECK(std::fabs(back.features[i] - data.features[i]) < 1e-12);
    }
    for (std::size_t i = 0; i < data.n(); ++i) {
        CHECK(std::fabs(back.target[i] - data.target[i]) < 1e-12);
    }

    // Perturbing rows outside the fitted set leaves the statistics unchanged.
    DatasetTabular tampered = data;
    for (std::size_t i = 800; i < data.n(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) tampered.features(i, d) += 1000.0;
        tampered.target[i] -= 500.0;
    }
    Standardizer st3 = fit_standardizer(tampered, train_rows);
    for (std::size_t d = 0; d < 3; ++d) {
        CHECK(st3.feature_mean[d] == st.feature_mean[d]);
        CHECK(st3.feature_stddev[d] == st.feature_stddev[d]);
    }
    CHECK(st3.target_mean == st.target_mean);
}

TEST_CASE("standardizer refuses constant columns by name") {
    DatasetTabular data;
    data.task = Task::regression;
    data.features = Matrix(10, 2);
    data.target.assign(10, 0.0);
    for (std::size_t i = 0; i < 10; ++i) {
        data.features(i, 0) = static_cast<double>(i);
        data.features(i, 1) = 3.14;
        data.target[i] = static_cast<double>(i);
    }
    std::vector<std::size_t> rows(10);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    try {
        fit_standardizer(data, rows);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("column 2") != std::string::npos);
    }
}

TEST_CASE("classification targets stay untouched by the standardizer") {
    DatasetTabular data = gen_synth_class(300, 4);
    std::vector<std::size_t> rows(300);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Standardizer st = fit_standardizer(data, rows);
    CHECK(!st.standardize_target);
    DatasetTabular standardized = data;
    st.apply(standardized);
    for (std::size_t i = 0; i < data.n(); ++i) {
        CHECK(standardized.target[i] == data.target[i]);
    }
}

TEST_CASE("kfold split: disjoint near-equal cover, deterministic") {
    auto splits = kfold_split(10, 5, 3);
    REQUIRE(splits.size() == 5);
    std::vector<int> seen(10, 0);
    for (const FoldSplit& s : splits) {
        CHECK(s.test.size() == 2);
        CHECK(s.train.size() == 8);
        for (std::size_t idx : s.test) seen[idx] += 1;
    }
    for (int c : seen) CHECK(c == 1);

    auto again = kfold_split(10, 5, 3);
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(again[f].test == splits[f].test);
        CHECK(again[f].train == splits[f].train);
    }
    auto other = kfold_split(10, 5, 4);
    bool differs = false;
    for (std::size_t f = 0; f < 5 && !differs; ++f) differs = other[f].test != splits[f].test;
    CHECK(differs);

    // Uneven division still covers everything.
    auto uneven = kfold_split(11, 3, 1);
    std::size_t total = 0;
    for (const FoldSplit& s : uneven) total += s.test.size();
    CHECK(total == 11);

    CHECK_THROWS_AS(kfold_split(3, 5, 0), ConfigError);
    CHECK_THROWS_AS(kfold_split(10, 1, 0), ConfigError);
}
