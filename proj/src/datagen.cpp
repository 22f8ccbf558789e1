#include "psi/datagen.hpp"

#include <cmath>
#include <string>

#include "psi/gauss.hpp"

namespace psi {

void DatasetTabular::validate() const {
    if (features.rows() != target.size()) {
        throw ShapeError("dataset: feature rows and target length differ");
    }
    if (!features.all_finite()) throw NumericError("dataset: non-finite feature entry");
    for (double y : target) {
        if (!std::isfinite(y)) throw NumericError("dataset: non-finite target entry");
        if (task == Task::classification && y != 0.0 && y != 1.0) {
            throw ConfigError("dataset: classification targets must be 0 or 1");
        }
    }
}

double fresnel_s(double t) {
    return adaptive_simpson([](double u) { return std::sin(1.5707963267948966 * u * u); },
                            0.0, t, 1e-13);
}

namespace {

constexpr double kSqrtPi = 1.7724538509055160272981674833411;

// Constant offsets that center the synth1 means over U(-4, 4).
double synth1_c1() { return kSqrtPi / 8.0 * std::erf(4.0); }
double synth1_c2() {
    static const double s = fresnel_s(4.0 * std::sqrt(2.0 / 3.14159265358979323846));
    return std::sqrt(kTwoPi) / 8.0 * s;
}

} // namespace

double synth1_mean(std::size_t feature, double x) {
    switch (feature) {
        case 0: return std::exp(-x * x) - synth1_c1();
        case 1: return std::sin(-x * x) + synth1_c2();
        case 2: return 3.0 * std::cos(3.0 * x) + 4.0 * std::sin(5.0 * x);
        default: throw std::domain_error("synth1_mean: feature out of range");
    }
}

double synth1_stddev(std::size_t feature, double x) {
    switch (feature) {
        case 0: return std::sqrt(0.6 * std::pow(std::cos(0.03 * x), 800.0));
        case 1: return std::sqrt(0.2 * std::fabs(x));
        case 2: return 0.0;
        default: throw std::domain_error("synth1_stddev: feature out of range");
    }
}

DatasetTabular gen_synth(int which, std::size_t n, std::uint64_t seed) {
    if (which < 1 || which > 5) {
        throw std::domain_error("gen_synth: synthetic id must be 1..5, got " +
                                std::to_string(which));
    }
    if (n < 1) throw std::domain_error("gen_synth: need at least one row");

    Rng rng(seed);
    DatasetTabular data;
    data.task = Task::regression;
    data.features = Matrix(n, 3);
    data.target.resize(n);
    data.latent_mean = Matrix(n, 3);
    data.latent_draw = Matrix(n, 3);

    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = rng.uniform() * 8.0 - 4.0;
        const double x2 = rng.uniform() * 8.0 - 4.0;
        const double x3 = rng.uniform() * 8.0 - 4.0;
        data.features(i, 0) = x1;
        data.features(i, 1) = x2;
        data.features(i, 2) = x3;

        double m1 = 0.0, m2 = 0.0, m3 = 0.0;
        double y = 0.0;
        switch (which) {
            case 1: {
                m1 = synth1_mean(0, x1);
                m2 = synth1_mean(1, x2);
                m3 = synth1_mean(2, x3);
                const double phi1 = m1 + synth1_stddev(0, x1) * rng.normal();
                const double phi2 = m2 + synth1_stddev(1, x2) * rng.normal();
                const double phi3 = m3;
                data.latent_draw(i, 0) = phi1;
                data.latent_draw(i, 1) = phi2;
                data.latent_draw(i, 2) = phi3;
                y = phi1 + phi2 + phi3;
                break;
            }
            case 2: {
                m1 = std::exp(-x1 * x1) * x1;
                m2 = 0.5 * x2 * std::sin(x2);
                m3 = std::cos(3.0 * x3) * std::sin(x3);
                y = m1 + m2 + m3;
                break;
            }
            case 3: {
                m1 = 4.0 * std::sin(x1) + 2.0 * std::sin(2.0 * x1);
                m2 = 3.0 * std::cos(3.0 * x2) * std::sin(5.0 * x2);
                m3 = std::cos(2.0 * x3) + x3 * x3 / 7.0;
                const double f12 = std::exp(-(x1 + x2) * (x1 + x2));
                const double f13 =
                    (x1 - 3.0) * x3 * std::sin(x1) * std::cos(x3) / 2.0;
                const double f23 = x2 * x3 / 2.0;
                y = m1 + m2 + m3 + f12 + f13 + f23 + 0.1 * rng.normal();
                break;
            }
            case 4: {
                m1 = x1 == 0.0 ? 0.0
                               : std::exp(-1.0 / (x1 * x1)) + std::sin(100.0 / x1);
                m2 = std::exp(-std::fabs(std::cos(std::fabs(x2)) +
                                         0.5 * std::sin(2.0 * x2))) +
                     x2 / 4.0;
                m3 = std::tanh(x3 * x3);
                const double f12 = std::sin(x1 * x1 + x2 * x2) / 2.0;
                y = m1 + m2 + m3 + f12;
                break;
            }
            case 5: {
                m1 = std::fabs(x1) / 10.0 + x1 * x1 / 10.0 + std::sin(x1);
                m2 = std::cos(5.0 * x2) + std::sin(2.0 * x2) + x2;
                m3 = std::exp(-std::pow(x3, 100.0));
                const double f12 =
                    5.0 * std::pow(std::pow(x1, 10.0) + std::pow(x2, 10.0), 0.1) / 2.0;
                y = m1 + m2 + m3 + f12 + 0.1 * rng.normal();
                break;
            }
        }
        if (which != 1) {
            data.latent_draw(i, 0) = m1;
            data.latent_draw(i, 1) = m2;
            data.latent_draw(i, 2) = m3;
        }
        data.latent_mean(i, 0) = m1;
        data.latent_mean(i, 1) = m2;
        data.latent_mean(i, 2) = m3;
        data.target[i] = y;
    }
    data.validate();
    return data;
}

DatasetTabular gen_synth_class(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::domain_error("gen_synth_class: need at least one row");
    Rng rng(seed);
    DatasetTabular data;
    data.task = Task::classification;
    data.features = Matrix(n, 3);
    data.target.resize(n);
    data.latent_mean = Matrix(n, 3);
    data.latent_draw = Matrix(n, 3);

    constexpr double w1 = 3.0, w2 = -2.0, w3 = 1.5;
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = rng.uniform() * 8.0 - 4.0;
        const double x2 = rng.uniform() * 8.0 - 4.0;
        const double x3 = rng.uniform() * 8.0 - 4.0;
        data.features(i, 0) = x1;
        data.features(i, 1) = x2;
        data.features(i, 2) = x3;
        data.latent_mean(i, 0) = data.latent_draw(i, 0) = w1 * x1;
        data.latent_mean(i, 1) = data.latent_draw(i, 1) = w2 * x2;
        data.latent_mean(i, 2) = data.latent_draw(i, 2) = w3 * x3;
        const double logit = w1 * x1 + w2 * x2 + w3 * x3;
        data.target[i] = rng.uniform() < sigmoid_value(logit) ? 1.0 : 0.0;
    }
    data.validate();
    return data;
}

Standardizer fit_standardizer(const DatasetTabular& data, std::span<const std::size_t> rows) {
    if (rows.empty()) throw ConfigError("standardizer: no rows to fit on");
    const std::size_t D = data.d();
    Standardizer st;
    st.feature_mean.assign(D, 0.0);
    st.feature_stddev.assign(D, 0.0);

    const double n = static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        for (std::size_t d = 0; d < D; ++d) st.feature_mean[d] += data.features(r, d);
    }
    for (double& m : st.feature_mean) m /= n;
    for (std::size_t r : rows) {
        for (std::size_t d = 0; d < D; ++d) {
            const double c = data.features(r, d) - st.feature_mean[d];
            st.feature_stddev[d] += c * c;
        }
    }
    for (std::size_t d = 0; d < D; ++d) {
        st.feature_stddev[d] = std::sqrt(st.feature_stddev[d] / n);
        if (st.feature_stddev[d] <= 1e-12) {
            throw ConfigError("standardizer: feature column " + std::to_string(d + 1) +
                              " is constant on the fitted rows");
        }
    }

    if (data.task == Task::regression) {
        st.standardize_target = true;
        double ym = 0.0;
        for (std::size_t r : rows) ym += data.target[r];
        ym /= n;
        double yv = 0.0;
        for (std::size_t r : rows) {
            const double c = data.target[r] - ym;
            yv += c * c;
        }
        st.target_mean = ym;
        st.target_stddev = std::sqrt(yv / n);
        if (st.target_stddev <= 1e-12) {
            throw ConfigError("standardizer: target column is constant on the fitted rows");
        }
    }
    return st;
}

void Standardizer::apply(DatasetTabular& data) const {
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t d = 0; d < data.d(); ++d) {
            data.features(i, d) = (data.features(i, d) - feature_mean[d]) / feature_stddev[d];
        }
    }
    if (standardize_target) {
        for (double& y : data.target) y = (y - target_mean) / target_stddev;
    }
}

void Standardizer::invert(DatasetTabular& data) const {
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t d = 0; d < data.d(); ++d) {
            data.features(i, d) = data.features(i, d) * feature_stddev[d] + feature_mean[d];
        }
    }
    if (standardize_target) {
        for (double& y : data.target) y = y * target_stddev + target_mean;
    }
}

std::vector<FoldSplit> kfold_split(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("kfold_split: need at least 2 folds");
    if (folds > n) throw ConfigError("kfold_split: more folds than rows");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<FoldSplit> splits(folds);
    const std::size_t base = n / folds;
    const std::size_t extra = n % folds;
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i) splits[f].test.push_back(order[cursor + i]);
        cursor += size;
    }
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t g = 0; g < folds; ++g) {
            if (g == f) continue;
            splits[f].train.insert(splits[f].train.end(), splits[g].test.begin(),
                                   splits[g].test.end());
        }
    }
    return splits;
}

DatasetTabular select_rows(const DatasetTabular& data, std::span<const std::size_t> rows) {
    DatasetTabular out;
    out.task = data.task;
    out.features = Matrix(rows.size(), data.d());
    out.target.resize(rows.size());
    const bool latent = data.has_latent();
    if (latent) {
        out.latent_mean = Matrix(rows.size(), data.d());
        out.latent_draw = Matrix(rows.size(), data.d());
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        for (std::size_t d = 0; d < data.d(); ++d) {
            out.features(i, d) = data.features(r, d);
            if (latent) {
                out.latent_mean(i, d) = data.latent_mean(r, d);
                out.latent_draw(i, d) = data.latent_draw(r, d);
            }
        }
        out.target[i] = data.target[r];
    }
    return out;
}

} // namespace psi
