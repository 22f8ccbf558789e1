#include "psi/model.hpp"

#include <cmath>

namespace psi {

Architecture architecture_from_string(const std::string& s) {
    if (s == "menn") return Architecture::menn;
    if (s == "ffnn") return Architecture::ffnn_baseline;
    throw std::invalid_argument("unknown architecture: " + s);
}

std::string to_string(Architecture a) {
    return a == Architecture::menn ? "menn" : "ffnn";
}

void ModelConfig::validate() const {
    if (feature_count == 0) throw ConfigError("model config: feature count must be positive");
    if (embed_dim == 0) throw ConfigError("model config: embed dim must be positive");
    for (std::size_t w : menn_hidden) {
        if (w < feature_count) {
            throw ConfigError("model config: menn width " + std::to_string(w) +
                              " is below the feature count");
        }
    }
    for (std::size_t w : menn2_hidden) {
        if (w < feature_count) {
            throw ConfigError("model config: menn2 width " + std::to_string(w) +
                              " is below the feature count");
        }
    }
    if (sigma_floor <= 0.0) throw ConfigError("model config: sigma floor must be positive");
}

namespace {

MaskedNet build_masked_net(const MaskSpec& spec, Activation act, const std::string& name,
                           Rng& rng) {
    MaskedNet net;
    net.spec = spec;
    net.stack = build_mask_stack(spec);
    std::size_t in = spec.feature_count;
    for (std::size_t k = 0; k < spec.layer_count(); ++k) {
        const std::size_t out = spec.width_of(k);
        DenseLayer layer = make_dense_layer(in, out, act, name + "." + std::to_string(k), rng);
        // Per-neuron fan-in under the mask is the owning band's width; rescale
        // the initialization so masked nets start at a healthy signal scale.
        const Matrix& mask = net.stack.masks[k];
        for (std::size_t j = 0; j < out; ++j) {
            double fan = 0.0;
            for (std::size_t i = 0; i < in; ++i) fan += mask(i, j);
            if (fan > 0.0) {
                const double rescale = std::sqrt(static_cast<double>(in) / fan);
                for (std::size_t i = 0; i < in; ++i) layer.weight.value(i, j) *= rescale;
            }
        }
        net.layers.push_back(std::move(layer));
        in = out;
    }
    return net;
}

std::vector<DenseLayer> build_trunk(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out, Activation act, const std::string& name,
                                    Rng& rng) {
    std::vector<DenseLayer> layers;
    std::size_t prev = in;
    for (std::size_t k = 0; k < hidden.size(); ++k) {
        layers.push_back(make_dense_layer(prev, hidden[k], act, name + "." + std::to_string(k), rng));
        prev = hidden[k];
    }
    layers.push_back(make_dense_layer(prev, out, Activation::identity,
                                      name + "." + std::to_string(hidden.size()), rng));
    return layers;
}

Matrix masked_weight(const DenseLayer& layer, const Matrix& mask) {
    Matrix w = layer.weight.value;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= mask[i];
    return w;
}

Matrix plain_dense(const Matrix& input, const DenseLayer& layer, const Matrix& weight) {
    Matrix out = matmul(input, weight);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out(i, j) = activate_scalar(layer.activation, out(i, j) + layer.bias.value[j]);
        }
    }
    return out;
}

Matrix plain_masked_forward(const MaskedNet& net, const Matrix& input) {
    Matrix h = input;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        h = plain_dense(h, net.layers[k], masked_weight(net.layers[k], net.stack.masks[k]));
    }
    return h;
}

Var tape_masked_forward(Tape& tape, MaskedNet& net, Var input) {
    Var h = input;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        DenseLayer& layer = net.layers[k];
        Var w = tape.mul_const(tape.leaf(layer.weight), net.stack.masks[k]);
        Var pre = tape.add_rowvec(tape.matmul(h, w), tape.leaf(layer.bias));
        h = tape.activate(pre, layer.activation);
    }
    return h;
}

Matrix plain_trunk_forward(const std::vector<DenseLayer>& trunk, const Matrix& input) {
    Matrix h = input;
    for (const DenseLayer& layer : trunk) {
        h = plain_dense(h, layer, layer.weight.value);
    }
    return h;
}

Var tape_trunk_forward(Tape& tape, std::vector<DenseLayer>& trunk, Var input) {
    Var h = input;
    for (DenseLayer& layer : trunk) {
        h = dense_forward(tape, layer, h);
    }
    return h;
}

Matrix complement(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - out[i];
    return out;
}

} // namespace

PsiModel PsiModel::build(const ModelConfig& config) {
    config.validate();
    PsiModel model;
    model.config_ = config;
    Rng rng(config.init_seed);

    const std::size_t D = config.feature_count;
    const std::size_t Dz = config.embed_dim;

    MaskSpec spec1{D, config.menn_hidden, Dz, config.mask_rounding_seed};
    model.menn1_ = build_masked_net(spec1, config.activation, "menn1", rng);

    Matrix base(1, D * Dz);
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = rng.normal(0.0, 0.1);
    model.baseline_ = Parameter(std::move(base), "baseline");

    Rng reducer_rng = rng.fork(11);
    model.reducer_ = make_dense_layer(D * Dz, Dz, Activation::identity, "reducer", reducer_rng);

    Rng f_rng = rng.fork(12);
    model.f_head_ = build_trunk(Dz, config.f_hidden, D, config.activation, "f_head", f_rng);

    Rng m2_rng = rng.fork(13);
    MaskSpec spec2{D, config.menn2_hidden, Dz, config.mask_rounding_seed + 1};
    model.menn2_ = build_masked_net(spec2, config.activation, "menn2", m2_rng);

    const std::size_t sigma_in =
        config.arch == Architecture::menn ? 2 * D * Dz : 2 * D + D * Dz;
    Rng s_rng = rng.fork(14);
    model.sigma_head_ =
        build_trunk(sigma_in, config.sigma_hidden, D, config.activation, "sigma_head", s_rng);

    if (config.arch == Architecture::ffnn_baseline) {
        Rng ffnn_rng = rng.fork(15);
        model.ffnn_ = build_trunk(2 * D, config.ffnn_hidden, D, config.activation, "ffnn",
                                  ffnn_rng);
    }

    model.phi0_ = Parameter(Matrix(1, 1, 0.0), "phi0");
    model.log_sigma0_ = Parameter(Matrix(1, 1, 0.0), "log_sigma0");
    return model;
}

void PsiModel::check_forward_args(const Matrix& inputs, const Matrix& removal) const {
    if (inputs.cols() != config_.feature_count) {
        throw ShapeError("model forward: input has " + std::to_string(inputs.cols()) +
                         " features, model expects " + std::to_string(config_.feature_count));
    }
    check_shapes_match(inputs, removal, "model forward removal");
    if (!inputs.all_finite()) {
        throw NumericError("model forward: non-finite input");
    }
}

Matrix PsiModel::expand_removal(const Matrix& removal) const {
    const std::size_t Dz = config_.embed_dim;
    Matrix out(removal.rows(), removal.cols() * Dz);
    for (std::size_t i = 0; i < removal.rows(); ++i) {
        for (std::size_t d = 0; d < removal.cols(); ++d) {
            for (std::size_t e = 0; e < Dz; ++e) out(i, d * Dz + e) = removal(i, d);
        }
    }
    return out;
}

Matrix PsiModel::ffnn_input(const Matrix& inputs, const Matrix& removal) const {
    const std::size_t D = config_.feature_count;
    Matrix out(inputs.rows(), 2 * D);
    const double c = config_.ffnn_baseline_value;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        for (std::size_t d = 0; d < D; ++d) {
            const double r = removal(i, d);
            out(i, d) = inputs(i, d) * r + c * (1.0 - r);
            out(i, D + d) = r;
        }
    }
    return out;
}

Var PsiModel::forward_f(Tape& tape, const Matrix& inputs, const Matrix& removal) {
    check_forward_args(inputs, removal);
    if (config_.arch == Architecture::ffnn_baseline) {
        Var inp = tape.constant(ffnn_input(inputs, removal));
        Var raw = tape_trunk_forward(tape, ffnn_, inp);
        return tape.mul_const(raw, removal);
    }
    Var x = tape.constant(inputs);
    Var zflat = tape_masked_forward(tape, menn1_, x);
    Matrix rexp = expand_removal(removal);
    Var kept = tape.mul_const(zflat, rexp);
    Var filled = tape.mul_const(tape.bcast_rows(tape.leaf(baseline_), inputs.rows()),
                                complement(rexp));
    Var zprime = tape.add(kept, filled);
    Var reduced = dense_forward(tape, reducer_, zprime);
    Var raw = tape_trunk_forward(tape, f_head_, reduced);
    return tape.mul_const(raw, removal);
}

PsiModel::ForwardVars PsiModel::forward(Tape& tape, const Matrix& inputs,
                                        const Matrix& removal) {
    check_forward_args(inputs, removal);
    Var f{};
    Var sigma_in_ctx{};
    if (config_.arch == Architecture::ffnn_baseline) {
        Matrix inp = ffnn_input(inputs, removal);
        Var inp_var = tape.constant(inp);
        Var raw = tape_trunk_forward(tape, ffnn_, inp_var);
        f = tape.mul_const(raw, removal);
        sigma_in_ctx = tape.constant(inp); // already parameter-free
    } else {
        Var x = tape.constant(inputs);
        Var zflat = tape_masked_forward(tape, menn1_, x);
        Matrix rexp = expand_removal(removal);
        Var kept = tape.mul_const(zflat, rexp);
        Var filled = tape.mul_const(tape.bcast_rows(tape.leaf(baseline_), inputs.rows()),
                                    complement(rexp));
        Var zprime = tape.add(kept, filled);
        Var reduced = dense_forward(tape, reducer_, zprime);
        Var raw = tape_trunk_forward(tape, f_head_, reduced);
        f = tape.mul_const(raw, removal);
        sigma_in_ctx = tape.detach(zprime);
    }
    // The sigma path sees frozen copies of the embeddings and f outputs, so no
    // gradient reaches the prediction path through it.
    Var f_frozen = tape.detach(f);
    Var o = tape_masked_forward(tape, menn2_, f_frozen);
    Var sigma_in = tape.concat_cols(sigma_in_ctx, o);
    Var raw_sigma = tape_trunk_forward(tape, sigma_head_, sigma_in);
    Var sigma = tape.add_scalar(tape.softplus(raw_sigma), config_.sigma_floor);
    return {f, sigma};
}

Matrix PsiModel::forward_f(const Matrix& inputs, const Matrix& removal) const {
    check_forward_args(inputs, removal);
    if (config_.arch == Architecture::ffnn_baseline) {
        Matrix raw = plain_trunk_forward(ffnn_, ffnn_input(inputs, removal));
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] *= removal[i];
        return raw;
    }
    Matrix zflat = plain_masked_forward(menn1_, inputs);
    Matrix rexp = expand_removal(removal);
    Matrix zprime(zflat.rows(), zflat.cols());
    for (std::size_t i = 0; i < zflat.rows(); ++i) {
        for (std::size_t j = 0; j < zflat.cols(); ++j) {
            zprime(i, j) = zflat(i, j) * rexp(i, j) + baseline_.value[j] * (1.0 - rexp(i, j));
        }
    }
    Matrix reduced = plain_dense(zprime, reducer_, reducer_.weight.value);
    Matrix raw = plain_trunk_forward(f_head_, reduced);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] *= removal[i];
    return raw;
}

PsiModel::ForwardValues PsiModel::forward(const Matrix& inputs, const Matrix& removal) const {
    check_forward_args(inputs, removal);
    Matrix f;
    Matrix sigma_ctx;
    if (config_.arch == Architecture::ffnn_baseline) {
        Matrix inp = ffnn_input(inputs, removal);
        Matrix raw = plain_trunk_forward(ffnn_, inp);
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] *= removal[i];
        f = std::move(raw);
        sigma_ctx = std::move(inp);
    } else {
        Matrix zflat = plain_masked_forward(menn1_, inputs);
        Matrix rexp = expand_removal(removal);
        Matrix zprime(zflat.rows(), zflat.cols());
        for (std::size_t i = 0; i < zflat.rows(); ++i) {
            for (std::size_t j = 0; j < zflat.cols(); ++j) {
                zprime(i, j) =
                    zflat(i, j) * rexp(i, j) + baseline_.value[j] * (1.0 - rexp(i, j));
            }
        }
        Matrix reduced = plain_dense(zprime, reducer_, reducer_.weight.value);
        Matrix raw = plain_trunk_forward(f_head_, reduced);
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] *= removal[i];
        f = std::move(raw);
        sigma_ctx = std::move(zprime);
    }
    Matrix o = plain_masked_forward(menn2_, f);
    Matrix sigma_in(f.rows(), sigma_ctx.cols() + o.cols());
    for (std::size_t i = 0; i < f.rows(); ++i) {
        for (std::size_t j = 0; j < sigma_ctx.cols(); ++j) sigma_in(i, j) = sigma_ctx(i, j);
        for (std::size_t j = 0; j < o.cols(); ++j) sigma_in(i, sigma_ctx.cols() + j) = o(i, j);
    }
    Matrix raw_sigma = plain_trunk_forward(sigma_head_, sigma_in);
    for (std::size_t i = 0; i < raw_sigma.size(); ++i) {
        raw_sigma[i] = softplus_value(raw_sigma[i]) + config_.sigma_floor;
    }
    return {std::move(f), std::move(raw_sigma)};
}

Matrix PsiModel::embed_features(std::span<const double> x) const {
    if (x.size() != config_.feature_count) {
        throw ShapeError("embed_features: wrong input length");
    }
    Matrix input = Matrix::row_vector(x);
    if (!input.all_finite()) throw NumericError("embed_features: non-finite input");
    Matrix zflat = plain_masked_forward(menn1_, input);
    Matrix z(config_.feature_count, config_.embed_dim);
    for (std::size_t d = 0; d < config_.feature_count; ++d) {
        for (std::size_t e = 0; e < config_.embed_dim; ++e) {
            z(d, e) = zflat[d * config_.embed_dim + e];
        }
    }
    return z;
}

std::vector<double> PsiModel::f_values(std::span<const double> x,
                                       const RemovalMask& mask) const {
    Matrix f = forward_f(Matrix::row_vector(x), removal_matrix({mask}));
    return std::vector<double>(f.data(), f.data() + f.size());
}

double PsiModel::f_sum(std::span<const double> x, const RemovalMask& mask) const {
    Matrix f = forward_f(Matrix::row_vector(x), removal_matrix({mask}));
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j];
    return s;
}

PsiModel::ForwardValues PsiModel::forward_one(std::span<const double> x,
                                              const RemovalMask& mask) const {
    return forward(Matrix::row_vector(x), removal_matrix({mask}));
}

std::vector<Parameter*> PsiModel::parameters() {
    std::vector<Parameter*> out;
    auto add_layers = [&out](std::vector<DenseLayer>& layers) {
        for (DenseLayer& l : layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    };
    add_layers(menn1_.layers);
    out.push_back(&baseline_);
    out.push_back(&reducer_.weight);
    out.push_back(&reducer_.bias);
    add_layers(f_head_);
    add_layers(menn2_.layers);
    add_layers(sigma_head_);
    add_layers(ffnn_);
    out.push_back(&phi0_);
    out.push_back(&log_sigma0_);
    return out;
}

std::vector<const Parameter*> PsiModel::parameters() const {
    auto mut = const_cast<PsiModel*>(this)->parameters();
    return std::vector<const Parameter*>(mut.begin(), mut.end());
}

Matrix removal_matrix(const std::vector<RemovalMask>& masks) {
    if (masks.empty()) return Matrix();
    Matrix out(masks.size(), masks.front().size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t d = 0; d < masks[i].size(); ++d) {
            out(i, d) = masks[i].present(d) ? 1.0 : 0.0;
        }
    }
    return out;
}

} // namespace psi
