#include "psi/nn.hpp"

#include <cmath>

namespace psi {

DenseLayer make_dense_layer(std::size_t in, std::size_t out, Activation act,
                            const std::string& name, Rng& rng) {
    DenseLayer layer;
    const double gain = act == Activation::relu ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / static_cast<double>(in));
    Matrix w(in, out);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, stddev);
    layer.weight = Parameter(std::move(w), name + ".weight");
    layer.bias = Parameter(Matrix(1, out, 0.0), name + ".bias");
    layer.activation = act;
    return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
    if (input.cols() != layer.in_dim()) {
        throw ShapeError("dense_forward: input has " + std::to_string(input.cols()) +
                         " cols, layer expects " + std::to_string(layer.in_dim()));
    }
    Matrix out = matmul(input, layer.weight.value);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out(i, j) = activate_scalar(layer.activation, out(i, j) + layer.bias.value[j]);
        }
    }
    return out;
}

Var dense_forward(Tape& tape, DenseLayer& layer, Var input) {
    if (tape.value(input).cols() != layer.in_dim()) {
        throw ShapeError("dense_forward: input has " +
                         std::to_string(tape.value(input).cols()) + " cols, layer expects " +
                         std::to_string(layer.in_dim()));
    }
    Var w = tape.leaf(layer.weight);
    Var b = tape.leaf(layer.bias);
    Var pre = tape.add_rowvec(tape.matmul(input, w), b);
    return tape.activate(pre, layer.activation);
}

void Optimizer::step(std::vector<Parameter*>& params) {
    ++t_;
    for (Parameter* p : params) {
        if (!p->gradient.all_finite()) {
            throw NumericError("optimizer step: non-finite gradient in parameter '" + p->name +
                               "'");
        }
        if (p->frozen) {
            p->zero_grad();
            continue;
        }
        Matrix& v = p->value;
        Matrix& g = p->gradient;
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                v[i] -= lr_ * (g[i] + decay_ * v[i]);
            }
        } else {
            Moments& mo = state_[p];
            if (mo.m.empty()) {
                mo.m = Matrix(v.rows(), v.cols(), 0.0);
                mo.v = Matrix(v.rows(), v.cols(), 0.0);
            }
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double gi = g[i] + decay_ * v[i];
                mo.m[i] = kBeta1 * mo.m[i] + (1.0 - kBeta1) * gi;
                mo.v[i] = kBeta2 * mo.v[i] + (1.0 - kBeta2) * gi * gi;
                const double mhat = mo.m[i] / c1;
                const double vhat = mo.v[i] / c2;
                v[i] -= lr_ * mhat / (std::sqrt(vhat) + kEpsilon);
            }
        }
        p->zero_grad();
    }
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer: " + s);
}

} // namespace psi
