#ifndef PSI_NN_HPP
#define PSI_NN_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "psi/activations.hpp"
#include "psi/matrix.hpp"
#include "psi/rng.hpp"
#include "psi/tape.hpp"

namespace psi {

struct DenseLayer {
    Parameter weight; // in x out
    Parameter bias;   // 1 x out
    Activation activation = Activation::identity;

    std::size_t in_dim() const { return weight.value.rows(); }
    std::size_t out_dim() const { return weight.value.cols(); }
};

DenseLayer make_dense_layer(std::size_t in, std::size_t out, Activation act,
                            const std::string& name, Rng& rng);

/// activation(input * W + b), applied row-wise over the batch.
Matrix dense_forward(const DenseLayer& layer, const Matrix& input);
Var dense_forward(Tape& tape, DenseLayer& layer, Var input);

enum class OptimizerKind { sgd, adam };

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// sgd: v <- v - lr * (g + decay * v).
/// adam: standard first/second moment update, decay folded into the gradient;
/// moment decays 0.9 / 0.999, epsilon 1e-8.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, double weight_decay = 0.0)
        : kind_(kind), lr_(learning_rate), decay_(weight_decay) {}

    void step(std::vector<Parameter*>& params);

    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return lr_; }
    double weight_decay() const { return decay_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

private:
    struct Moments {
        Matrix m;
        Matrix v;
    };

    OptimizerKind kind_;
    double lr_;
    double decay_;
    long long t_ = 0;
    std::unordered_map<Parameter*, Moments> state_;
};

OptimizerKind optimizer_kind_from_string(const std::string& s);

} // namespace psi

#endif
