#ifndef PSI_ACTIVATIONS_HPP
#define PSI_ACTIVATIONS_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace psi {

enum class Activation { identity, relu, elu, snake };

inline double activate_scalar(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::elu: return x > 0.0 ? x : std::expm1(x);
        case Activation::snake: {
            const double s = std::sin(x);
            return x + s * s;
        }
    }
    return x;
}

inline double activate_deriv_scalar(Activation a, double x) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::elu: return x > 0.0 ? 1.0 : std::exp(x);
        case Activation::snake: return 1.0 + std::sin(2.0 * x);
    }
    return 1.0;
}

inline double softplus_value(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double sigmoid_value(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "elu") return Activation::elu;
    if (s == "snake") return Activation::snake;
    throw std::invalid_argument("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
        case Activation::snake: return "snake";
    }
    return "identity";
}

} // namespace psi

#endif
