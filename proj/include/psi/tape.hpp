#ifndef PSI_TAPE_HPP
#define PSI_TAPE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "psi/activations.hpp"
#include "psi/matrix.hpp"

namespace psi {

struct Parameter {
    Matrix value;
    Matrix gradient;
    bool frozen = false;
    std::string name;

    Parameter() = default;
    Parameter(Matrix v, std::string n)
        : value(std::move(v)), gradient(value.rows(), value.cols(), 0.0), name(std::move(n)) {}

    void zero_grad() { gradient.fill(0.0); }
};

class Tape;

/// Handle to a tape node. Copyable, cheap, valid until the tape is cleared.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

struct TapeStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Captures the values crossing gradient barriers on one forward pass and
/// replays them on later passes. Finite-difference checks use this so the
/// frozen context stays fixed while parameters are perturbed, matching what
/// the recorded gradient actually differentiates.
struct BarrierReplay {
    std::vector<Matrix> values;
    std::size_t next = 0;
    bool recording = true;
};

/// Reverse-mode tape. Records one forward computation; backward() accumulates
/// d(loss)/d(parameter) into every reachable unfrozen Parameter's gradient.
class Tape {
public:
    Var leaf(Parameter& p);
    Var constant(Matrix m);
    Var constant_scalar(double v) { return constant(Matrix(1, 1, v)); }

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    /// Broadcast a 1xC row vector over the rows of a.
    Var add_rowvec(Var a, Var v);
    /// Elementwise multiply by a fixed matrix (masks live here; their zeros
    /// also zero the gradient flow).
    Var mul_const(Var a, Matrix c);
    Var add_const(Var a, Matrix c);
    Var scale(Var a, double s);
    Var add_scalar(Var a, double c);
    Var neg(Var a) { return scale(a, -1.0); }

    Var activate(Var a, Activation act);
    Var softplus(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var sqrt(Var a);
    Var square(Var a);
    Var abs(Var a);

    Var sum_all(Var a);
    Var rowsum(Var a);
    /// Contiguous row block [begin, begin + count).
    Var slice_rows(Var a, std::size_t begin, std::size_t count);
    /// Single entry a(r, c) as a 1x1 scalar.
    Var cell(Var a, std::size_t r, std::size_t c);
    /// out(i,0) = a(i, idx[i]).
    Var gather_cols(Var a, std::vector<std::size_t> idx);
    /// Replicate a 1xC row vector into n_rows rows.
    Var bcast_rows(Var v, std::size_t n_rows);
    Var concat_cols(Var a, Var b);
    /// Gradient barrier: value passes through, gradients stop.
    Var detach(Var a);
    Var normal_cdf(Var a);
    Var normal_icdf(Var a);
    /// Clamp values to [lo, hi]; gradient passes through unclamped entries only.
    Var clamp(Var a, double lo, double hi);

    const Matrix& value(Var v) const;
    const Matrix& grad(Var v) const;

    /// Reverse pass from a scalar (1x1) loss recorded on this tape.
    void backward(Var loss);

    void clear();
    std::size_t node_count() const { return nodes_.size(); }

    void set_barrier_replay(BarrierReplay* replay) {
        replay_ = replay;
        if (replay_ != nullptr) replay_->next = 0;
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, const Matrix&)> back; // empty for leaves/constants
        Parameter* param = nullptr;
    };

    Var push(Matrix value, std::function<void(Tape&, const Matrix&)> back);
    void accumulate(int id, const Matrix& g);
    Node& node(Var v);
    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    BarrierReplay* replay_ = nullptr;

    friend struct Var;
};

// Operator sugar so scalar/elementwise formulas read naturally.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator*(Var a, double s) { return a.tape->scale(a, s); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }
inline Var operator+(Var a, double c) { return a.tape->add_scalar(a, c); }
inline Var operator+(double c, Var a) { return a.tape->add_scalar(a, c); }
inline Var operator-(Var a, double c) { return a.tape->add_scalar(a, -c); }
inline Var operator-(double c, Var a) { return a.tape->add_scalar(a.tape->neg(a), c); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator/(Var a, double s) { return a.tape->scale(a, 1.0 / s); }

inline Var exp(Var a) { return a.tape->exp(a); }
inline Var log(Var a) { return a.tape->log(a); }
inline Var sqrt(Var a) { return a.tape->sqrt(a); }
inline Var square(Var a) { return a.tape->square(a); }
inline Var abs(Var a) { return a.tape->abs(a); }
inline Var softplus(Var a) { return a.tape->softplus(a); }
inline Var normal_cdf(Var a) { return a.tape->normal_cdf(a); }
inline Var normal_icdf(Var a) { return a.tape->normal_icdf(a); }

} // namespace psi

#endif
