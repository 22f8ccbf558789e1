#include "psi/tape.hpp"

#include <cmath>

#include "psi/gauss.hpp"

namespace psi {

Tape::Node& Tape::node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
const Tape::Node& Tape::node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

const Matrix& Tape::value(Var v) const { return node(v).value; }
const Matrix& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::push(Matrix value, std::function<void(Tape&, const Matrix&)> back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Matrix& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) {
        n.grad = g;
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

Var Tape::leaf(Parameter& p) {
    Node n;
    n.value = p.value;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix m) { return push(std::move(m), {}); }

Var Tape::matmul(Var a, Var b) {
    Matrix out = psi::matmul(value(a), value(b));
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, matmul_nt(g, t.nodes_[ib].value));
        t.accumulate(ib, matmul_tn(t.nodes_[ia].value, g));
    });
}

Var Tape::add(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    check_shapes_match(va, vb, "tape add");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var Tape::sub(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    check_shapes_match(va, vb, "tape sub");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        Matrix ng = g;
        for (std::size_t i = 0; i < ng.size(); ++i) ng[i] = -ng[i];
        t.accumulate(ib, ng);
    });
}

Var Tape::mul(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    check_shapes_match(va, vb, "tape mul");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, const Matrix& g) {
        const Matrix& va2 = t.nodes_[ia].value;
        const Matrix& vb2 = t.nodes_[ib].value;
        Matrix ga = g, gb = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] *= vb2[i];
            gb[i] *= va2[i];
        }
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
    });
}

Var Tape::div(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    check_shapes_match(va, vb, "tape div");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= vb[i];
    const int ia = a.id, ib = b.id;
    return push(std::move(out), [ia, ib](Tape& t, const Matrix& g) {
        const Matrix& va2 = t.nodes_[ia].value;
        const Matrix& vb2 = t.nodes_[ib].value;
        Matrix ga = g, gb = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] /= vb2[i];
            gb[i] *= -va2[i] / (vb2[i] * vb2[i]);
        }
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
    });
}

Var Tape::add_rowvec(Var a, Var v) {
    const Matrix& va = value(a);
    const Matrix& vv = value(v);
    if (vv.rows() != 1 || vv.cols() != va.cols()) {
        throw ShapeError("tape add_rowvec: bias must be 1x" + std::to_string(va.cols()));
    }
    Matrix out = va;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += vv[j];
    }
    const int ia = a.id, iv = v.id;
    return push(std::move(out), [ia, iv](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        t.accumulate(iv, colsum(g));
    });
}

Var Tape::mul_const(Var a, Matrix c) {
    const Matrix& va = value(a);
    check_shapes_match(va, c, "tape mul_const");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
    const int ia = a.id;
    return push(std::move(out), [ia, c = std::move(c)](Tape& t, const Matrix& g) {
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= c[i];
        t.accumulate(ia, ga);
    });
}

Var Tape::add_const(Var a, Matrix c) {
    const Matrix& va = value(a);
    check_shapes_match(va, c, "tape add_const");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var Tape::scale(Var a, double s) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    const int ia = a.id;
    return push(std::move(out), [ia, s](Tape& t, const Matrix& g) {
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= s;
        t.accumulate(ia, ga);
    });
}

Var Tape::add_scalar(Var a, double c) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var Tape::activate(Var a, Activation act) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = activate_scalar(act, out[i]);
    const int ia = a.id;
    return push(std::move(out), [ia, act](Tape& t, const Matrix& g) {
        const Matrix& pre = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] *= activate_deriv_scalar(act, pre[i]);
        }
        t.accumulate(ia, ga);
    });
}

Var Tape::softplus(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus_value(out[i]);
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) {
        const Matrix& pre = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= sigmoid_value(pre[i]);
        t.accumulate(ia, ga);
    });
}

Var Tape::exp(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    const int ia = a.id;
    const int iout = static_cast<int>(nodes_.size());
    return push(std::move(out), [ia, iout](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[iout].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= v[i];
        t.accumulate(ia, ga);
    });
}

Var Tape::log(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= v[i];
        t.accumulate(ia, ga);
    });
}

Var Tape::sqrt(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
    const int ia = a.id;
    const int iout = static_cast<int>(nodes_.size());
    return push(std::move(out), [ia, iout](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[iout].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 0.5 / v[i];
        t.accumulate(ia, ga);
    });
}

Var Tape::square(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 2.0 * v[i];
        t.accumulate(ia, ga);
    });
}

Var Tape::abs(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] *= v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
        }
        t.accumulate(ia, ga);
    });
}

Var Tape::sum_all(Var a) {
    const Matrix& va = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
    const int ia = a.id;
    return push(Matrix(1, 1, s), [ia](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga(v.rows(), v.cols(), g[0]);
        t.accumulate(ia, ga);
    });
}

Var Tape::rowsum(Var a) {
    const Matrix& va = value(a);
    Matrix out(va.rows(), 1, 0.0);
    for (std::size_t i = 0; i < va.rows(); ++i) {
        for (std::size_t j = 0; j < va.cols(); ++j) out(i, 0) += va(i, j);
    }
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga(v.rows(), v.cols());
        for (std::size_t i = 0; i < v.rows(); ++i) {
            for (std::size_t j = 0; j < v.cols(); ++j) ga(i, j) = g(i, 0);
        }
        t.accumulate(ia, ga);
    });
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t count) {
    const Matrix& va = value(a);
    if (begin + count > va.rows()) throw ShapeError("tape slice_rows: out of range");
    Matrix out(count, va.cols());
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < va.cols(); ++j) out(i, j) = va(begin + i, j);
    }
    const int ia = a.id;
    return push(std::move(out), [ia, begin, count](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga(v.rows(), v.cols(), 0.0);
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = 0; j < v.cols(); ++j) ga(begin + i, j) = g(i, j);
        }
        t.accumulate(ia, ga);
    });
}

Var Tape::cell(Var a, std::size_t r, std::size_t c) {
    const Matrix& va = value(a);
    const int ia = a.id;
    return push(Matrix(1, 1, va(r, c)), [ia, r, c](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga(v.rows(), v.cols(), 0.0);
        ga(r, c) = g[0];
        t.accumulate(ia, ga);
    });
}

Var Tape::gather_cols(Var a, std::vector<std::size_t> idx) {
    const Matrix& va = value(a);
    if (idx.size() != va.rows()) {
        throw ShapeError("tape gather_cols: one index per row required");
    }
    Matrix out(va.rows(), 1);
    for (std::size_t i = 0; i < va.rows(); ++i) out(i, 0) = va(i, idx[i]);
    const int ia = a.id;
    return push(std::move(out), [ia, idx = std::move(idx)](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga(v.rows(), v.cols(), 0.0);
        for (std::size_t i = 0; i < v.rows(); ++i) ga(i, idx[i]) = g(i, 0);
        t.accumulate(ia, ga);
    });
}

Var Tape::bcast_rows(Var v, std::size_t n_rows) {
    const Matrix& vv = value(v);
    if (vv.rows() != 1) throw ShapeError("tape bcast_rows: source must be a row vector");
    Matrix out(n_rows, vv.cols());
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t j = 0; j < vv.cols(); ++j) out(i, j) = vv[j];
    }
    const int iv = v.id;
    return push(std::move(out), [iv](Tape& t, const Matrix& g) { t.accumulate(iv, colsum(g)); });
}

Var Tape::concat_cols(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.rows() != vb.rows()) throw ShapeError("tape concat_cols: row counts differ");
    Matrix out(va.rows(), va.cols() + vb.cols());
    for (std::size_t i = 0; i < va.rows(); ++i) {
        for (std::size_t j = 0; j < va.cols(); ++j) out(i, j) = va(i, j);
        for (std::size_t j = 0; j < vb.cols(); ++j) out(i, va.cols() + j) = vb(i, j);
    }
    const int ia = a.id, ib = b.id;
    const std::size_t na = va.cols(), nb = vb.cols();
    return push(std::move(out), [ia, ib, na, nb](Tape& t, const Matrix& g) {
        Matrix ga(g.rows(), na), gb(g.rows(), nb);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < na; ++j) ga(i, j) = g(i, j);
            for (std::size_t j = 0; j < nb; ++j) gb(i, j) = g(i, na + j);
        }
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
    });
}

Var Tape::detach(Var a) {
    if (replay_ != nullptr) {
        if (replay_->recording) {
            replay_->values.push_back(value(a));
        } else {
            if (replay_->next >= replay_->values.size()) {
                throw TapeStateError("barrier replay exhausted");
            }
            return push(replay_->values[replay_->next++], {});
        }
    }
    return push(value(a), {});
}

Var Tape::normal_cdf(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = psi::normal_cdf(out[i]);
    const int ia = a.id;
    return push(std::move(out), [ia](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= normal_pdf(v[i]);
        t.accumulate(ia, ga);
    });
}

Var Tape::normal_icdf(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal_quantile(out[i]);
    const int ia = a.id;
    const int iout = static_cast<int>(nodes_.size());
    return push(std::move(out), [ia, iout](Tape& t, const Matrix& g) {
        const Matrix& y = t.nodes_[iout].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= normal_pdf(y[i]);
        t.accumulate(ia, ga);
    });
}

Var Tape::clamp(Var a, double lo, double hi) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < lo) out[i] = lo;
        if (out[i] > hi) out[i] = hi;
    }
    const int ia = a.id;
    return push(std::move(out), [ia, lo, hi](Tape& t, const Matrix& g) {
        const Matrix& v = t.nodes_[ia].value;
        Matrix ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) {
            if (v[i] < lo || v[i] > hi) ga[i] = 0.0;
        }
        t.accumulate(ia, ga);
    });
}

void Tape::backward(Var loss) {
    if (nodes_.empty()) {
        throw TapeStateError("backward without a recorded forward pass");
    }
    if (loss.tape != this || loss.id < 0 || loss.id >= static_cast<int>(nodes_.size())) {
        throw TapeStateError("backward: loss does not belong to this tape");
    }
    const Matrix& lv = nodes_[static_cast<std::size_t>(loss.id)].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw TapeStateError("backward: loss must be a 1x1 scalar");
    }
    accumulate(loss.id, Matrix(1, 1, 1.0));
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty()) continue;
        if (n.back) {
            n.back(*this, n.grad);
        }
        if (n.param != nullptr && !n.param->frozen) {
            for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->gradient[k] += n.grad[k];
        }
    }
}

void Tape::clear() { nodes_.clear(); }

} // namespace psi
