#include "psi/matrix.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psi {

namespace {
int g_max_threads = 1;
}

void set_max_threads(int n) {
    g_max_threads = n < 1 ? 1 : n;
#ifdef _OPENMP
    omp_set_num_threads(g_max_threads);
#endif
}

int max_threads() { return g_max_threads; }

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void check_shapes_match(const Matrix& a, const Matrix& b, const std::string& where) {
    if (!a.same_shape(b)) {
        throw ShapeError(where + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}

namespace {

// ikj loop order: each out(i,j) accumulates over k in increasing order, so the
// per-element result does not depend on how rows are scheduled across threads.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
    const std::size_t K = a.cols();
    const std::size_t N = b.cols();
    double* out_row = out.data() + i * N;
    const double* a_row = a.data() + i * K;
    for (std::size_t k = 0; k < K; ++k) {
        const double aik = a_row[k];
        const double* b_row = b.data() + k * N;
        for (std::size_t j = 0; j < N; ++j) {
            out_row[j] += aik * b_row[j];
        }
    }
}

} // namespace

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        matmul_row(a, b, out, i);
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols(), 0.0);
    const long long R = static_cast<long long>(a.rows());
#ifdef _OPENMP
    const bool parallel = g_max_threads > 1 && a.rows() * a.cols() * b.cols() > 16384;
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (long long i = 0; i < R; ++i) {
        matmul_row(a, b, out, static_cast<std::size_t>(i));
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
    }
    Matrix out(a.rows(), b.rows(), 0.0);
    const long long R = static_cast<long long>(a.rows());
    const std::size_t K = a.cols();
    const std::size_t N = b.rows();
#ifdef _OPENMP
    const bool parallel = g_max_threads > 1 && a.rows() * a.cols() * b.rows() > 16384;
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (long long i = 0; i < R; ++i) {
        const double* a_row = a.data() + static_cast<std::size_t>(i) * K;
        double* out_row = out.data() + static_cast<std::size_t>(i) * N;
        for (std::size_t j = 0; j < N; ++j) {
            const double* b_row = b.data() + j * K;
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
            out_row[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: inner dimensions differ (" + std::to_string(a.rows()) +
                         " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.cols(), b.cols(), 0.0);
    const std::size_t M = a.cols();
    const std::size_t K = a.rows();
    const std::size_t N = b.cols();
#ifdef _OPENMP
    const bool parallel = g_max_threads > 1 && M * K * N > 16384;
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (long long i = 0; i < static_cast<long long>(M); ++i) {
        double* out_row = out.data() + static_cast<std::size_t>(i) * N;
        for (std::size_t k = 0; k < K; ++k) {
            const double aki = a(k, static_cast<std::size_t>(i));
            const double* b_row = b.data() + k * N;
            for (std::size_t j = 0; j < N; ++j) out_row[j] += aki * b_row[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

Matrix colsum(const Matrix& a) {
    Matrix out(1, a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out[j] += a(i, j);
        }
    }
    return out;
}

} // namespace psi
