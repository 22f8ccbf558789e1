#ifndef PSI_MATRIX_HPP
#define PSI_MATRIX_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psi {

/// Dense row-major matrix of doubles. A 1xN matrix doubles as a row vector.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix row_vector(std::span<const double> values) {
        Matrix m(1, values.size());
        for (std::size_t j = 0; j < values.size(); ++j) m.data_[j] = values[j];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_shapes_match(const Matrix& a, const Matrix& b, const std::string& where);

/// out = a * b. Parallel over output rows; per-element accumulation order is
/// fixed, so the result is bit-identical to matmul_serial for any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Single-threaded reference used by tests and the kernel benchmark.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

/// a * transpose(b) without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// transpose(a) * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Column sums of a as a 1xC row vector.
Matrix colsum(const Matrix& a);

void set_max_threads(int n);
int max_threads();

} // namespace psi

#endif
