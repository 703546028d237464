#include "aebound/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aebound {

namespace {

void require_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("matrix dimensions must be positive, got " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
}

void require_length(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(expected) + ", got " + std::to_string(got));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
    require_dims(rows, cols);
    values_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    require_dims(rows, cols);
    require_length(rows * cols, values_.size(), "matrix values");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<Vector> tmp;
    tmp.reserve(rows.size());
    for (const auto& r : rows) tmp.emplace_back(r);
    return from_rows(tmp);
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_rows: no rows");
    const std::size_t cols = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        require_length(cols, r.size(), "from_rows row");
        values.insert(values.end(), r.begin(), r.end());
    }
    return Matrix(rows.size(), cols, std::move(values));
}

Vector Matrix::apply(std::span<const double> x) const {
    require_length(cols_, x.size(), "Matrix::apply input");
    Vector y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const double* w = values_.data() + r * cols_;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) acc += w[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Vector Matrix::apply_transposed(std::span<const double> x) const {
    require_length(rows_, x.size(), "Matrix::apply_transposed input");
    Vector y(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const double* w = values_.data() + r * cols_;
        const double xr = x[r];
        for (std::size_t c = 0; c < cols_; ++c) y[c] += w[c] * xr;
    }
    return y;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw std::invalid_argument("select_rows: empty selection");
    std::vector<double> values;
    values.reserve(indices.size() * cols_);
    for (std::size_t i : indices) {
        if (i >= rows_) throw std::out_of_range("select_rows: row index out of range");
        auto r = row(i);
        values.insert(values.end(), r.begin(), r.end());
    }
    return Matrix(indices.size(), cols_, std::move(values));
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (other.rows_ != rows_ || other.cols_ != cols_) {
        throw std::invalid_argument("matrix sum: shape mismatch");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

bool Matrix::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix operator*(double s, Matrix m) {
    m *= s;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + ")");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_length(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require_length(a.size(), b.size(), "distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

}  // namespace aebound
