#pragma once

// Dense N-way tensors and matrices, both column-major (first index fastest),
// with the two matricization schemes used throughout the library:
//
//   mode-n unfolding      X_(n): I_n x (I_1..I_{n-1} I_{n+1}..I_N)
//   canonical unfolding   X_[k]: (I_1..I_k) x (I_{k+1}..I_N)
//
// Mode and split indices are 1-based at this API boundary.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace despeckle {

using Dims = std::vector<std::size_t>;

std::size_t numel(std::span<const std::size_t> dims);

// Non-owning column-major matrix view with leading dimension.
struct MatrixView {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t ld = 0;
    const double* data = nullptr;

    double operator()(std::size_t i, std::size_t j) const { return data[i + j * ld]; }
};

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i + j * rows_]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i + j * rows_]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    MatrixView view() const noexcept { return {rows_, cols_, rows_, data_.data()}; }

    DenseMatrix transposed() const;
    std::vector<double> release() && { return std::move(data_); }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Immutable once constructed. Constructors reject NaN/Inf.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Dims dims);
    DenseTensor(Dims dims, std::vector<double> data);

    std::size_t order() const noexcept { return dims_.size(); }
    const Dims& dims() const noexcept { return dims_; }
    // 0-based mode.
    std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> data() const noexcept { return data_; }

    // 0-based multi-index.
    double operator()(std::span<const std::size_t> index) const;
    double operator()(std::initializer_list<std::size_t> index) const {
        return (*this)(std::span<const std::size_t>(index.begin(), index.size()));
    }

    std::vector<double> release() && { return std::move(data_); }

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    Dims dims_;
    std::vector<double> data_;
};

// Mode-n unfolding, n in 1..N.
DenseMatrix unfold_mode_n(const DenseTensor& t, std::size_t n);
DenseTensor fold_mode_n(const DenseMatrix& m, std::span<const std::size_t> dims, std::size_t n);

// Canonical unfolding, k in 1..N-1. With column-major storage this is a
// reshape: the returned matrix holds the tensor's flat data unchanged.
DenseMatrix unfold_canonical(const DenseTensor& t, std::size_t k);
MatrixView canonical_view(const DenseTensor& t, std::size_t k);
DenseTensor fold_canonical(const DenseMatrix& m, std::span<const std::size_t> dims, std::size_t k);

// a x_n b, with cols(b) == dims(a)[n].
DenseTensor mode_n_product(const DenseTensor& a, const DenseMatrix& b, std::size_t n);

// Contraction of the last mode of a with the first mode of b.
DenseTensor contracted_product(const DenseTensor& a, const DenseTensor& b);

double frobenius_norm(const DenseTensor& t);
double frobenius_norm(const DenseMatrix& m);

// Flat-buffer versions used by the solvers, which keep their iterates in
// tensor layout. `out` must hold numel(dims with dims[n] := rows(b)) values.
void mode_n_product_into(std::span<const double> a, std::span<const std::size_t> dims,
                         MatrixView b, std::size_t n, std::span<double> out);

} // namespace despeckle
