#include "despeckle/tensor.hpp"

#include <cmath>
#include <string>

#include "despeckle/error.hpp"
#include "despeckle/simd.hpp"

namespace despeckle {
namespace {

std::string dims_str(std::span<const std::size_t> dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

void check_dims(std::span<const std::size_t> dims) {
    if (dims.empty()) throw InvalidArgument("tensor order must be at least 1");
    for (std::size_t d : dims)
        if (d == 0) throw InvalidArgument("tensor dimension must be positive: " + dims_str(dims));
}

void check_mode(std::size_t n, std::size_t order) {
    if (n < 1 || n > order)
        throw InvalidArgument("mode " + std::to_string(n) + " out of range 1.." + std::to_string(order));
}

void check_split(std::size_t k, std::size_t order) {
    if (k < 1 || k + 1 > order)
        throw InvalidArgument("split index " + std::to_string(k) + " out of range 1.." +
                              std::to_string(order == 0 ? 0 : order - 1));
}

// Product of dims[lo..hi), 0-based.
std::size_t span_product(std::span<const std::size_t> dims, std::size_t lo, std::size_t hi) {
    std::size_t p = 1;
    for (std::size_t i = lo; i < hi; ++i) p *= dims[i];
    return p;
}

} // namespace

const char* to_string(FormatErrorKind kind) noexcept {
    switch (kind) {
    case FormatErrorKind::io: return "io error";
    case FormatErrorKind::bad_magic: return "bad magic";
    case FormatErrorKind::bad_version: return "unsupported version";
    case FormatErrorKind::bad_element_type: return "bad element type";
    case FormatErrorKind::bad_header: return "bad header";
    case FormatErrorKind::truncated: return "truncated";
    case FormatErrorKind::trailing_bytes: return "trailing bytes";
    case FormatErrorKind::crc_mismatch: return "crc mismatch";
    case FormatErrorKind::inconsistent: return "inconsistent";
    case FormatErrorKind::parse: return "parse error";
    }
    return "format error";
}

std::size_t numel(std::span<const std::size_t> dims) { return span_product(dims, 0, dims.size()); }

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw InvalidArgument("matrix data length " + std::to_string(data_.size()) + " != " +
                              std::to_string(rows) + "x" + std::to_string(cols));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
        for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
}

DenseTensor::DenseTensor(Dims dims) : dims_(std::move(dims)) {
    check_dims(dims_);
    data_.assign(numel(dims_), 0.0);
}

DenseTensor::DenseTensor(Dims dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != numel(dims_))
        throw InvalidArgument("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                              dims_str(dims_));
    for (double v : data_)
        if (!std::isfinite(v)) throw InvalidInput("tensor contains non-finite entries");
}

double DenseTensor::operator()(std::span<const std::size_t> index) const {
    if (index.size() != dims_.size()) throw InvalidArgument("index order mismatch");
    std::size_t off = 0, stride = 1;
    for (std::size_t m = 0; m < dims_.size(); ++m) {
        if (index[m] >= dims_[m]) throw InvalidArgument("index out of range");
        off += index[m] * stride;
        stride *= dims_[m];
    }
    return data_[off];
}

// For column-major storage the tensor is `right` consecutive blocks, each a
// left x I_n column-major matrix. Column j of X_(n) splits as j = a + left*b.
DenseMatrix unfold_mode_n(const DenseTensor& t, std::size_t n) {
    check_mode(n, t.order());
    const auto& d = t.dims();
    const std::size_t left = span_product(d, 0, n - 1);
    const std::size_t in = d[n - 1];
    const std::size_t right = span_product(d, n, d.size());
    const double* src = t.data().data();

    std::vector<double> out(t.size());
    for (std::size_t b = 0; b < right; ++b) {
        const double* blk = src + b * left * in;
        for (std::size_t a = 0; a < left; ++a) {
            double* col = out.data() + (a + left * b) * in;
            for (std::size_t i = 0; i < in; ++i) col[i] = blk[a + left * i];
        }
    }
    return DenseMatrix(in, left * right, std::move(out));
}

DenseTensor fold_mode_n(const DenseMatrix& m, std::span<const std::size_t> dims, std::size_t n) {
    check_dims(dims);
    check_mode(n, dims.size());
    const std::size_t left = span_product(dims, 0, n - 1);
    const std::size_t in = dims[n - 1];
    const std::size_t right = span_product(dims, n, dims.size());
    if (m.rows() != in || m.cols() != left * right)
        throw InvalidArgument("matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                              " cannot fold to " + dims_str(dims) + " along mode " + std::to_string(n));

    std::vector<double> out(m.size());
    const double* src = m.data().data();
    for (std::size_t b = 0; b < right; ++b) {
        double* blk = out.data() + b * left * in;
        for (std::size_t a = 0; a < left; ++a) {
            const double* col = src + (a + left * b) * in;
            for (std::size_t i = 0; i < in; ++i) blk[a + left * i] = col[i];
        }
    }
    return DenseTensor(Dims(dims.begin(), dims.end()), std::move(out));
}

MatrixView canonical_view(const DenseTensor& t, std::size_t k) {
    check_split(k, t.order());
    const std::size_t rows = span_product(t.dims(), 0, k);
    return {rows, t.size() / rows, rows, t.data().data()};
}

DenseMatrix unfold_canonical(const DenseTensor& t, std::size_t k) {
    const MatrixView v = canonical_view(t, k);
    return DenseMatrix(v.rows, v.cols, std::vector<double>(t.data().begin(), t.data().end()));
}

DenseTensor fold_canonical(const DenseMatrix& m, std::span<const std::size_t> dims, std::size_t k) {
    check_dims(dims);
    check_split(k, dims.size());
    const std::size_t rows = span_product(dims, 0, k);
    if (m.rows() != rows || m.cols() != numel(dims) / rows)
        throw InvalidArgument("matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                              " cannot fold to " + dims_str(dims) + " at split " + std::to_string(k));
    return DenseTensor(Dims(dims.begin(), dims.end()), std::vector<double>(m.data().begin(), m.data().end()));
}

void mode_n_product_into(std::span<const double> a, std::span<const std::size_t> dims, MatrixView b,
                         std::size_t n, std::span<double> out) {
    check_dims(dims);
    check_mode(n, dims.size());
    const std::size_t left = span_product(dims, 0, n - 1);
    const std::size_t in = dims[n - 1];
    const std::size_t right = span_product(dims, n, dims.size());
    const std::size_t jn = b.rows;
    if (b.cols != in)
        throw InvalidArgument("mode-" + std::to_string(n) + " product: matrix has " + std::to_string(b.cols) +
                              " columns, tensor dimension is " + std::to_string(in));
    if (a.size() != left * in * right || out.size() != left * jn * right)
        throw InvalidArgument("mode-n product: buffer size mismatch");

    if (left == 1) {
        // X_(1) is the flat data itself: out = B * X_(1).
        simd::gemm(simd::Op::none, simd::Op::none, jn, right, in, 1.0, b.data, b.ld, a.data(), in, 0.0, out.data(),
                   jn);
        return;
    }
    for (std::size_t r = 0; r < right; ++r) {
        // Each block is left x I_n; the product acts on its rows from the right.
        simd::gemm(simd::Op::none, simd::Op::transpose, left, jn, in, 1.0, a.data() + r * left * in, left, b.data,
                   b.ld, 0.0, out.data() + r * left * jn, left);
    }
}

DenseTensor mode_n_product(const DenseTensor& a, const DenseMatrix& b, std::size_t n) {
    check_mode(n, a.order());
    Dims od = a.dims();
    if (b.cols() != od[n - 1])
        throw InvalidArgument("mode-" + std::to_string(n) + " product: matrix has " + std::to_string(b.cols()) +
                              " columns, tensor dimension is " + std::to_string(od[n - 1]));
    od[n - 1] = b.rows();
    std::vector<double> out(numel(od));
    mode_n_product_into(a.data(), a.dims(), b.view(), n, out);
    return DenseTensor(std::move(od), std::move(out));
}

DenseTensor contracted_product(const DenseTensor& a, const DenseTensor& b) {
    const auto& da = a.dims();
    const auto& db = b.dims();
    const std::size_t k = da.back();
    if (k != db.front())
        throw InvalidArgument("contracted product: last dim of " + dims_str(da) + " != first dim of " +
                              dims_str(db));
    const std::size_t m = a.size() / k;
    const std::size_t n = b.size() / k;

    Dims od(da.begin(), da.end() - 1);
    od.insert(od.end(), db.begin() + 1, db.end());
    if (od.empty()) od.push_back(1);

    std::vector<double> out(m * n);
    simd::gemm(simd::Op::none, simd::Op::none, m, n, k, 1.0, a.data().data(), m, b.data().data(), k, 0.0,
               out.data(), m);
    return DenseTensor(std::move(od), std::move(out));
}

double frobenius_norm(const DenseTensor& t) { return std::sqrt(simd::sum_squares(t.size(), t.data().data())); }

double frobenius_norm(const DenseMatrix& m) { return std::sqrt(simd::sum_squares(m.size(), m.data().data())); }

} // namespace despeckle
