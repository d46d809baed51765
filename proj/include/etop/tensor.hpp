#pragma once

// Dense operator on an ordered tensor product of small complex spaces.
// Composite indices are row-major over the space list. Partial traces,
// embeddings and space swaps are implemented index-wise; the matrix algebra
// itself is delegated to Eigen.

#include <Eigen/Dense>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "etop/elliptic.hpp"

namespace etop {

using Mat = Eigen::MatrixXcd;

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Mat comm(const Mat& a, const Mat& b) { return a * b - b * a; }

inline double max_abs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

struct TensorOperator {
    std::vector<int> dims;
    Mat data;

    TensorOperator() = default;
    explicit TensorOperator(std::vector<int> d) : dims(std::move(d)) {
        const int n = total_dim();
        data = Mat::Zero(n, n);
    }
    TensorOperator(std::vector<int> d, Mat m) : dims(std::move(d)), data(std::move(m)) {
        if (data.rows() != total_dim() || data.cols() != total_dim())
            throw std::invalid_argument("TensorOperator: matrix size does not match spaces");
    }

    int total_dim() const {
        return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
    }

    static TensorOperator identity(std::vector<int> d) {
        TensorOperator t(std::move(d));
        t.data = Mat::Identity(t.total_dim(), t.total_dim());
        return t;
    }

    TensorOperator operator*(const TensorOperator& o) const {
        return {dims, data * o.data};
    }
    TensorOperator operator+(const TensorOperator& o) const { return {dims, data + o.data}; }
    TensorOperator operator-(const TensorOperator& o) const { return {dims, data - o.data}; }
    TensorOperator operator-() const { return {dims, -data}; }
    friend TensorOperator operator*(cplx s, const TensorOperator& t) { return {t.dims, s * t.data}; }

    cplx trace() const { return data.trace(); }
};

inline TensorOperator comm(const TensorOperator& a, const TensorOperator& b) {
    return {a.dims, a.data * b.data - b.data * a.data};
}

namespace detail {

inline std::vector<int> strides_of(const std::vector<int>& dims) {
    std::vector<int> s(dims.size());
    int acc = 1;
    for (int i = int(dims.size()) - 1; i >= 0; --i) {
        s[size_t(i)] = acc;
        acc *= dims[size_t(i)];
    }
    return s;
}

} // namespace detail

/// Embed an operator acting on a subset of spaces (identified by slot
/// indices into `dims`) into the full product, acting as the identity
/// elsewhere. The slot list order must match the operator's own space order.
inline TensorOperator embed(const TensorOperator& op, const std::vector<int>& slots,
                            const std::vector<int>& dims) {
    for (size_t i = 0; i < slots.size(); ++i)
        if (dims[size_t(slots[i])] != op.dims[i])
            throw std::invalid_argument("embed: slot dimension mismatch");

    const auto strides = detail::strides_of(dims);
    const auto op_strides = detail::strides_of(op.dims);
    const int d = std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());

    // For every full-space index record the op-space part and a signature of
    // the untouched slots; entries pair up only on matching signatures.
    std::vector<int> op_idx, free_sig;
    op_idx.resize(size_t(d));
    free_sig.resize(size_t(d));
    for (int r = 0; r < d; ++r) {
        int oi = 0, fs = 0;
        for (size_t s = 0; s < dims.size(); ++s) {
            const int comp = (r / strides[s]) % dims[s];
            bool in_op = false;
            for (size_t k = 0; k < slots.size(); ++k)
                if (slots[k] == int(s)) {
                    oi += comp * op_strides[k];
                    in_op = true;
                    break;
                }
            if (!in_op) fs = fs * dims[s] + comp;
        }
        op_idx[size_t(r)] = oi;
        free_sig[size_t(r)] = fs;
    }

    TensorOperator out(dims);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            if (free_sig[size_t(r)] == free_sig[size_t(c)])
                out.data(r, c) = op.data(op_idx[size_t(r)], op_idx[size_t(c)]);
    return out;
}

/// Partial trace over the listed slots; the result lives on the remaining
/// spaces in their original order. Tracing every slot reproduces the full
/// trace as a 1x1 operator.
inline TensorOperator partial_trace(const TensorOperator& op, std::vector<int> slots) {
    std::sort(slots.begin(), slots.end());
    std::vector<int> keep, kept_dims;
    for (int s = 0; s < int(op.dims.size()); ++s)
        if (!std::binary_search(slots.begin(), slots.end(), s)) {
            keep.push_back(s);
            kept_dims.push_back(op.dims[size_t(s)]);
        }
    if (kept_dims.empty()) kept_dims.push_back(1);

    const auto strides = detail::strides_of(op.dims);
    int d_keep = 1, d_tr = 1;
    for (int k : keep) d_keep *= op.dims[size_t(k)];
    for (int s : slots) d_tr *= op.dims[size_t(s)];

    auto lift = [&](int kept, int traced) {
        int idx = 0;
        for (int i = int(keep.size()) - 1; i >= 0; --i) {
            const int dim = op.dims[size_t(keep[size_t(i)])];
            idx += (kept % dim) * strides[size_t(keep[size_t(i)])];
            kept /= dim;
        }
        for (int i = int(slots.size()) - 1; i >= 0; --i) {
            const int dim = op.dims[size_t(slots[size_t(i)])];
            idx += (traced % dim) * strides[size_t(slots[size_t(i)])];
            traced /= dim;
        }
        return idx;
    };

    TensorOperator out(kept_dims);
    for (int r = 0; r < d_keep; ++r)
        for (int c = 0; c < d_keep; ++c) {
            cplx acc = 0.0;
            for (int t = 0; t < d_tr; ++t) acc += op.data(lift(r, t), lift(c, t));
            out.data(r, c) = acc;
        }
    return out;
}

/// Conjugate by the permutation exchanging two spaces of equal dimension.
inline TensorOperator swap_spaces(const TensorOperator& op, int i, int j) {
    if (op.dims[size_t(i)] != op.dims[size_t(j)])
        throw std::invalid_argument("swap_spaces: dimensions differ");
    const auto strides = detail::strides_of(op.dims);
    const int d = op.total_dim();
    auto perm = [&](int idx) {
        const int ci = (idx / strides[size_t(i)]) % op.dims[size_t(i)];
        const int cj = (idx / strides[size_t(j)]) % op.dims[size_t(j)];
        return idx + (cj - ci) * strides[size_t(i)] + (ci - cj) * strides[size_t(j)];
    };
    TensorOperator out(op.dims);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out.data(perm(r), perm(c)) = op.data(r, c);
    return out;
}

} // namespace etop
