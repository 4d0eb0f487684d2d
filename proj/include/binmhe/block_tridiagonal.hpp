#pragma once

#include <optional>
#include <vector>

#include "binmhe/types.hpp"

namespace binmhe {

/// Symmetric block-tridiagonal matrix with K square diagonal blocks of size n.
/// lower[k] is the block at (k+1, k); the upper part is its transpose.
template <typename Scalar = double>
struct BlockTridiagonal {
    std::vector<Mat<Scalar>> diag;
    std::vector<Mat<Scalar>> lower;

    BlockTridiagonal() = default;
    BlockTridiagonal(std::size_t blocks, Eigen::Index n)
        : diag(blocks, Mat<Scalar>::Zero(n, n)), lower(blocks ? blocks - 1 : 0, Mat<Scalar>::Zero(n, n)) {}

    std::size_t blocks() const { return diag.size(); }
    Eigen::Index block_size() const { return diag.empty() ? 0 : diag.front().rows(); }
    Eigen::Index size() const { return static_cast<Eigen::Index>(blocks()) * block_size(); }

    Vec<Scalar> multiply(const Vec<Scalar>& x) const {
        const Eigen::Index n = block_size();
        Vec<Scalar> y(x.size());
        for (std::size_t k = 0; k < blocks(); ++k) {
            const Eigen::Index o = static_cast<Eigen::Index>(k) * n;
            y.segment(o, n).noalias() = diag[k] * x.segment(o, n);
            if (k > 0) y.segment(o, n).noalias() += lower[k - 1] * x.segment(o - n, n);
            if (k + 1 < blocks()) y.segment(o, n).noalias() += lower[k].transpose() * x.segment(o + n, n);
        }
        return y;
    }

    Mat<Scalar> to_dense() const {
        const Eigen::Index n = block_size();
        Mat<Scalar> H = Mat<Scalar>::Zero(size(), size());
        for (std::size_t k = 0; k < blocks(); ++k) {
            const Eigen::Index o = static_cast<Eigen::Index>(k) * n;
            H.block(o, o, n, n) = diag[k];
            if (k + 1 < blocks()) {
                H.block(o + n, o, n, n) = lower[k];
                H.block(o, o + n, n, n) = lower[k].transpose();
            }
        }
        return H;
    }

    /// Replaces row and column `index` by the corresponding identity row and
    /// column, decoupling that variable from the rest.
    void pin_variable(Eigen::Index index) {
        const Eigen::Index n = block_size();
        const auto k = static_cast<std::size_t>(index / n);
        const Eigen::Index r = index % n;
        diag[k].row(r).setZero();
        diag[k].col(r).setZero();
        diag[k](r, r) = Scalar(1);
        if (k + 1 < blocks()) lower[k].col(r).setZero();
        if (k > 0) lower[k - 1].row(r).setZero();
    }
};

/// Block Cholesky factorization H = L L' of a symmetric positive-definite
/// block-tridiagonal matrix; cost grows linearly with the number of blocks.
template <typename Scalar = double>
class BlockTridiagonalCholesky {
public:
    /// Returns std::nullopt when some pivot block is not positive definite;
    /// failed_block() then names it.
    static std::optional<BlockTridiagonalCholesky> factor(const BlockTridiagonal<Scalar>& H,
                                                          std::size_t* failed_block = nullptr) {
        BlockTridiagonalCholesky f;
        const std::size_t K = H.blocks();
        f.diag_.resize(K);
        f.sub_.resize(K ? K - 1 : 0);
        for (std::size_t k = 0; k < K; ++k) {
            // Schur complement of the previous pivot, factored in place.
            f.diag_[k] = H.diag[k];
            if (k > 0) f.diag_[k].noalias() -= f.sub_[k - 1] * f.sub_[k - 1].transpose();
            Eigen::LLT<Eigen::Ref<Mat<Scalar>>> llt(f.diag_[k]);
            if (llt.info() != Eigen::Success) {
                if (failed_block) *failed_block = k;
                return std::nullopt;
            }
            f.diag_[k].template triangularView<Eigen::StrictlyUpper>().setZero();
            if (k + 1 < K) {
                // L_{k+1,k} = H_{k+1,k} L_kk^{-T}
                f.sub_[k] = H.lower[k];
                f.diag_[k].transpose().template triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(
                    f.sub_[k]);
            }
        }
        return f;
    }

    Vec<Scalar> solve(const Vec<Scalar>& b) const {
        const std::size_t K = diag_.size();
        const Eigen::Index n = K ? diag_[0].rows() : 0;
        Vec<Scalar> y = b;
        for (std::size_t k = 0; k < K; ++k) {
            const Eigen::Index o = static_cast<Eigen::Index>(k) * n;
            if (k > 0) y.segment(o, n).noalias() -= sub_[k - 1] * y.segment(o - n, n);
            diag_[k].template triangularView<Eigen::Lower>().solveInPlace(y.segment(o, n));
        }
        for (std::size_t kk = K; kk-- > 0;) {
            const Eigen::Index o = static_cast<Eigen::Index>(kk) * n;
            if (kk + 1 < K) y.segment(o, n).noalias() -= sub_[kk].transpose() * y.segment(o + n, n);
            diag_[kk].transpose().template triangularView<Eigen::Upper>().solveInPlace(y.segment(o, n));
        }
        return y;
    }

private:
    std::vector<Mat<Scalar>> diag_;
    std::vector<Mat<Scalar>> sub_;
};

}  // namespace binmhe
