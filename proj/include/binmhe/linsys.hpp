#pragma once

// Linear time-invariant plants: representation, zero-order-hold discretization,
// network composition and bounded-noise simulation.

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "binmhe/random.hpp"
#include "binmhe/types.hpp"

namespace binmhe {

/// x_{t+1} = A x_t + B u_t + w_t,  z_t = C x_t + v_t.
///
/// C is stored as p stacked rows, row i being the linear output read by
/// binary sensor i. B may have zero columns for autonomous plants.
template <typename Scalar = double>
class LtiModel {
public:
    LtiModel(Mat<Scalar> A, Mat<Scalar> B, Mat<Scalar> C)
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)) {
        if (A_.rows() < 1 || A_.rows() != A_.cols())
            throw InvalidInputError("LtiModel: A must be square with n >= 1");
        if (B_.rows() != A_.rows())
            throw InvalidInputError("LtiModel: B must have n rows");
        if (C_.rows() < 1 || C_.cols() != A_.rows())
            throw InvalidInputError("LtiModel: C must be p x n with p >= 1");
        if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite())
            throw InvalidInputError("LtiModel: non-finite matrix entry");
    }

    /// Autonomous plant (m = 0).
    static LtiModel autonomous(Mat<Scalar> A, Mat<Scalar> C) {
        const Eigen::Index n = A.rows();
        return LtiModel(std::move(A), Mat<Scalar>(n, 0), std::move(C));
    }

    const Mat<Scalar>& A() const { return A_; }
    const Mat<Scalar>& B() const { return B_; }
    const Mat<Scalar>& C() const { return C_; }
    auto output_row(Eigen::Index i) const { return C_.row(i); }

    Eigen::Index n() const { return A_.rows(); }
    Eigen::Index m() const { return B_.cols(); }
    Eigen::Index p() const { return C_.rows(); }

    /// Noise-free one-step propagation.
    Vec<Scalar> propagate(const Vec<Scalar>& x, const Vec<Scalar>& u) const {
        Vec<Scalar> next = A_ * x;
        if (m() > 0) next.noalias() += B_ * u;
        return next;
    }

    Vec<Scalar> zero_input() const { return Vec<Scalar>::Zero(m()); }

private:
    Mat<Scalar> A_;
    Mat<Scalar> B_;
    Mat<Scalar> C_;
};

/// Radii of the compact sets bounding state, input, process disturbance and
/// measurement noise. W and V^i are realized as axis-aligned boxes with these
/// half-widths.
template <typename Scalar = double>
struct NoiseBounds {
    Scalar rho_W{0};
    Vec<Scalar> rho_V;  ///< one entry per sensor
    Scalar rho_X{0};
    Scalar rho_U{0};

    void validate(Eigen::Index p) const {
        if (rho_V.size() != p) throw InvalidInputError("NoiseBounds: rho_V must have p entries");
        if (rho_W < 0 || rho_X < 0 || rho_U < 0 || (rho_V.array() < 0).any())
            throw InvalidInputError("NoiseBounds: radii must be nonnegative");
    }

    Scalar max_rho_V() const { return rho_V.size() ? rho_V.maxCoeff() : Scalar(0); }
};

/// States x_0..x_T, inputs u_0..u_{T-1}, noisy linear outputs z_0..z_T.
template <typename Scalar = double>
struct Trajectory {
    std::vector<Vec<Scalar>> states;
    std::vector<Vec<Scalar>> inputs;
    std::vector<Vec<Scalar>> linear_outputs;

    std::size_t length() const { return inputs.size(); }
};

template <typename Scalar = double>
struct Discretization {
    Mat<Scalar> Ad;
    Mat<Scalar> Bd;
};

/// Zero-order-hold discretization. Ad = exp(Ac Ts) and
/// Bd = int_0^Ts exp(Ac s) Bc ds, both read off the exponential of the
/// augmented matrix [[Ac, Bc], [0, 0]] Ts.
template <typename Scalar>
Discretization<Scalar> discretize(const Mat<Scalar>& Ac, const Mat<Scalar>& Bc, Scalar Ts) {
    if (!(Ts > 0) || !std::isfinite(static_cast<double>(Ts)))
        throw InvalidInputError("discretize: Ts must be positive and finite");
    if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows())
        throw InvalidInputError("discretize: inconsistent dimensions");
    if (!Ac.allFinite() || !Bc.allFinite())
        throw InvalidInputError("discretize: non-finite entries in Ac or Bc");

    const Eigen::Index n = Ac.rows();
    const Eigen::Index m = Bc.cols();
    Mat<Scalar> aug = Mat<Scalar>::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = Ac * Ts;
    aug.topRightCorner(n, m) = Bc * Ts;
    const Mat<Scalar> e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

/// q identical nodes coupled through a graph Laplacian:
/// A = I_q (x) Ad - gamma L (x) I_nd, C = I_q (x) output_row, B = I_q (x) Bd.
template <typename Scalar>
LtiModel<Scalar> build_network(const LtiModel<Scalar>& node, const Mat<Scalar>& laplacian, Scalar gamma,
                               const RowVec<Scalar>& node_output_row) {
    const Eigen::Index q = laplacian.rows();
    if (q < 1 || laplacian.cols() != q) throw InvalidLaplacianError("build_network: Laplacian must be square");
    if (!laplacian.allFinite()) throw InvalidLaplacianError("build_network: non-finite Laplacian");
    const Scalar sym_err = (laplacian - laplacian.transpose()).cwiseAbs().maxCoeff();
    const Scalar row_err = laplacian.rowwise().sum().cwiseAbs().maxCoeff();
    if (sym_err > Scalar(1e-9) || row_err > Scalar(1e-9))
        throw InvalidLaplacianError("build_network: Laplacian must be symmetric with zero row sums");
    const Eigen::Index nd = node.n();
    if (node_output_row.size() != nd) throw InvalidInputError("build_network: output row must have node dimension");

    const Mat<Scalar> Iq = Mat<Scalar>::Identity(q, q);
    const Mat<Scalar> Ind = Mat<Scalar>::Identity(nd, nd);
    Mat<Scalar> A = Eigen::kroneckerProduct(Iq, node.A()).eval();
    A -= gamma * Eigen::kroneckerProduct(laplacian, Ind).eval();
    Mat<Scalar> B = Eigen::kroneckerProduct(Iq, node.B()).eval();
    Mat<Scalar> C = Eigen::kroneckerProduct(Iq, Mat<Scalar>(node_output_row)).eval();
    return LtiModel<Scalar>(std::move(A), std::move(B), std::move(C));
}

/// Simulates the plant over inputs.size() steps with disturbances and
/// measurement noise drawn uniformly from their boxes. Deterministic for a
/// fixed (seed, trial).
template <typename Scalar>
Trajectory<Scalar> simulate(const LtiModel<Scalar>& model, const Vec<Scalar>& x0,
                            const std::vector<Vec<Scalar>>& inputs, const NoiseBounds<Scalar>& noise,
                            std::uint64_t seed, std::uint64_t trial = 0) {
    if (x0.size() != model.n() || !x0.allFinite()) throw InvalidInputError("simulate: bad initial state");
    if (inputs.empty()) throw InvalidInputError("simulate: horizon must be >= 1");
    noise.validate(model.p());

    RandomStream w_rng(seed, trial, StreamPurpose::process_noise);
    RandomStream v_rng(seed, trial, StreamPurpose::measurement_noise);
    const Vec<Scalar> w_half = Vec<Scalar>::Constant(model.n(), noise.rho_W);

    Trajectory<Scalar> traj;
    traj.inputs = inputs;
    traj.states.reserve(inputs.size() + 1);
    traj.linear_outputs.reserve(inputs.size() + 1);

    Vec<Scalar> x = x0;
    for (std::size_t t = 0; t <= inputs.size(); ++t) {
        traj.states.push_back(x);
        traj.linear_outputs.push_back(model.C() * x + v_rng.uniform_box(noise.rho_V));
        if (t == inputs.size()) break;
        if (inputs[t].size() != model.m()) throw InvalidInputError("simulate: input dimension mismatch");
        x = model.propagate(x, inputs[t]);
        x += w_rng.uniform_box(w_half);
    }
    return traj;
}

/// Autonomous convenience overload: `steps` zero-dimensional inputs.
template <typename Scalar>
Trajectory<Scalar> simulate(const LtiModel<Scalar>& model, const Vec<Scalar>& x0, std::size_t steps,
                            const NoiseBounds<Scalar>& noise, std::uint64_t seed, std::uint64_t trial = 0) {
    return simulate(model, x0, std::vector<Vec<Scalar>>(steps, model.zero_input()), noise, seed, trial);
}

/// Spectral norm, sqrt(max eig(M'M)).
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& M) {
    using Scalar = typename Derived::Scalar;
    if (M.size() == 0) return Scalar(0);
    Eigen::JacobiSVD<Mat<Scalar>> svd(M.eval());
    return svd.singularValues()(0);
}

}  // namespace binmhe
