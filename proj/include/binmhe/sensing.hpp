#pragma once

// Binary threshold sensors and the sliding measurement window.

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "binmhe/types.hpp"

namespace binmhe {

inline bool is_binary(int y) { return y == 1 || y == -1; }

/// +1 iff z >= tau. The boundary z == tau reads +1; under continuous noise
/// that event has probability zero.
template <typename Scalar>
int binarize(Scalar z, Scalar tau) {
    return z >= tau ? 1 : -1;
}

/// 1 iff the expected output z_hat lies strictly on the wrong side of tau
/// for the reading y.
template <typename Scalar>
int omega(Scalar z_hat, Scalar tau, int y) {
    return (z_hat - tau) * Scalar(y) < Scalar(0) ? 1 : 0;
}

/// Absolute indices k in [start, start + len - 2] with y_k y_{k+1} < 0.
inline std::vector<TimeIndex> switching_set(std::span<const int> y, TimeIndex start) {
    for (int v : y)
        if (!is_binary(v)) throw InvalidMeasurementError("switching_set: entries must be -1 or +1");
    std::vector<TimeIndex> out;
    for (std::size_t k = 0; k + 1 < y.size(); ++k)
        if (y[k] * y[k + 1] < 0) out.push_back(start + static_cast<TimeIndex>(k));
    return out;
}

template <typename Scalar = double>
struct BinarySensorBank {
    Vec<Scalar> thresholds;
    Vec<Scalar> noise_bounds;

    BinarySensorBank() = default;
    BinarySensorBank(Vec<Scalar> tau, Vec<Scalar> rho_v) : thresholds(std::move(tau)), noise_bounds(std::move(rho_v)) {
        if (thresholds.size() != noise_bounds.size())
            throw InvalidInputError("BinarySensorBank: thresholds and noise bounds differ in length");
        if (!thresholds.allFinite()) throw InvalidInputError("BinarySensorBank: non-finite threshold");
        if ((noise_bounds.array() < 0).any()) throw InvalidInputError("BinarySensorBank: negative noise bound");
    }

    Eigen::Index p() const { return thresholds.size(); }

    BinaryVector measure(const Vec<Scalar>& z) const {
        if (z.size() != p()) throw InvalidInputError("BinarySensorBank::measure: dimension mismatch");
        BinaryVector y(p());
        for (Eigen::Index i = 0; i < p(); ++i) y(i) = binarize(z(i), thresholds(i));
        return y;
    }
};

/// Window t-N..t of binary readings together with the inputs u_{t-N}..u_{t-1}
/// and, per sensor, the absolute switching instants inside the window.
template <typename Scalar = double>
class MeasurementWindow {
public:
    /// outputs holds one row per instant (N+1 rows) and one column per sensor.
    MeasurementWindow(TimeIndex start, std::vector<Vec<Scalar>> inputs, BinaryMatrix outputs)
        : start_(start), inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
        if (outputs_.rows() < 1 || outputs_.cols() < 1)
            throw InvalidInputError("MeasurementWindow: need at least one instant and one sensor");
        if (static_cast<Eigen::Index>(inputs_.size()) != outputs_.rows() - 1)
            throw InvalidInputError("MeasurementWindow: need exactly N inputs for N+1 instants");
        for (Eigen::Index k = 0; k < outputs_.size(); ++k)
            if (!is_binary(outputs_.data()[k]))
                throw InvalidMeasurementError("MeasurementWindow: entries must be -1 or +1");
        recompute_switching();
    }

    TimeIndex start() const { return start_; }
    /// Current time t (last instant of the window).
    TimeIndex end() const { return start_ + horizon(); }
    TimeIndex horizon() const { return static_cast<TimeIndex>(outputs_.rows()) - 1; }
    Eigen::Index sensors() const { return outputs_.cols(); }

    const std::vector<Vec<Scalar>>& inputs() const { return inputs_; }
    /// Input applied at window-relative step j, u_{start+j}.
    const Vec<Scalar>& input(Eigen::Index j) const { return inputs_[static_cast<std::size_t>(j)]; }
    const BinaryMatrix& binary_outputs() const { return outputs_; }
    /// Reading of sensor i at window-relative instant j.
    int y(Eigen::Index j, Eigen::Index i) const { return outputs_(j, i); }

    const std::vector<std::vector<TimeIndex>>& switching_sets() const { return switching_; }
    const std::vector<TimeIndex>& switching_set_of(Eigen::Index i) const {
        return switching_[static_cast<std::size_t>(i)];
    }
    std::size_t switch_count() const {
        std::size_t c = 0;
        for (const auto& s : switching_) c += s.size();
        return c;
    }

    /// Drops instant t-N, appends instant t+1. Switching sets are updated
    /// incrementally.
    MeasurementWindow slide(const Vec<Scalar>& new_input, const BinaryVector& new_binary) const {
        if (new_binary.size() != sensors()) throw InvalidInputError("slide: sensor count mismatch");
        for (Eigen::Index i = 0; i < new_binary.size(); ++i)
            if (!is_binary(new_binary(i))) throw InvalidMeasurementError("slide: entries must be -1 or +1");

        MeasurementWindow next = *this;
        const Eigen::Index rows = outputs_.rows();
        if (rows > 1) {
            next.outputs_.topRows(rows - 1) = outputs_.bottomRows(rows - 1);
            next.inputs_.erase(next.inputs_.begin());
            next.inputs_.push_back(new_input);
        } else {
            // N = 0: no inputs are kept.
        }
        next.outputs_.row(rows - 1) = new_binary.transpose();
        next.start_ = start_ + 1;

        const TimeIndex old_end = end();
        for (Eigen::Index i = 0; i < sensors(); ++i) {
            auto& set = next.switching_[static_cast<std::size_t>(i)];
            set.erase(std::remove_if(set.begin(), set.end(), [&](TimeIndex k) { return k < next.start_; }),
                      set.end());
            if (rows > 1 && outputs_(rows - 1, i) * new_binary(i) < 0) set.push_back(old_end);
        }
        return next;
    }

private:
    void recompute_switching() {
        switching_.assign(static_cast<std::size_t>(outputs_.cols()), {});
        std::vector<int> col(static_cast<std::size_t>(outputs_.rows()));
        for (Eigen::Index i = 0; i < outputs_.cols(); ++i) {
            for (Eigen::Index j = 0; j < outputs_.rows(); ++j) col[static_cast<std::size_t>(j)] = outputs_(j, i);
            switching_[static_cast<std::size_t>(i)] = switching_set(col, start_);
        }
    }

    TimeIndex start_;
    std::vector<Vec<Scalar>> inputs_;
    BinaryMatrix outputs_;
    std::vector<std::vector<TimeIndex>> switching_;
};

template <typename Scalar>
MeasurementWindow<Scalar> slide(const MeasurementWindow<Scalar>& window, const Vec<Scalar>& new_input,
                                const BinaryVector& new_binary) {
    return window.slide(new_input, new_binary);
}

}  // namespace binmhe
