#ifndef KCL_KALMAN_HPP
#define KCL_KALMAN_HPP

#include <cstdint>

#include "kcl/fisher.hpp"
#include "kcl/network.hpp"

namespace kcl {

/// How the per-parameter observation uncertainty R is read off a gradient.
enum class UncertaintyMeasure : std::uint8_t { kAbs = 0, kSquared = 1 };

/// Per-parameter filter state threaded through a training run. Everything
/// is diagonal: P, R, the gain and the importance gate are all plain
/// vectors, one scalar per weight.
struct KalmanState {
    ParamVector theta;              // current parameters, flat
    ParamVector uncertainty;        // P, >= 0 everywhere
    ImportanceRate stored_importance;  // merged pre-threshold importance
    ImportanceRate f_star;          // threshold_importance(stored_importance, alpha)
    double xi = 1e-8;
    double learning_rate = 0.05;
    bool consolidated = false;      // false until the first task has finished
};

/// A mini-batch gradient plus the uncertainty measure derived from it.
struct StepObservation {
    ParamVector gradient;
    ParamVector observation_uncertainty;  // R, >= 0 element-wise
};

/// Result of one gated step; the caller commits it into the state.
struct GatedStep {
    ParamVector theta;
    ParamVector uncertainty;
};

/// Fresh state for an architecture: P, importance and gate all zero,
/// consolidated false (plain-SGD phase until the first consolidation).
KalmanState make_kalman_state(std::size_t num_params, double learning_rate, double xi);

/// R from a gradient: element-wise |g| (default) or g^2.
StepObservation make_observation(ParamVector gradient, UncertaintyMeasure measure);

/// Plain SGD proposal, theta - lr * gradient.
ParamVector predict(const ParamVector& theta, const ParamVector& gradient, double learning_rate);

/// Per-parameter Kalman gain P / (P + R + xi); entries in [0,1).
/// Negative P or R entries throw ContractError.
ParamVector gain(const ParamVector& uncertainty, const ParamVector& observation_uncertainty,
                 double xi);

/// One filtered step. With delta the raw SGD step and K the gain, each
/// parameter moves by (K*F' + (1-F')) * delta and its uncertainty shrinks
/// by (1 - K*F'). F' = 0 is plain SGD; F' = 1 with zero P freezes the
/// parameter outright.
GatedStep gated_update(const KalmanState& state, const StepObservation& obs);

/// The baseline optimizer; same arithmetic as predict.
ParamVector sgd_update(const ParamVector& theta, const ParamVector& gradient,
                       double learning_rate);

/// Element-wise mean of |g| over a gradient history; used as the
/// end-of-task uncertainty refresh and the initial P.
ParamVector uncertainty_from_gradients(const std::vector<ParamVector>& gradient_history);

/// Streaming equivalent of uncertainty_from_gradients: feeds gradients one
/// at a time in the same order, so the result is bit-identical without
/// keeping the whole history around.
class GradientAbsAccumulator {
public:
    explicit GradientAbsAccumulator(std::size_t num_params) : sum_(num_params, 0.0) {}

    void add(const ParamVector& gradient);
    std::size_t count() const { return count_; }

    /// Mean so far; throws ContractError if nothing was added.
    ParamVector mean() const;

private:
    ParamVector sum_;
    std::size_t count_ = 0;
};

/// End-of-task consolidation. Where the new task's pre-threshold importance
/// strictly exceeds what is stored, P is refreshed from
/// end_of_task_uncertainty; stored importance becomes the element-wise max;
/// the gate is re-thresholded; consolidated flips to true.
KalmanState consolidate(const KalmanState& state, const ImportanceRate& task_fisher_norm,
                        const ParamVector& end_of_task_uncertainty, double alpha);

}  // namespace kcl

#endif  // KCL_KALMAN_HPP
