#include "kcl/kalman.hpp"

#include <cmath>

#include "kcl/errors.hpp"

namespace kcl {

namespace {

void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": length mismatch");
    }
}

}  // namespace

KalmanState make_kalman_state(std::size_t num_params, double learning_rate, double xi) {
    if (learning_rate <= 0.0) {
        throw ContractError("make_kalman_state: learning_rate must be positive");
    }
    if (xi <= 0.0) {
        throw ContractError("make_kalman_state: xi must be positive");
    }
    KalmanState state;
    state.theta.assign(num_params, 0.0);
    state.uncertainty.assign(num_params, 0.0);
    state.stored_importance.assign(num_params, 0.0);
    state.f_star.assign(num_params, 0.0);
    state.learning_rate = learning_rate;
    state.xi = xi;
    state.consolidated = false;
    return state;
}

StepObservation make_observation(ParamVector gradient, UncertaintyMeasure measure) {
    StepObservation obs;
    obs.observation_uncertainty.resize(gradient.size());
    for (std::size_t i = 0; i < gradient.size(); ++i) {
        double g = gradient[i];
        obs.observation_uncertainty[i] = measure == UncertaintyMeasure::kAbs ? std::fabs(g) : g * g;
    }
    obs.gradient = std::move(gradient);
    return obs;
}

ParamVector predict(const ParamVector& theta, const ParamVector& gradient, double learning_rate) {
    check_same_length(theta.size(), gradient.size(), "predict");
    if (learning_rate <= 0.0) {
        throw ContractError("predict: learning_rate must be positive");
    }
    ParamVector out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        out[i] = theta[i] - learning_rate * gradient[i];
    }
    return out;
}

ParamVector gain(const ParamVector& uncertainty, const ParamVector& observation_uncertainty,
                 double xi) {
    check_same_length(uncertainty.size(), observation_uncertainty.size(), "gain");
    if (xi <= 0.0) {
        throw ContractError("gain: xi must be positive");
    }
    ParamVector out(uncertainty.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double p = uncertainty[i];
        double r = observation_uncertainty[i];
        if (p < 0.0 || r < 0.0) {
            throw ContractError("gain: P and R must be non-negative");
        }
        out[i] = p / (p + r + xi);
    }
    return out;
}

GatedStep gated_update(const KalmanState& state, const StepObservation& obs) {
    check_same_length(state.theta.size(), obs.gradient.size(), "gated_update");
    check_same_length(state.theta.size(), state.uncertainty.size(), "gated_update");
    check_same_length(state.theta.size(), state.f_star.size(), "gated_update");
    ParamVector k = gain(state.uncertainty, obs.observation_uncertainty, state.xi);
    GatedStep step;
    step.theta.resize(state.theta.size());
    step.uncertainty.resize(state.theta.size());
    double lr = state.learning_rate;
    for (std::size_t i = 0; i < state.theta.size(); ++i) {
        double theta = state.theta[i];
        double predicted = theta - lr * obs.gradient[i];
        double delta = predicted - theta;
        double f = state.f_star[i];
        double multiplier = k[i] * f + (1.0 - f);
        step.theta[i] = theta + multiplier * delta;
        step.uncertainty[i] = (1.0 - k[i] * f) * state.uncertainty[i];
    }
    return step;
}

ParamVector sgd_update(const ParamVector& theta, const ParamVector& gradient,
                       double learning_rate) {
    return predict(theta, gradient, learning_rate);
}

ParamVector uncertainty_from_gradients(const std::vector<ParamVector>& gradient_history) {
    if (gradient_history.empty()) {
        throw ContractError("uncertainty_from_gradients: history must not be empty");
    }
    GradientAbsAccumulator acc(gradient_history.front().size());
    for (const ParamVector& g : gradient_history) {
        acc.add(g);
    }
    return acc.mean();
}

void GradientAbsAccumulator::add(const ParamVector& gradient) {
    check_same_length(sum_.size(), gradient.size(), "GradientAbsAccumulator");
    for (std::size_t i = 0; i < sum_.size(); ++i) {
        sum_[i] += std::fabs(gradient[i]);
    }
    ++count_;
}

ParamVector GradientAbsAccumulator::mean() const {
    if (count_ == 0) {
        throw ContractError("GradientAbsAccumulator: no gradients recorded");
    }
    ParamVector out(sum_.size());
    double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = sum_[i] * inv;
    }
    return out;
}

KalmanState consolidate(const KalmanState& state, const ImportanceRate& task_fisher_norm,
                        const ParamVector& end_of_task_uncertainty, double alpha) {
    check_same_length(state.theta.size(), task_fisher_norm.size(), "consolidate");
    check_same_length(state.theta.size(), end_of_task_uncertainty.size(), "consolidate");
    for (double u : end_of_task_uncertainty) {
        if (u < 0.0) {
            throw ContractError("consolidate: end_of_task_uncertainty must be non-negative");
        }
    }
    KalmanState next = state;
    for (std::size_t i = 0; i < next.uncertainty.size(); ++i) {
        // Refresh P only where this task found the parameter strictly more
        // important than any previous one; the rest keep their uncertainty.
        if (task_fisher_norm[i] > state.stored_importance[i]) {
            next.uncertainty[i] = end_of_task_uncertainty[i];
        }
    }
    next.stored_importance = merge_fisher(state.stored_importance, task_fisher_norm);
    next.f_star = threshold_importance(next.stored_importance, alpha);
    next.consolidated = true;
    return next;
}

}  // namespace kcl
