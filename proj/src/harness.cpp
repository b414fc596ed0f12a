#include "kcl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <set>
#include <string>

#include "kcl/errors.hpp"
#include "kcl/fisher.hpp"
#include "kcl/rng.hpp"

namespace kcl {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) {
        throw ContractError("config: learning_rate must be positive");
    }
    if (batch_size < 1) {
        throw ContractError("config: batch_size must be at least 1");
    }
    if (epochs_per_task < 1) {
        throw ContractError("config: epochs_per_task must be at least 1");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ContractError("config: alpha must lie in (0,1]");
    }
    if (xi <= 0.0) {
        throw ContractError("config: xi must be positive");
    }
    if (fisher_batch_size < 1) {
        throw ContractError("config: fisher_batch_size must be at least 1");
    }
    if (hidden_dims.empty()) {
        throw ContractError("config: at least one hidden layer is required");
    }
    for (int d : hidden_dims) {
        if (d < 1) {
            throw ContractError("config: hidden dims must be positive");
        }
    }
}

void AccuracyMatrix::add_stage(std::vector<double> accuracies) {
    if (accuracies.size() != rows.size() + 1) {
        throw ShapeError("AccuracyMatrix: stage " + std::to_string(rows.size() + 1) +
                         " must record exactly " + std::to_string(rows.size() + 1) +
                         " accuracies");
    }
    rows.push_back(std::move(accuracies));
}

double AccuracyMatrix::at(int stage, int task) const {
    if (stage < 1 || stage > num_stages() || task < 1 || task > stage) {
        throw ContractError("AccuracyMatrix: index outside the lower triangle");
    }
    return rows[static_cast<std::size_t>(stage - 1)][static_cast<std::size_t>(task - 1)];
}

double average_accuracy(const AccuracyMatrix& matrix, int stage) {
    if (stage < 1 || stage > matrix.num_stages()) {
        throw ContractError("average_accuracy: stage out of range");
    }
    const auto& row = matrix.rows[static_cast<std::size_t>(stage - 1)];
    double sum = std::accumulate(row.begin(), row.end(), 0.0);
    return sum / static_cast<double>(row.size());
}

namespace {

Matrix gather_batch(const Matrix& inputs, const std::vector<std::size_t>& order,
                    std::size_t start, std::size_t count) {
    Matrix batch(count, inputs.cols());
    for (std::size_t i = 0; i < count; ++i) {
        std::copy_n(inputs.row(order[start + i]), inputs.cols(), batch.row(i));
    }
    return batch;
}

}  // namespace

TaskTrainResult train_task(const NetworkParams& params, const KalmanState& state,
                           const TaskSpec& task, const TrainConfig& config) {
    config.validate();
    if (task.train.size() == 0) {
        throw ContractError("train_task: task has no training samples");
    }
    HeadMask mask(task.active_classes, params.num_classes());

    TaskTrainResult result;
    result.params = params;
    result.state = state;
    result.state.theta = flatten(result.params);
    result.state.learning_rate = config.learning_rate;
    result.state.xi = config.xi;

    bool gated = config.optimizer == OptimizerKind::kKalman && state.consolidated;
    std::size_t n = task.train.size();
    auto batch_size = static_cast<std::size_t>(config.batch_size);
    GradientAbsAccumulator last_epoch(result.state.theta.size());

    std::vector<std::size_t> order(n);
    for (int epoch = 0; epoch < config.epochs_per_task; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        SplitMix64 shuffle_rng(derive_seed(
            config.seed, {stream::kShuffle, static_cast<std::uint64_t>(task.task_id),
                          static_cast<std::uint64_t>(epoch)}));
        shuffle_rng.shuffle(order);
        bool final_epoch = epoch + 1 == config.epochs_per_task;
        for (std::size_t start = 0; start < n; start += batch_size) {
            std::size_t count = std::min(batch_size, n - start);
            Matrix batch = gather_batch(task.train.inputs, order, start, count);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                labels[i] = task.train.labels[order[start + i]];
            }
            auto [logits, cache] = forward(result.params, batch);
            ParamVector grad = backward(result.params, cache, labels, mask);
            if (final_epoch) {
                last_epoch.add(grad);
            }
            if (gated) {
                StepObservation obs =
                    make_observation(std::move(grad), config.uncertainty_measure);
                GatedStep step = gated_update(result.state, obs);
                result.state.theta = std::move(step.theta);
                result.state.uncertainty = std::move(step.uncertainty);
            } else {
                result.state.theta =
                    sgd_update(result.state.theta, grad, config.learning_rate);
            }
            unflatten(result.state.theta, result.params);
            ++result.steps;
        }
    }
    result.last_epoch_grad_abs_mean = last_epoch.mean();
    return result;
}

std::vector<double> evaluate_tasks(const NetworkParams& params, const std::vector<TaskSpec>& tasks,
                                   int up_to) {
    std::vector<double> out;
    for (int t = 0; t < up_to; ++t) {
        const TaskSpec& task = tasks[static_cast<std::size_t>(t)];
        HeadMask mask(task.active_classes, params.num_classes());
        out.push_back(accuracy(params, task.test.inputs, task.test.labels, mask));
    }
    return out;
}

namespace {

void check_task_sequence(const std::vector<TaskSpec>& tasks) {
    if (tasks.empty()) {
        throw ContractError("run_sequence: at least one task is required");
    }
    std::set<int> seen;
    for (const TaskSpec& task : tasks) {
        for (int c : task.active_classes) {
            if (!seen.insert(c).second) {
                throw ContractError("run_sequence: task class sets must be pairwise disjoint");
            }
        }
    }
}

}  // namespace

SequenceResult resume_sequence(const std::vector<TaskSpec>& tasks, const TrainConfig& config,
                               NetworkParams params, KalmanState state, AccuracyMatrix matrix,
                               int completed, const StageCallback& on_stage) {
    config.validate();
    check_task_sequence(tasks);
    if (completed < 0 || completed >= static_cast<int>(tasks.size())) {
        throw ContractError("resume_sequence: completed tasks already cover the sequence");
    }
    if (matrix.num_stages() != completed) {
        throw ContractError("resume_sequence: matrix rows disagree with completed count");
    }

    auto started = std::chrono::steady_clock::now();
    for (int t = completed; t < static_cast<int>(tasks.size()); ++t) {
        const TaskSpec& task = tasks[static_cast<std::size_t>(t)];
        TaskTrainResult trained = train_task(params, state, task, config);
        params = std::move(trained.params);
        state = std::move(trained.state);
        if (config.optimizer == OptimizerKind::kKalman) {
            HeadMask mask(task.active_classes, params.num_classes());
            FisherDiagonal fisher =
                fisher_diagonal(params, task.train.inputs, task.train.labels, mask,
                                static_cast<std::size_t>(config.fisher_batch_size));
            ImportanceRate task_importance = normalize_fisher(fisher);
            state = consolidate(state, task_importance, trained.last_epoch_grad_abs_mean,
                                config.alpha);
        }
        matrix.add_stage(evaluate_tasks(params, tasks, t + 1));
        if (on_stage) {
            on_stage(t + 1, params, state, matrix);
        }
    }
    auto finished = std::chrono::steady_clock::now();

    SequenceResult result;
    result.report.config = config;
    result.report.layer_dims = params.layer_dims;
    result.report.matrix = matrix;
    for (int s = 1; s <= matrix.num_stages(); ++s) {
        result.report.average_curve.push_back(average_accuracy(matrix, s));
    }
    result.report.final_accuracies = matrix.rows.back();
    result.report.final_average = result.report.average_curve.back();
    result.report.wall_seconds = std::chrono::duration<double>(finished - started).count();
    result.params = std::move(params);
    result.state = std::move(state);
    return result;
}

SequenceResult run_sequence(const std::vector<TaskSpec>& tasks, const TrainConfig& config,
                            const StageCallback& on_stage) {
    config.validate();
    check_task_sequence(tasks);
    const LabeledDataset& first_train = tasks.front().train;
    std::vector<int> layer_dims;
    layer_dims.push_back(static_cast<int>(first_train.dim()));
    layer_dims.insert(layer_dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    layer_dims.push_back(first_train.num_classes);

    NetworkParams params = init_params(layer_dims, derive_seed(config.seed, {stream::kInit}));
    KalmanState state =
        make_kalman_state(params.parameter_count(), config.learning_rate, config.xi);
    return resume_sequence(tasks, config, std::move(params), std::move(state), AccuracyMatrix{},
                           0, on_stage);
}

ComparisonSummary compare_runs(const RunReport& a, const RunReport& b) {
    if (a.matrix.num_stages() != b.matrix.num_stages()) {
        throw ContractError("compare_runs: runs cover different numbers of stages");
    }
    if (a.layer_dims != b.layer_dims) {
        throw ContractError("compare_runs: runs used different architectures");
    }
    if (a.dataset.num_classes != b.dataset.num_classes ||
        a.dataset.classes_per_task != b.dataset.classes_per_task) {
        throw ContractError("compare_runs: runs used different task sequences");
    }
    ComparisonSummary summary;
    for (int s = 1; s <= a.matrix.num_stages(); ++s) {
        summary.per_stage_average_delta.push_back(average_accuracy(a.matrix, s) -
                                                  average_accuracy(b.matrix, s));
    }
    for (std::size_t t = 0; t < a.final_accuracies.size(); ++t) {
        summary.final_per_task_delta.push_back(a.final_accuracies[t] - b.final_accuracies[t]);
    }
    summary.final_average_delta = a.final_average - b.final_average;
    return summary;
}

std::vector<TaskSpec> build_tasks(const DatasetConfig& dataset, const TrainConfig& config) {
    if (dataset.kind == DatasetConfig::Kind::kSynthetic) {
        LabeledDataset all = synthetic_digits(
            dataset.num_classes, dataset.train_per_class + dataset.test_per_class, dataset.dim,
            derive_seed(config.seed, {stream::kData}));
        auto [train, test] = holdout_split(all, dataset.test_per_class);
        return split_tasks(train, test, dataset.classes_per_task);
    }
    LabeledDataset train = load_idx(dataset.train_images, dataset.train_labels);
    LabeledDataset test = load_idx(dataset.test_images, dataset.test_labels);
    return split_tasks(train, test, dataset.classes_per_task);
}

}  // namespace kcl
