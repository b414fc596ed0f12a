#ifndef KCL_HARNESS_HPP
#define KCL_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kcl/data.hpp"
#include "kcl/kalman.hpp"
#include "kcl/network.hpp"

namespace kcl {

enum class OptimizerKind : std::uint8_t { kKalman = 0, kSgd = 1 };

/// Hyperparameters for one sequential run. Defaults are the desk-scale
/// benchmark settings.
struct TrainConfig {
    double learning_rate = 0.05;
    int batch_size = 32;
    int epochs_per_task = 5;
    double alpha = 0.5;
    double xi = 1e-8;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::kKalman;
    UncertaintyMeasure uncertainty_measure = UncertaintyMeasure::kAbs;
    int fisher_batch_size = 1;
    std::vector<int> hidden_dims = {64, 64};

    /// Throws ContractError on any out-of-range field.
    void validate() const;
};

/// Where the data came from; echoed into reports and checkpoints so a run
/// can be reproduced or resumed.
struct DatasetConfig {
    enum class Kind : std::uint8_t { kSynthetic = 0, kIdx = 1 };
    Kind kind = Kind::kSynthetic;
    int num_classes = 10;
    int train_per_class = 200;   // synthetic only
    int test_per_class = 50;     // synthetic only
    int dim = 16;                // synthetic only; idx fills it after loading
    int classes_per_task = 2;
    std::string train_images;    // idx only
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

/// Lower-triangular accuracy grid: row s holds the accuracy on tasks
/// 1..s+1 after training stage s+1. All entries in [0,1].
struct AccuracyMatrix {
    std::vector<std::vector<double>> rows;

    int num_stages() const { return static_cast<int>(rows.size()); }
    void add_stage(std::vector<double> accuracies);
    /// stage and task count from 1, matching how runs are reported.
    double at(int stage, int task) const;
};

/// Unweighted mean of the accuracies recorded at a stage (counted from 1).
double average_accuracy(const AccuracyMatrix& matrix, int stage);

/// Everything a run emits. wall_seconds is informational and deliberately
/// kept out of the serialized report so identical configs produce
/// byte-identical files.
struct RunReport {
    TrainConfig config;
    DatasetConfig dataset;
    std::vector<int> layer_dims;
    AccuracyMatrix matrix;
    std::vector<double> average_curve;     // average_accuracy per stage
    std::vector<double> final_accuracies;  // last matrix row
    double final_average = 0.0;
    double wall_seconds = 0.0;
};

/// Per-stage deltas between two runs over the same task sequence and
/// architecture (a minus b).
struct ComparisonSummary {
    std::vector<double> per_stage_average_delta;
    std::vector<double> final_per_task_delta;
    double final_average_delta = 0.0;
};

/// Result of training one task: updated weights and filter state plus the
/// mean |gradient| over the final epoch's batches (the end-of-task
/// uncertainty source).
struct TaskTrainResult {
    NetworkParams params;
    KalmanState state;
    ParamVector last_epoch_grad_abs_mean;
    std::size_t steps = 0;
};

/// Mini-batch training on one task. Batches follow a Fisher-Yates shuffle
/// seeded from (seed, task_id, epoch), so runs are reproducible and
/// resumable at task boundaries. Uses the gated Kalman step once the state
/// has been consolidated and the config asks for the kalman optimizer;
/// plain SGD otherwise.
TaskTrainResult train_task(const NetworkParams& params, const KalmanState& state,
                           const TaskSpec& task, const TrainConfig& config);

/// Invoked after each completed stage with the stage number (from 1), the
/// current weights and filter state, and the matrix so far.
using StageCallback =
    std::function<void(int, const NetworkParams&, const KalmanState&, const AccuracyMatrix&)>;

struct SequenceResult {
    RunReport report;
    NetworkParams params;
    KalmanState state;
};

/// The sequential protocol: train each task in order; in kalman mode
/// estimate, normalize and consolidate the Fisher importance at every task
/// boundary; after each stage evaluate every seen task with that task's
/// own head mask.
SequenceResult run_sequence(const std::vector<TaskSpec>& tasks, const TrainConfig& config,
                            const StageCallback& on_stage = {});

/// Same protocol starting from a mid-sequence snapshot: params/state as
/// saved after `completed` tasks, with the matrix rows recorded so far.
SequenceResult resume_sequence(const std::vector<TaskSpec>& tasks, const TrainConfig& config,
                               NetworkParams params, KalmanState state, AccuracyMatrix matrix,
                               int completed, const StageCallback& on_stage = {});

/// Evaluate every task in the sequence with its own head mask against the
/// given parameters (used by the eval command).
std::vector<double> evaluate_tasks(const NetworkParams& params, const std::vector<TaskSpec>& tasks,
                                   int up_to);

/// Stage-by-stage and final deltas, a minus b. Throws ContractError when
/// the two runs do not share a task sequence shape and architecture.
ComparisonSummary compare_runs(const RunReport& a, const RunReport& b);

/// Materialize the task sequence a config describes (synthetic generation
/// or IDX loading, holdout, split). For synthetic data the generation seed
/// is derived from config.seed, so different seeds get different cluster
/// geometry as well as different init and shuffles.
std::vector<TaskSpec> build_tasks(const DatasetConfig& dataset, const TrainConfig& config);

}  // namespace kcl

#endif  // KCL_HARNESS_HPP
