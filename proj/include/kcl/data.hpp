#ifndef KCL_DATA_HPP
#define KCL_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kcl/matrix.hpp"

namespace kcl {

/// Inputs scaled to [0,1], integer class labels, and the class count.
struct LabeledDataset {
    Matrix inputs;            // N x D
    std::vector<int> labels;  // N
    int num_classes = 0;

    std::size_t size() const { return inputs.rows(); }
    std::size_t dim() const { return inputs.cols(); }
};

/// One disjoint-label task: its class subset plus filtered train and test
/// splits. Class subsets are consecutive and pairwise disjoint across a
/// sequence.
struct TaskSpec {
    int task_id = 0;
    std::vector<int> active_classes;
    LabeledDataset train;
    LabeledDataset test;
};

/// Parse an IDX image/label file pair (the classic big-endian digit
/// format: images magic 0x00000803, labels 0x00000801). Pixels are scaled
/// by 1/255; images are flattened row-major to D = rows*cols. Any
/// structural problem (bad magic, truncation, count mismatch) throws
/// FormatError; garbage input never crashes.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Same parser over in-memory buffers, for tests and fuzzing.
LabeledDataset parse_idx(const std::vector<std::uint8_t>& image_bytes,
                         const std::vector<std::uint8_t>& label_bytes);

/// Seeded Gaussian class clusters inside [0,1]^dim.
///
/// Class centers are drawn uniformly in [0.2,0.8]^dim and redrawn until
/// every pair is separated by min(0.7, 0.45*sqrt(dim)); samples add
/// per-coordinate Gaussian noise with sigma 0.1 and are clamped to [0,1].
/// The midplane margin between classes is therefore at least half the
/// separation, several sigma of projected noise, so the clusters are
/// linearly separable in practice. Samples are laid out class by class;
/// identical arguments give an identical dataset. Throws ContractError if
/// separated centers cannot be placed (too many classes for the dim).
LabeledDataset synthetic_digits(int num_classes, int per_class, int dim, std::uint64_t seed);

/// Deterministic train/test partition: the last test_per_class samples of
/// each class become test, the rest train. Sample order within each split
/// is preserved.
std::pair<LabeledDataset, LabeledDataset> holdout_split(const LabeledDataset& dataset,
                                                        int test_per_class);

/// Cut train and test into tasks of consecutive classes: [0..c), [c..2c),
/// and so on. num_classes must be divisible by classes_per_task. The tasks
/// partition both datasets.
std::vector<TaskSpec> split_tasks(const LabeledDataset& train, const LabeledDataset& test,
                                  int classes_per_task);

/// Subset of a dataset containing exactly the samples whose label is in
/// [first_class, first_class + count), in original order.
LabeledDataset filter_classes(const LabeledDataset& dataset, int first_class, int count);

}  // namespace kcl

#endif  // KCL_DATA_HPP
