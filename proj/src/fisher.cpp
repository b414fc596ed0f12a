#include "kcl/fisher.hpp"

#include <algorithm>
#include <string>

#include "kcl/errors.hpp"

namespace kcl {

FisherDiagonal fisher_diagonal(const NetworkParams& params, const Matrix& inputs,
                               const std::vector<int>& labels, const HeadMask& mask,
                               std::size_t batch_size) {
    if (inputs.rows() == 0) {
        throw ContractError("fisher_diagonal: dataset must not be empty");
    }
    if (inputs.rows() != labels.size()) {
        throw ShapeError("fisher_diagonal: inputs and labels disagree on sample count");
    }
    if (batch_size == 0) {
        throw ContractError("fisher_diagonal: batch_size must be positive");
    }
    FisherDiagonal sum(params.parameter_count(), 0.0);
    std::size_t num_batches = 0;
    for (std::size_t start = 0; start < inputs.rows(); start += batch_size) {
        std::size_t count = std::min(batch_size, inputs.rows() - start);
        Matrix batch(count, inputs.cols());
        std::vector<int> batch_labels(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::copy_n(inputs.row(start + i), inputs.cols(), batch.row(i));
            batch_labels[i] = labels[start + i];
        }
        auto [logits, cache] = forward(params, batch);
        ParamVector grad = backward(params, cache, batch_labels, mask);
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += grad[i] * grad[i];
        }
        ++num_batches;
    }
    double inv = 1.0 / static_cast<double>(num_batches);
    for (double& v : sum) {
        v *= inv;
    }
    return sum;
}

ImportanceRate normalize_fisher(const FisherDiagonal& fisher) {
    double max_val = 0.0;
    for (double v : fisher) {
        max_val = std::max(max_val, v);
    }
    ImportanceRate out(fisher.size(), 0.0);
    if (max_val == 0.0) {
        return out;
    }
    for (std::size_t i = 0; i < fisher.size(); ++i) {
        out[i] = fisher[i] / max_val;
    }
    return out;
}

ImportanceRate threshold_importance(const ImportanceRate& f_star, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ContractError("threshold_importance: alpha must lie in (0,1]");
    }
    ImportanceRate out = f_star;
    for (double& v : out) {
        if (v >= alpha) {
            v = 1.0;
        }
    }
    return out;
}

ImportanceRate merge_fisher(const ImportanceRate& accumulated, const ImportanceRate& new_task) {
    if (accumulated.size() != new_task.size()) {
        throw ShapeError("merge_fisher: length mismatch, " + std::to_string(accumulated.size()) +
                         " vs " + std::to_string(new_task.size()));
    }
    ImportanceRate out(accumulated.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::max(accumulated[i], new_task[i]);
    }
    return out;
}

}  // namespace kcl
