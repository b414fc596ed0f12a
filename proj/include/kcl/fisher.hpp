#ifndef KCL_FISHER_HPP
#define KCL_FISHER_HPP

#include "kcl/network.hpp"

namespace kcl {

/// Per-parameter diagonal Fisher estimate; entries are mean squared
/// log-likelihood gradients, always >= 0.
using FisherDiagonal = ParamVector;

/// Fisher diagonal normalized by its global maximum; entries in [0,1].
using ImportanceRate = ParamVector;

/// Empirical diagonal Fisher: mean over fixed-order batches of the
/// element-wise squared gradient of the masked cross-entropy at the true
/// labels. batch_size 1 gives the per-sample expectation.
FisherDiagonal fisher_diagonal(const NetworkParams& params, const Matrix& inputs,
                               const std::vector<int>& labels, const HeadMask& mask,
                               std::size_t batch_size);

/// Divide by the global maximum entry. An all-zero Fisher maps to all
/// zeros: no gradient anywhere means no evidence of importance.
ImportanceRate normalize_fisher(const FisherDiagonal& fisher);

/// Entries >= alpha become exactly 1 (long-term memory); entries below
/// alpha pass through unchanged. alpha must lie in (0,1].
ImportanceRate threshold_importance(const ImportanceRate& f_star, double alpha);

/// Element-wise maximum. The single stored importance vector across any
/// number of tasks; merging keeps whichever task found each parameter more
/// important.
ImportanceRate merge_fisher(const ImportanceRate& accumulated, const ImportanceRate& new_task);

}  // namespace kcl

#endif  // KCL_FISHER_HPP
