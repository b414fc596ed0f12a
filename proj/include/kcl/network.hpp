#ifndef KCL_NETWORK_HPP
#define KCL_NETWORK_HPP

#include <cstdint>
#include <vector>

#include "kcl/matrix.hpp"

namespace kcl {

/// Flat parameter vector. The common currency for gradients, Fisher
/// diagonals, uncertainties and optimizer state.
using ParamVector = std::vector<double>;

/// The class subset a task is allowed to see. Loss and accuracy are
/// computed over these classes only; everything else is excluded from the
/// softmax entirely.
class HeadMask {
public:
    /// Classes are stored sorted and deduplicated. Throws ContractError if
    /// empty or if any index is negative or >= num_classes.
    HeadMask(std::vector<int> active_classes, int num_classes);

    const std::vector<int>& active() const { return active_; }
    int num_classes() const { return num_classes_; }
    bool is_active(int c) const { return c >= 0 && c < num_classes_ && lookup_[static_cast<std::size_t>(c)]; }
    bool all_active() const { return static_cast<int>(active_.size()) == num_classes_; }

private:
    std::vector<int> active_;
    std::vector<char> lookup_;
    int num_classes_ = 0;
};

/// One fully connected layer: out-by-in weight matrix plus bias.
struct LayerParams {
    Matrix weight;              // out x in
    std::vector<double> bias;   // out
};

/// Layer-structured weights of the MLP. Hidden layers use ReLU, the last
/// layer emits raw logits.
struct NetworkParams {
    std::vector<int> layer_dims;     // input, hidden..., num_classes
    std::vector<LayerParams> layers;

    int input_dim() const { return layer_dims.front(); }
    int num_classes() const { return layer_dims.back(); }
    std::size_t parameter_count() const;
};

/// Pre-activations and activations kept from a forward pass, enough for an
/// exact backward pass over the same batch.
struct ForwardCache {
    Matrix input;                        // B x input_dim
    std::vector<Matrix> pre_activations; // per layer, B x out
    std::vector<Matrix> activations;     // per layer, B x out (last = logits)
};

/// Seeded Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero
/// biases. Same seed, same dims: bit-identical parameters. Draw order is
/// row-major weights per layer, layers in order.
NetworkParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Total parameter count for an architecture, sum of out*in + out.
std::size_t parameter_count(const std::vector<int>& layer_dims);

ParamVector flatten(const NetworkParams& params);

/// Inverse of flatten for the given architecture. Throws ShapeError if the
/// vector length does not match the architecture.
void unflatten(const ParamVector& flat, NetworkParams& params);

std::pair<Matrix, ForwardCache> forward(const NetworkParams& params, const Matrix& batch);

/// Logits only, cache skipped. Same arithmetic as forward().
Matrix forward_logits(const NetworkParams& params, const Matrix& batch);

/// Mean over the batch of -log softmax(label) with the softmax restricted
/// to the mask's active classes. Probabilities are floored at 1e-12 before
/// the log. Labels outside the mask throw ContractError.
double masked_loss(const Matrix& logits, const std::vector<int>& labels, const HeadMask& mask);

/// Gradient of masked_loss with respect to every parameter, flattened.
/// Output-layer rows and biases of inactive classes are exactly zero.
ParamVector backward(const NetworkParams& params, const ForwardCache& cache,
                     const std::vector<int>& labels, const HeadMask& mask);

/// Fraction of samples whose argmax over active-class logits equals the
/// label. Ties break to the lowest class index.
double accuracy(const NetworkParams& params, const Matrix& inputs,
                const std::vector<int>& labels, const HeadMask& mask);

}  // namespace kcl

#endif  // KCL_NETWORK_HPP
