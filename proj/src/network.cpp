#include "kcl/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kcl/errors.hpp"
#include "kcl/rng.hpp"

namespace kcl {

HeadMask::HeadMask(std::vector<int> active_classes, int num_classes)
    : active_(std::move(active_classes)), num_classes_(num_classes) {
    if (num_classes_ <= 0) {
        throw ContractError("HeadMask: num_classes must be positive");
    }
    if (active_.empty()) {
        throw ContractError("HeadMask: active class set must not be empty");
    }
    std::sort(active_.begin(), active_.end());
    active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
    lookup_.assign(static_cast<std::size_t>(num_classes_), 0);
    for (int c : active_) {
        if (c < 0 || c >= num_classes_) {
            throw ContractError("HeadMask: class index " + std::to_string(c) + " out of range");
        }
        lookup_[static_cast<std::size_t>(c)] = 1;
    }
}

static void check_dims(const std::vector<int>& layer_dims) {
    if (layer_dims.size() < 2) {
        throw ShapeError("layer_dims needs at least an input and an output dimension");
    }
    for (int d : layer_dims) {
        if (d <= 0) {
            throw ShapeError("layer_dims entries must be positive");
        }
    }
}

std::size_t parameter_count(const std::vector<int>& layer_dims) {
    check_dims(layer_dims);
    std::size_t total = 0;
    for (std::size_t i = 1; i < layer_dims.size(); ++i) {
        auto in = static_cast<std::size_t>(layer_dims[i - 1]);
        auto out = static_cast<std::size_t>(layer_dims[i]);
        total += out * in + out;
    }
    return total;
}

std::size_t NetworkParams::parameter_count() const {
    return kcl::parameter_count(layer_dims);
}

NetworkParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed) {
    check_dims(layer_dims);
    NetworkParams params;
    params.layer_dims = layer_dims;
    SplitMix64 rng(seed);
    for (std::size_t i = 1; i < layer_dims.size(); ++i) {
        auto in = static_cast<std::size_t>(layer_dims[i - 1]);
        auto out = static_cast<std::size_t>(layer_dims[i]);
        LayerParams layer;
        layer.weight = Matrix(out, in);
        double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : layer.weight.data()) {
            w = rng.next_uniform(-limit, limit);
        }
        layer.bias.assign(out, 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

ParamVector flatten(const NetworkParams& params) {
    ParamVector flat;
    flat.reserve(params.parameter_count());
    for (const auto& layer : params.layers) {
        flat.insert(flat.end(), layer.weight.data().begin(), layer.weight.data().end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

void unflatten(const ParamVector& flat, NetworkParams& params) {
    if (flat.size() != params.parameter_count()) {
        throw ShapeError("unflatten: vector length does not match architecture");
    }
    std::size_t pos = 0;
    for (auto& layer : params.layers) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), layer.weight.size(),
                    layer.weight.data().begin());
        pos += layer.weight.size();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(),
                    layer.bias.begin());
        pos += layer.bias.size();
    }
}

std::pair<Matrix, ForwardCache> forward(const NetworkParams& params, const Matrix& batch) {
    if (batch.rows() == 0) {
        throw ShapeError("forward: batch must contain at least one sample");
    }
    if (batch.cols() != static_cast<std::size_t>(params.input_dim())) {
        throw ShapeError("forward: batch width does not match input_dim");
    }
    ForwardCache cache;
    cache.input = batch;
    const Matrix* current = &cache.input;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const LayerParams& layer = params.layers[l];
        Matrix z = multiply_transposed(*current, layer.weight);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            double* row = z.row(r);
            for (std::size_t c = 0; c < z.cols(); ++c) {
                row[c] += layer.bias[c];
            }
        }
        cache.pre_activations.push_back(z);
        bool hidden = l + 1 < params.layers.size();
        if (hidden) {
            for (double& v : z.data()) {
                v = v > 0.0 ? v : 0.0;  // ReLU; derivative at 0 is taken as 0
            }
        }
        cache.activations.push_back(std::move(z));
        current = &cache.activations.back();
    }
    return {cache.activations.back(), std::move(cache)};
}

Matrix forward_logits(const NetworkParams& params, const Matrix& batch) {
    return forward(params, batch).first;
}

/// Softmax over active classes with max-subtraction; fills probs (size
/// num_active, ordered like mask.active()).
static void masked_softmax_row(const double* logits, const HeadMask& mask,
                               std::vector<double>& probs) {
    const std::vector<int>& active = mask.active();
    double max_logit = logits[active[0]];
    for (int c : active) {
        max_logit = std::max(max_logit, logits[c]);
    }
    double denom = 0.0;
    probs.resize(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        probs[i] = std::exp(logits[active[i]] - max_logit);
        denom += probs[i];
    }
    for (double& p : probs) {
        p /= denom;
    }
}

double masked_loss(const Matrix& logits, const std::vector<int>& labels, const HeadMask& mask) {
    if (logits.rows() != labels.size()) {
        throw ShapeError("masked_loss: batch size mismatch between logits and labels");
    }
    if (logits.cols() != static_cast<std::size_t>(mask.num_classes())) {
        throw ShapeError("masked_loss: logit width does not match mask num_classes");
    }
    const std::vector<int>& active = mask.active();
    double total = 0.0;
    std::vector<double> probs;
    for (std::size_t b = 0; b < logits.rows(); ++b) {
        if (!mask.is_active(labels[b])) {
            throw ContractError("masked_loss: label " + std::to_string(labels[b]) +
                                " is not in the active class set");
        }
        masked_softmax_row(logits.row(b), mask, probs);
        double p = 0.0;
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (active[i] == labels[b]) {
                p = probs[i];
                break;
            }
        }
        total += -std::log(std::max(p, 1e-12));
    }
    return total / static_cast<double>(logits.rows());
}

ParamVector backward(const NetworkParams& params, const ForwardCache& cache,
                     const std::vector<int>& labels, const HeadMask& mask) {
    std::size_t num_layers = params.layers.size();
    if (cache.activations.size() != num_layers || cache.pre_activations.size() != num_layers) {
        throw ContractError("backward: cache does not match network depth");
    }
    const Matrix& logits = cache.activations.back();
    if (logits.rows() != labels.size()) {
        throw ContractError("backward: cache batch size does not match labels");
    }
    if (logits.cols() != static_cast<std::size_t>(params.num_classes()) ||
        cache.input.cols() != static_cast<std::size_t>(params.input_dim())) {
        throw ContractError("backward: cache shapes do not match params");
    }
    std::size_t batch = logits.rows();
    double inv_batch = 1.0 / static_cast<double>(batch);

    // dL/dlogits: (softmax - onehot)/B on active columns, zero elsewhere.
    Matrix delta(batch, logits.cols());
    const std::vector<int>& active = mask.active();
    std::vector<double> probs;
    for (std::size_t b = 0; b < batch; ++b) {
        if (!mask.is_active(labels[b])) {
            throw ContractError("backward: label outside the active class set");
        }
        masked_softmax_row(logits.row(b), mask, probs);
        for (std::size_t i = 0; i < active.size(); ++i) {
            auto c = static_cast<std::size_t>(active[i]);
            double target = active[i] == labels[b] ? 1.0 : 0.0;
            delta(b, c) = (probs[i] - target) * inv_batch;
        }
    }

    std::vector<Matrix> grad_weights(num_layers);
    std::vector<std::vector<double>> grad_biases(num_layers);
    for (std::size_t li = num_layers; li-- > 0;) {
        const Matrix& layer_input = li == 0 ? cache.input : cache.activations[li - 1];
        // dW = delta^T * input, db = column sums of delta
        Matrix dw(params.layers[li].weight.rows(), params.layers[li].weight.cols());
        std::vector<double> db(params.layers[li].bias.size(), 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* drow = delta.row(b);
            const double* irow = layer_input.row(b);
            for (std::size_t o = 0; o < dw.rows(); ++o) {
                double d = drow[o];
                if (d == 0.0) {
                    db[o] += d;
                    continue;
                }
                double* wrow = dw.row(o);
                for (std::size_t i = 0; i < dw.cols(); ++i) {
                    wrow[i] += d * irow[i];
                }
                db[o] += d;
            }
        }
        grad_weights[li] = std::move(dw);
        grad_biases[li] = std::move(db);
        if (li > 0) {
            // dInput = delta * W, then gate by ReLU'(z) of the previous layer
            Matrix dinput = multiply(delta, params.layers[li].weight);
            const Matrix& z_prev = cache.pre_activations[li - 1];
            for (std::size_t idx = 0; idx < dinput.size(); ++idx) {
                if (z_prev.data()[idx] <= 0.0) {
                    dinput.data()[idx] = 0.0;
                }
            }
            delta = std::move(dinput);
        }
    }

    ParamVector grad;
    grad.reserve(params.parameter_count());
    for (std::size_t li = 0; li < num_layers; ++li) {
        grad.insert(grad.end(), grad_weights[li].data().begin(), grad_weights[li].data().end());
        grad.insert(grad.end(), grad_biases[li].begin(), grad_biases[li].end());
    }
    return grad;
}

double accuracy(const NetworkParams& params, const Matrix& inputs,
                const std::vector<int>& labels, const HeadMask& mask) {
    if (inputs.rows() == 0) {
        throw ContractError("accuracy: dataset must not be empty");
    }
    if (inputs.rows() != labels.size()) {
        throw ShapeError("accuracy: inputs and labels disagree on sample count");
    }
    Matrix logits = forward_logits(params, inputs);
    const std::vector<int>& active = mask.active();
    std::size_t correct = 0;
    for (std::size_t b = 0; b < logits.rows(); ++b) {
        const double* row = logits.row(b);
        int best = active[0];
        for (int c : active) {
            if (row[c] > row[best]) {
                best = c;  // strict >, so ties keep the lowest index
            }
        }
        if (best == labels[b]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace kcl
