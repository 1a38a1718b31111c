#include "gradid/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gradid/errors.hpp"
#include "gradid/rng.hpp"

namespace gradid {

namespace {

// y = W x + b for one dense layer.
void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& y) {
    y.assign(layer.out_dim, 0.0);
    const double* w = layer.weights.data();
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
        double acc = layer.biases[r];
        const double* row = w + r * layer.in_dim;
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
}

void apply_activation(Activation act, std::vector<double>& v) {
    if (act == Activation::relu) {
        for (double& x : v) {
            if (x < 0.0) x = 0.0;
        }
    }
}

// dz = upstream gradient through the activation, given the pre-activation z.
// ReLU subgradient at exactly 0 is 0.
void activation_backward(Activation act, std::span<const double> preact, std::vector<double>& dz) {
    if (act == Activation::relu) {
        for (std::size_t i = 0; i < dz.size(); ++i) {
            if (preact[i] <= 0.0) dz[i] = 0.0;
        }
    }
}

// dx = W^T dz.
void backprop_input(const DenseLayer& layer, std::span<const double> dz, std::vector<double>& dx) {
    dx.assign(layer.in_dim, 0.0);
    const double* w = layer.weights.data();
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
        const double g = dz[r];
        if (g == 0.0) continue;
        const double* row = w + r * layer.in_dim;
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
            dx[c] += row[c] * g;
        }
    }
}

struct LayerGrad {
    std::vector<double> weights;
    std::vector<double> biases;
};

// Backward pass from dLoss/dlogits down to (and including) layer `stop`.
// Fills parameter gradients for layers in [stop, L); leaves input gradient in
// `dx` when stop == 0 and input_grad is requested.
void backward(const Network& net, const ForwardTrace& trace, std::vector<double> dlogits,
              std::size_t stop, std::vector<LayerGrad>* param_grads, std::vector<double>* input_grad) {
    const auto& layers = net.layers();
    std::vector<double> dz = std::move(dlogits);
    std::vector<double> dx;
    for (std::size_t li = layers.size(); li-- > stop;) {
        const DenseLayer& layer = layers[li];
        activation_backward(layer.activation, trace.preacts[li], dz);
        if (param_grads) {
            LayerGrad& g = (*param_grads)[li];
            g.weights.assign(layer.out_dim * layer.in_dim, 0.0);
            g.biases.assign(layer.out_dim, 0.0);
            const auto& a_prev = trace.activations[li];
            for (std::size_t r = 0; r < layer.out_dim; ++r) {
                const double gr = dz[r];
                g.biases[r] = gr;
                if (gr == 0.0) continue;
                double* row = g.weights.data() + r * layer.in_dim;
                for (std::size_t c = 0; c < layer.in_dim; ++c) {
                    row[c] = gr * a_prev[c];
                }
            }
        }
        const bool need_dx = li > stop || (li == 0 && input_grad != nullptr);
        if (need_dx) {
            backprop_input(layer, dz, dx);
            std::swap(dz, dx);
        }
    }
    if (input_grad) *input_grad = std::move(dz);
}

std::vector<double> loss_logit_gradient(std::span<const double> logits, int label) {
    std::vector<double> g = softmax(logits);
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

}  // namespace

Network::Network(const std::vector<std::size_t>& dims, std::uint64_t seed, std::size_t gradient_scope)
    : scope_(gradient_scope) {
    if (dims.size() < 2) throw DimensionError("network needs at least input and output widths");
    Rng rng(seed);
    layers_.reserve(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.in_dim = dims[l];
        layer.out_dim = dims[l + 1];
        layer.activation = (l + 2 == dims.size()) ? Activation::identity : Activation::relu;
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
        layer.weights.resize(layer.in_dim * layer.out_dim);
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        layer.biases.assign(layer.out_dim, 0.0);
        layers_.push_back(std::move(layer));
    }
    validate();
}

Network::Network(std::vector<DenseLayer> layers, std::size_t gradient_scope)
    : layers_(std::move(layers)), scope_(gradient_scope) {
    validate();
}

void Network::validate() const {
    if (layers_.empty()) throw DimensionError("network has no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const DenseLayer& layer = layers_[l];
        if (layer.weights.size() != layer.in_dim * layer.out_dim || layer.biases.size() != layer.out_dim) {
            throw DimensionError("layer " + std::to_string(l) + " parameter sizes inconsistent");
        }
        if (l + 1 < layers_.size() && layer.out_dim != layers_[l + 1].in_dim) {
            throw DimensionError("layer widths do not chain at layer " + std::to_string(l));
        }
    }
    if (layers_.back().activation != Activation::identity) {
        throw DimensionError("final layer must be identity (logits)");
    }
    if (scope_ < 1 || scope_ > layers_.size()) {
        throw ParameterError("gradient_scope must be in [1, layer count]");
    }
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
    return n;
}

void Network::set_gradient_scope(std::size_t scope) {
    if (scope < 1 || scope > layers_.size()) {
        throw ParameterError("gradient_scope must be in [1, layer count]");
    }
    scope_ = scope;
}

std::size_t Network::embedding_dim() const {
    std::size_t n = 0;
    for (std::size_t l = layers_.size() - scope_; l < layers_.size(); ++l) {
        n += layers_[l].weights.size() + layers_[l].biases.size();
    }
    return n;
}

std::vector<double> forward(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw DimensionError("input size " + std::to_string(x.size()) + " does not match network input width " +
                             std::to_string(net.input_dim()));
    }
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (const DenseLayer& layer : net.layers()) {
        affine(layer, cur, next);
        apply_activation(layer.activation, next);
        std::swap(cur, next);
    }
    return cur;
}

std::vector<double> forward(const Network& net, const Tensor& x) { return forward(net, x.data()); }

ForwardTrace forward_trace(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw DimensionError("input size does not match network input width");
    }
    ForwardTrace trace;
    trace.activations.reserve(net.layers().size() + 1);
    trace.preacts.reserve(net.layers().size());
    trace.activations.emplace_back(x.begin(), x.end());
    std::vector<double> z;
    for (const DenseLayer& layer : net.layers()) {
        affine(layer, trace.activations.back(), z);
        trace.preacts.push_back(z);
        apply_activation(layer.activation, z);
        trace.activations.push_back(z);
    }
    return trace;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw LabelError("class index " + std::to_string(label) + " out of range");
    }
    for (double v : logits) {
        if (!std::isfinite(v)) throw ValueError("logits must be finite");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return (m + std::log(sum)) - logits[static_cast<std::size_t>(label)];
}

std::vector<double> param_gradient(const Network& net, const LabeledSample& s) {
    const ForwardTrace trace = forward_trace(net, s.input.data());
    const auto& logits = trace.activations.back();
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= logits.size()) {
        throw LabelError("class index out of range");
    }
    const std::size_t stop = net.layers().size() - net.gradient_scope();
    std::vector<LayerGrad> grads(net.layers().size());
    backward(net, trace, loss_logit_gradient(logits, s.label), stop, &grads, nullptr);

    std::vector<double> flat;
    flat.reserve(net.embedding_dim());
    for (std::size_t l = stop; l < net.layers().size(); ++l) {
        flat.insert(flat.end(), grads[l].weights.begin(), grads[l].weights.end());
        flat.insert(flat.end(), grads[l].biases.begin(), grads[l].biases.end());
    }
    return flat;
}

Tensor input_gradient(const Network& net, const LabeledSample& s) {
    const ForwardTrace trace = forward_trace(net, s.input.data());
    const auto& logits = trace.activations.back();
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= logits.size()) {
        throw LabelError("class index out of range");
    }
    std::vector<double> dx;
    backward(net, trace, loss_logit_gradient(logits, s.label), 0, nullptr, &dx);
    return Tensor(s.input.shape(), std::move(dx));
}

std::vector<double> input_gradient_seeded(const Network& net, std::span<const double> x,
                                          std::span<const double> logit_seed) {
    const ForwardTrace trace = forward_trace(net, x);
    if (logit_seed.size() != net.num_classes()) {
        throw DimensionError("logit seed width must equal the class count");
    }
    std::vector<double> dx;
    backward(net, trace, std::vector<double>(logit_seed.begin(), logit_seed.end()), 0, nullptr, &dx);
    return dx;
}

std::vector<std::vector<double>> logit_jacobian(const Network& net, const Tensor& x) {
    const ForwardTrace trace = forward_trace(net, x.data());
    const std::size_t classes = net.num_classes();
    std::vector<std::vector<double>> rows(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> seed(classes, 0.0);
        seed[c] = 1.0;
        backward(net, trace, std::move(seed), 0, nullptr, &rows[c]);
    }
    return rows;
}

Network train(Network net, const std::vector<LabeledSample>& data, const TrainConfig& cfg,
              TrainStats* stats) {
    if (data.empty()) throw TrainingError("training data is empty");
    if (cfg.batch_size == 0) throw ParameterError("batch_size must be positive");
    if (cfg.learning_rate <= 0.0) throw ParameterError("learning_rate must be positive");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<LayerGrad> sample_grads(net.layers().size());
    std::vector<LayerGrad> batch_grads(net.layers().size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t l = 0; l < net.layers().size(); ++l) {
                batch_grads[l].weights.assign(net.layers()[l].weights.size(), 0.0);
                batch_grads[l].biases.assign(net.layers()[l].biases.size(), 0.0);
            }
            for (std::size_t i = start; i < end; ++i) {
                const LabeledSample& s = data[order[i]];
                const ForwardTrace trace = forward_trace(net, s.input.data());
                for (double v : trace.activations.back()) {
                    if (!std::isfinite(v)) {
                        throw TrainingError("logits diverged at epoch " + std::to_string(epoch) +
                                            ", sample " + std::to_string(order[i]));
                    }
                }
                const double loss = cross_entropy(trace.activations.back(), s.label);
                if (!std::isfinite(loss)) {
                    throw TrainingError("loss diverged at epoch " + std::to_string(epoch) + ", sample " +
                                        std::to_string(order[i]));
                }
                epoch_loss += loss;
                backward(net, trace, loss_logit_gradient(trace.activations.back(), s.label), 0,
                         &sample_grads, nullptr);
                for (std::size_t l = 0; l < net.layers().size(); ++l) {
                    for (std::size_t j = 0; j < sample_grads[l].weights.size(); ++j) {
                        batch_grads[l].weights[j] += sample_grads[l].weights[j];
                    }
                    for (std::size_t j = 0; j < sample_grads[l].biases.size(); ++j) {
                        batch_grads[l].biases[j] += sample_grads[l].biases[j];
                    }
                }
            }
            const double step = cfg.learning_rate * inv;
            for (std::size_t l = 0; l < net.layers().size(); ++l) {
                DenseLayer& layer = net.layers()[l];
                for (std::size_t j = 0; j < layer.weights.size(); ++j) {
                    layer.weights[j] -= step * batch_grads[l].weights[j];
                }
                for (std::size_t j = 0; j < layer.biases.size(); ++j) {
                    layer.biases[j] -= step * batch_grads[l].biases[j];
                }
            }
        }
        if (stats) stats->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return net;
}

int predict(const Network& net, const Tensor& x) {
    const std::vector<double> logits = forward(net, x);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double accuracy(const Network& net, const std::vector<LabeledSample>& data) {
    if (data.empty()) throw MetricError("accuracy of an empty set is undefined");
    std::size_t hits = 0;
    for (const LabeledSample& s : data) {
        if (predict(net, s.input) == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace gradid
