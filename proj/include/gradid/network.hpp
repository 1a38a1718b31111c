#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gradid/tensor.hpp"

namespace gradid {

enum class Activation { relu, identity };

struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;  // out_dim x in_dim, row-major
    std::vector<double> biases;   // out_dim
    Activation activation = Activation::identity;
};

// Fully connected classifier with exact analytic gradients. Hidden layers use
// ReLU (subgradient 0 at 0), the final layer emits logits; softmax lives in
// the loss. Immutable once trained; forward/gradient calls are const and may
// run concurrently over samples.
class Network {
public:
    Network() = default;

    // Glorot-uniform initialization from a seeded generator:
    // U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
    Network(const std::vector<std::size_t>& dims, std::uint64_t seed, std::size_t gradient_scope = 1);

    Network(std::vector<DenseLayer> layers, std::size_t gradient_scope = 1);

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    std::size_t input_dim() const { return layers_.front().in_dim; }
    std::size_t num_classes() const { return layers_.back().out_dim; }
    std::size_t param_count() const;

    // Number of trailing layers whose parameters enter gradient embeddings.
    std::size_t gradient_scope() const { return scope_; }
    void set_gradient_scope(std::size_t scope);

    // Flat length of one gradient embedding under the current scope.
    std::size_t embedding_dim() const;

private:
    void validate() const;

    std::vector<DenseLayer> layers_;
    std::size_t scope_ = 1;
};

// Activations and pre-activations of one forward pass. activations[0] is the
// input; activations[l + 1] and preacts[l] belong to layer l.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> preacts;
};

// Pre-softmax logits for one input. Throws DimensionError on a shape mismatch.
std::vector<double> forward(const Network& net, const Tensor& x);
std::vector<double> forward(const Network& net, std::span<const double> x);
ForwardTrace forward_trace(const Network& net, std::span<const double> x);

std::vector<double> softmax(std::span<const double> logits);

// -log(softmax(logits)[label]) with the log-sum-exp stabilization.
double cross_entropy(std::span<const double> logits, int label);

// dLoss/dTheta restricted to the trailing gradient_scope layers, flattened
// layer-major (ascending layer index), weights before biases, weights
// row-major. With scope = 1 this is the final-layer gradient; the scope-1
// vector is always a suffix of the full-scope vector.
std::vector<double> param_gradient(const Network& net, const LabeledSample& s);

// dLoss/dInput, same shape as the sample input.
Tensor input_gradient(const Network& net, const LabeledSample& s);

// dSeed.logits/dInput for an arbitrary linear combination of logits.
std::vector<double> input_gradient_seeded(const Network& net, std::span<const double> x,
                                          std::span<const double> logit_seed);

// Row c holds dlogits[c]/dInput.
std::vector<std::vector<double>> logit_jacobian(const Network& net, const Tensor& x);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

struct TrainStats {
    std::vector<double> epoch_mean_loss;
};

// Seeded mini-batch gradient descent on the cross-entropy loss. epochs = 0
// returns the initialization unchanged. Throws TrainingError if the loss
// turns non-finite.
Network train(Network net, const std::vector<LabeledSample>& data, const TrainConfig& cfg,
              TrainStats* stats = nullptr);

double accuracy(const Network& net, const std::vector<LabeledSample>& data);
int predict(const Network& net, const Tensor& x);

}  // namespace gradid
