#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aebound/matrix.hpp"

namespace aebound {

enum class Activation { relu, sigmoid, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::relu;
};

/// One fully-connected layer: activation(W x + b). The bias is empty for
/// bias-free layers, which is the default everywhere.
struct Layer {
    Matrix weights;  // out_dim x in_dim
    Activation activation = Activation::relu;
    Vector bias;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Weights of a feedforward autoencoder. Layers [0, bottleneck_index] form
/// the encoder, the rest the decoder. Immutable once constructed.
class NetworkParams {
public:
    NetworkParams(std::vector<Layer> layers, std::size_t bottleneck_index);

    std::span<const Layer> layers() const { return layers_; }
    std::span<const Layer> encoder_layers() const { return {layers_.data(), bottleneck_index_ + 1}; }
    std::span<const Layer> decoder_layers() const {
        return {layers_.data() + bottleneck_index_ + 1, layers_.size() - bottleneck_index_ - 1};
    }

    std::size_t depth() const { return layers_.size(); }
    /// Largest number of output units over all layers.
    std::size_t max_width() const;
    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }
    std::size_t code_dim() const { return layers_[bottleneck_index_].out_dim(); }
    std::size_t bottleneck_index() const { return bottleneck_index_; }
    bool has_bias() const;

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

private:
    std::vector<Layer> layers_;
    std::size_t bottleneck_index_ = 0;
};

/// Checks the layer chain and returns the bottleneck layer index (the
/// narrowest layer, first one on ties). Requires an autoencoder shape:
/// first in_dim == last out_dim and a bottleneck narrower than the input.
std::size_t validate_autoencoder(std::span<const LayerSpec> arch);

Vector forward(const NetworkParams& params, std::span<const double> x);
Vector encode(const NetworkParams& params, std::span<const double> x);
Vector decode(const NetworkParams& params, std::span<const double> z);

/// Row-wise forward/encode over a batch (one sample per row).
Matrix forward_batch(const NetworkParams& params, const Matrix& xs);
Matrix encode_batch(const NetworkParams& params, const Matrix& xs);

/// Applies a contiguous run of layers; used for encoder/decoder halves.
Vector apply_layers(std::span<const Layer> layers, std::span<const double> x);

enum class SurrogateLoss { mse, bce };

std::string_view to_string(SurrogateLoss l);
SurrogateLoss parse_surrogate(std::string_view name);

/// Probabilities are clamped to [kBceClamp, 1 - kBceClamp] before the log.
inline constexpr double kBceClamp = 1e-7;

/// Mean over samples and entries of the surrogate reconstruction loss.
double surrogate_loss(const NetworkParams& params, const Matrix& batch, SurrogateLoss loss);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;  // empty vectors for bias-free layers
};

/// Reverse-mode gradient of surrogate_loss with respect to every weight (and
/// bias, when present).
Gradients gradient(const NetworkParams& params, const Matrix& batch, SurrogateLoss loss);

struct TrainConfig {
    double learning_rate = 0.5;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    SurrogateLoss surrogate = SurrogateLoss::bce;
    /// Layers carry biases. Such networks are outside the bias-free form
    /// the norm-based bound is stated for.
    bool use_bias = false;
};

/// Uniform fan-based initialization, U(-sqrt(6/(in+out)), +sqrt(6/(in+out))).
NetworkParams init_params(std::span<const LayerSpec> arch, std::uint64_t seed, bool use_bias = false);

struct TrainResult {
    NetworkParams params;
    /// loss_history[0] is the loss at initialization, loss_history[e] the
    /// full-data surrogate loss after epoch e.
    std::vector<double> loss_history;
};

/// Plain mini-batch SGD on the rows of `samples`.
TrainResult train(std::span<const LayerSpec> arch, const Matrix& samples, const TrainConfig& cfg);

/// Rescales every weight matrix to spectral norm (prod_i ||W_i||_2)^(1/d).
/// Exact for networks whose non-final activations are relu or identity and
/// which carry no biases; other networks are rejected.
NetworkParams normalize_weights(const NetworkParams& params);

}  // namespace aebound
