#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aebound/network.hpp"
#include "aebound/rng.hpp"

namespace aebound {

NetworkParams init_params(std::span<const LayerSpec> arch, std::uint64_t seed, bool use_bias) {
    const std::size_t bottleneck = validate_autoencoder(arch);
    Rng rng(seed);
    std::vector<Layer> layers;
    layers.reserve(arch.size());
    for (const LayerSpec& spec : arch) {
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
        Matrix w(spec.out_dim, spec.in_dim);
        for (double& v : w.values()) v = rng.uniform(-limit, limit);
        Layer layer{std::move(w), spec.activation, {}};
        if (use_bias) layer.bias.assign(spec.out_dim, 0.0);
        layers.push_back(std::move(layer));
    }
    return NetworkParams(std::move(layers), bottleneck);
}

TrainResult train(std::span<const LayerSpec> arch, const Matrix& samples, const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
        throw std::invalid_argument("learning_rate must be a finite non-negative number");
    if (cfg.epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (samples.empty()) throw std::invalid_argument("training set is empty");
    if (samples.cols() != arch.front().in_dim)
        throw std::invalid_argument("training samples have dimension " + std::to_string(samples.cols()) +
                                    ", network expects " + std::to_string(arch.front().in_dim));
    if (cfg.surrogate == SurrogateLoss::bce) {
        for (double v : samples.values())
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("bce surrogate requires binary inputs, found " + std::to_string(v));
    }

    NetworkParams params = init_params(arch, cfg.seed, cfg.use_bias);
    std::vector<Layer> layers(params.layers().begin(), params.layers().end());
    const std::size_t bottleneck = params.bottleneck_index();

    TrainResult result{params, {}};
    result.loss_history.reserve(cfg.epochs + 1);
    result.loss_history.push_back(surrogate_loss(params, samples, cfg.surrogate));

    // Shuffling draws from a stream separate from initialization.
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(samples.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const Matrix batch = samples.select_rows(std::span(order).subspan(start, stop - start));
            const Gradients g = gradient(params, batch, cfg.surrogate);
            for (std::size_t k = 0; k < layers.size(); ++k) {
                auto w = layers[k].weights.values();
                auto gw = g.weights[k].values();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gw[i];
                for (std::size_t i = 0; i < layers[k].bias.size(); ++i)
                    layers[k].bias[i] -= cfg.learning_rate * g.biases[k][i];
            }
            params = NetworkParams(layers, bottleneck);
        }
        for (const Layer& l : layers)
            if (!l.weights.all_finite()) throw std::runtime_error("training diverged: non-finite weights");
        result.loss_history.push_back(surrogate_loss(params, samples, cfg.surrogate));
    }
    result.params = std::move(params);
    return result;
}

}  // namespace aebound
