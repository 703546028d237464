#include "aebound/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "aebound/norms.hpp"
#include "aebound/parallel.hpp"

namespace aebound {

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid:
            // Split form keeps exp() from overflowing for large |z|.
            if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
            else {
                const double e = std::exp(z);
                return e / (1.0 + e);
            }
        case Activation::identity: return z;
    }
    return z;
}

// Derivative expressed through the pre-activation z and the output y.
double activate_derivative(Activation a, double z, double y) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

std::string dims_message(const char* what, std::size_t expected, std::size_t got) {
    return std::string(what) + ": expected dimension " + std::to_string(expected) + ", got " +
           std::to_string(got);
}

Vector apply_layer(const Layer& layer, std::span<const double> x) {
    Vector z = layer.weights.apply(x);
    if (!layer.bias.empty())
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
    for (double& v : z) v = activate(layer.activation, v);
    return z;
}

struct Trace {
    std::vector<Vector> inputs;   // input to layer i
    std::vector<Vector> preacts;  // W_i x + b_i
    Vector output;
};

Trace forward_trace(const NetworkParams& params, std::span<const double> x) {
    Trace t;
    const auto layers = params.layers();
    t.inputs.reserve(layers.size());
    t.preacts.reserve(layers.size());
    Vector cur(x.begin(), x.end());
    for (const Layer& layer : layers) {
        Vector z = layer.weights.apply(cur);
        if (!layer.bias.empty())
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
        Vector y(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) y[i] = activate(layer.activation, z[i]);
        t.inputs.push_back(std::move(cur));
        t.preacts.push_back(std::move(z));
        cur = std::move(y);
    }
    t.output = std::move(cur);
    return t;
}

void require_batch(const NetworkParams& params, const Matrix& batch) {
    if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
    if (batch.cols() != params.input_dim())
        throw std::invalid_argument(dims_message("batch", params.input_dim(), batch.cols()));
}

double clamp_probability(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(SurrogateLoss l) { return l == SurrogateLoss::mse ? "mse" : "bce"; }

SurrogateLoss parse_surrogate(std::string_view name) {
    if (name == "mse") return SurrogateLoss::mse;
    if (name == "bce") return SurrogateLoss::bce;
    throw std::invalid_argument("unknown surrogate loss '" + std::string(name) + "'");
}

NetworkParams::NetworkParams(std::vector<Layer> layers, std::size_t bottleneck_index)
    : layers_(std::move(layers)), bottleneck_index_(bottleneck_index) {
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.weights.empty()) throw std::invalid_argument("layer " + std::to_string(i) + " has no weights");
        if (!l.bias.empty() && l.bias.size() != l.out_dim())
            throw std::invalid_argument("layer " + std::to_string(i) + " bias length mismatch");
        if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
            throw std::invalid_argument("layer " + std::to_string(i) + " input " +
                                        std::to_string(l.in_dim()) + " does not match previous output " +
                                        std::to_string(layers_[i - 1].out_dim()));
        }
    }
    if (bottleneck_index_ + 1 >= layers_.size())
        throw std::invalid_argument("bottleneck index must leave a non-empty decoder");
}

std::size_t NetworkParams::max_width() const {
    std::size_t h = 0;
    for (const Layer& l : layers_) h = std::max(h, l.out_dim());
    return h;
}

bool NetworkParams::has_bias() const {
    return std::any_of(layers_.begin(), layers_.end(), [](const Layer& l) { return !l.bias.empty(); });
}

std::size_t validate_autoencoder(std::span<const LayerSpec> arch) {
    if (arch.size() < 2) throw std::invalid_argument("autoencoder needs at least two layers");
    for (std::size_t i = 0; i < arch.size(); ++i) {
        if (arch[i].in_dim == 0 || arch[i].out_dim == 0)
            throw std::invalid_argument("layer " + std::to_string(i) + " has a zero dimension");
        if (i > 0 && arch[i - 1].out_dim != arch[i].in_dim)
            throw std::invalid_argument("layer " + std::to_string(i) + " input " +
                                        std::to_string(arch[i].in_dim) + " does not match previous output " +
                                        std::to_string(arch[i - 1].out_dim));
    }
    const std::size_t m = arch.front().in_dim;
    if (arch.back().out_dim != m)
        throw std::invalid_argument("autoencoder output " + std::to_string(arch.back().out_dim) +
                                    " differs from input " + std::to_string(m));
    std::size_t best = 0;
    for (std::size_t i = 1; i + 1 < arch.size(); ++i)
        if (arch[i].out_dim < arch[best].out_dim) best = i;
    if (arch[best].out_dim >= m) throw std::invalid_argument("autoencoder has no bottleneck narrower than its input");
    return best;
}

Vector apply_layers(std::span<const Layer> layers, std::span<const double> x) {
    if (layers.empty()) return Vector(x.begin(), x.end());
    if (x.size() != layers.front().in_dim())
        throw std::invalid_argument(dims_message("input", layers.front().in_dim(), x.size()));
    Vector cur(x.begin(), x.end());
    for (const Layer& l : layers) cur = apply_layer(l, cur);
    return cur;
}

Vector forward(const NetworkParams& params, std::span<const double> x) {
    return apply_layers(params.layers(), x);
}

Vector encode(const NetworkParams& params, std::span<const double> x) {
    return apply_layers(params.encoder_layers(), x);
}

Vector decode(const NetworkParams& params, std::span<const double> z) {
    if (z.size() != params.code_dim())
        throw std::invalid_argument(dims_message("code", params.code_dim(), z.size()));
    return apply_layers(params.decoder_layers(), z);
}

Matrix forward_batch(const NetworkParams& params, const Matrix& xs) {
    require_batch(params, xs);
    Matrix out(xs.rows(), params.output_dim());
    parallel_for(xs.rows(), [&](std::size_t i) {
        const Vector y = forward(params, xs.row(i));
        std::copy(y.begin(), y.end(), out.row(i).begin());
    });
    return out;
}

Matrix encode_batch(const NetworkParams& params, const Matrix& xs) {
    require_batch(params, xs);
    Matrix out(xs.rows(), params.code_dim());
    parallel_for(xs.rows(), [&](std::size_t i) {
        const Vector y = encode(params, xs.row(i));
        std::copy(y.begin(), y.end(), out.row(i).begin());
    });
    return out;
}

double surrogate_loss(const NetworkParams& params, const Matrix& batch, SurrogateLoss loss) {
    require_batch(params, batch);
    if (params.output_dim() != batch.cols())
        throw std::invalid_argument(dims_message("reconstruction", batch.cols(), params.output_dim()));
    Vector per_sample(batch.rows(), 0.0);
    parallel_for(batch.rows(), [&](std::size_t i) {
        const auto x = batch.row(i);
        const Vector y = forward(params, x);
        double acc = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (loss == SurrogateLoss::mse) {
                const double d = y[j] - x[j];
                acc += d * d;
            } else {
                const double p = clamp_probability(y[j]);
                acc -= x[j] * std::log(p) + (1.0 - x[j]) * std::log(1.0 - p);
            }
        }
        per_sample[i] = acc;
    });
    double total = 0.0;
    for (double v : per_sample) total += v;
    return total / static_cast<double>(batch.rows() * batch.cols());
}

Gradients gradient(const NetworkParams& params, const Matrix& batch, SurrogateLoss loss) {
    require_batch(params, batch);
    const auto layers = params.layers();
    const std::size_t d = layers.size();
    Gradients g;
    g.weights.reserve(d);
    g.biases.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        g.weights.emplace_back(layers[i].out_dim(), layers[i].in_dim());
        if (!layers[i].bias.empty()) g.biases[i].assign(layers[i].out_dim(), 0.0);
    }
    const double scale = 1.0 / static_cast<double>(batch.rows() * batch.cols());

    for (std::size_t s = 0; s < batch.rows(); ++s) {
        const auto x = batch.row(s);
        const Trace t = forward_trace(params, x);

        // dL/d(output)
        Vector delta(t.output.size());
        for (std::size_t j = 0; j < delta.size(); ++j) {
            const double y = t.output[j];
            if (loss == SurrogateLoss::mse) {
                delta[j] = 2.0 * (y - x[j]) * scale;
            } else if (y <= kBceClamp || y >= 1.0 - kBceClamp) {
                delta[j] = 0.0;  // clamp is flat here
            } else {
                delta[j] = (-(x[j] / y) + (1.0 - x[j]) / (1.0 - y)) * scale;
            }
        }

        for (std::size_t k = d; k-- > 0;) {
            const Layer& layer = layers[k];
            const Vector& z = t.preacts[k];
            const Vector& y = (k + 1 < d) ? t.inputs[k + 1] : t.output;
            for (std::size_t j = 0; j < delta.size(); ++j)
                delta[j] *= activate_derivative(layer.activation, z[j], y[j]);

            const Vector& in = t.inputs[k];
            Matrix& gw = g.weights[k];
            for (std::size_t r = 0; r < delta.size(); ++r) {
                const double dr = delta[r];
                if (dr == 0.0) continue;
                auto row = gw.row(r);
                for (std::size_t c = 0; c < in.size(); ++c) row[c] += dr * in[c];
            }
            if (!layer.bias.empty())
                for (std::size_t r = 0; r < delta.size(); ++r) g.biases[k][r] += delta[r];
            if (k > 0) delta = layer.weights.apply_transposed(delta);
        }
    }
    return g;
}

NetworkParams normalize_weights(const NetworkParams& params) {
    const auto layers = params.layers();
    const std::size_t d = layers.size();
    if (params.has_bias())
        throw std::invalid_argument("normalize_weights: biased networks are not positively homogeneous");
    for (std::size_t i = 0; i + 1 < d; ++i) {
        if (layers[i].activation == Activation::sigmoid)
            throw std::invalid_argument("normalize_weights: hidden layer " + std::to_string(i) +
                                        " uses sigmoid; rescaling needs relu or identity");
    }
    std::vector<double> norms(d);
    double log_beta = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        norms[i] = spectral_norm(layers[i].weights).value;
        if (!(norms[i] > 0.0))
            throw std::invalid_argument("normalize_weights: layer " + std::to_string(i) +
                                        " has zero spectral norm");
        log_beta += std::log(norms[i]);
    }
    const double beta = std::exp(log_beta / static_cast<double>(d));
    std::vector<Layer> out(layers.begin(), layers.end());
    for (std::size_t i = 0; i < d; ++i) out[i].weights *= beta / norms[i];
    return NetworkParams(std::move(out), params.bottleneck_index());
}

}  // namespace aebound
