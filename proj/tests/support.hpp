#pragma once
// Helpers shared by the test programs: random inputs and oracles that do not
// go through the library's own code paths.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "aebound/data.hpp"
#include "aebound/matrix.hpp"
#include "aebound/network.hpp"
#include "aebound/rng.hpp"

namespace testing_support {

using aebound::Activation;
using aebound::Layer;
using aebound::Matrix;
using aebound::NetworkParams;
using aebound::Rng;
using aebound::Vector;

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

inline Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline Vector random_binary(Rng& rng, std::size_t n) {
    Vector v(n);
    for (double& x : v) x = rng.index(2) == 1 ? 1.0 : 0.0;
    return v;
}

/// Bias-free autoencoder with the given widths: relu everywhere except the
/// bottleneck (identity) and the head.
inline NetworkParams random_net(Rng& rng, const std::vector<std::size_t>& dims, Activation head,
                                double scale = 0.5, bool bias = false) {
    std::size_t bottleneck = 0;
    for (std::size_t i = 1; i + 1 < dims.size(); ++i)
        if (dims[i + 1] < dims[bottleneck + 1]) bottleneck = i;
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Activation a = i + 2 == dims.size() ? head : (i == bottleneck ? Activation::identity : Activation::relu);
        Layer l{random_matrix(rng, dims[i + 1], dims[i], scale), a, {}};
        if (bias) l.bias = random_vector(rng, dims[i + 1], -0.3, 0.3);
        layers.push_back(std::move(l));
    }
    return NetworkParams(std::move(layers), bottleneck);
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

/// Largest singular value from a full SVD.
inline double svd_spectral_norm(const Matrix& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
    return svd.singularValues()(0);
}

inline double naive_activation(Activation a, double v) {
    switch (a) {
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
        case Activation::identity: return v;
    }
    return v;
}

/// Forward pass written with plain loops, independent of Matrix::apply.
inline Vector naive_forward(const NetworkParams& p, const Vector& x) {
    Vector cur = x;
    for (const Layer& l : p.layers()) {
        Vector next(l.out_dim(), 0.0);
        for (std::size_t r = 0; r < l.out_dim(); ++r) {
            long double acc = 0.0L;
            for (std::size_t c = 0; c < l.in_dim(); ++c) acc += static_cast<long double>(l.weights(r, c)) * cur[c];
            if (!l.bias.empty()) acc += l.bias[r];
            next[r] = naive_activation(l.activation, static_cast<double>(acc));
        }
        cur = std::move(next);
    }
    return cur;
}

/// Smallest |pre-activation| of any relu unit on input x; finite differences
/// are unreliable when this is tiny.
inline double relu_kink_distance(const NetworkParams& p, const Vector& x) {
    double best = INFINITY;
    Vector cur = x;
    for (const Layer& l : p.layers()) {
        Vector pre = l.weights.apply(cur);
        if (l.activation == Activation::relu)
            for (double v : pre) best = std::min(best, std::abs(v));
        for (double& v : pre) v = naive_activation(l.activation, v);
        cur = std::move(pre);
    }
    return best;
}

/// n random rows, binary or uniform in [-1, 1].
inline Matrix batch_of(Rng& rng, std::size_t n, std::size_t dim, bool binary) {
    std::vector<Vector> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(binary ? random_binary(rng, dim) : random_vector(rng, dim));
    return Matrix::from_rows(rows);
}

/// Central differences of the surrogate loss with respect to every weight.
inline aebound::Gradients finite_differences(const NetworkParams& p, const Matrix& batch,
                                            aebound::SurrogateLoss loss, double step) {
    aebound::Gradients g;
    std::vector<Layer> layers(p.layers().begin(), p.layers().end());
    auto loss_at = [&](const std::vector<Layer>& ls) {
        return aebound::surrogate_loss(NetworkParams(ls, p.bottleneck_index()), batch, loss);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Matrix gw(layers[i].weights.rows(), layers[i].weights.cols());
        for (std::size_t k = 0; k < gw.size(); ++k) {
            const double orig = layers[i].weights.values()[k];
            layers[i].weights.values()[k] = orig + step;
            const double up = loss_at(layers);
            layers[i].weights.values()[k] = orig - step;
            const double down = loss_at(layers);
            layers[i].weights.values()[k] = orig;
            gw.values()[k] = (up - down) / (2.0 * step);
        }
        g.weights.push_back(std::move(gw));
        Vector gb(layers[i].bias.size());
        for (std::size_t k = 0; k < gb.size(); ++k) {
            const double orig = layers[i].bias[k];
            layers[i].bias[k] = orig + step;
            const double up = loss_at(layers);
            layers[i].bias[k] = orig - step;
            const double down = loss_at(layers);
            layers[i].bias[k] = orig;
            gb[k] = (up - down) / (2.0 * step);
        }
        g.biases.push_back(std::move(gb));
    }
    return g;
}

/// 20-16-2-16-20 autoencoder trained briefly on four synthetic clusters.
struct TrainedFixture {
    aebound::ClusteredData clusters;
    NetworkParams params;
};

inline TrainedFixture trained_fixture(std::uint64_t seed = 11, std::size_t per_cluster = 50) {
    aebound::ClusteredData clusters = aebound::gen_clustered(4, 20, 2, per_cluster, seed);
    const std::vector<aebound::LayerSpec> arch{{20, 16, Activation::relu},
                                               {16, 2, Activation::identity},
                                               {2, 16, Activation::relu},
                                               {16, 20, Activation::sigmoid}};
    aebound::TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 16;
    cfg.seed = seed;
    NetworkParams params = aebound::train(arch, clusters.data.samples(), cfg).params;
    return {std::move(clusters), std::move(params)};
}

inline double rel_diff(double a, double b, double floor = 1e-300) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing_support
