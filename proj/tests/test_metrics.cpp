#include <cmath>
#include <limits>
#include <stdexcept>

#include "aebound/bounds.hpp"
#include "aebound/metrics.hpp"
#include "aebound/parallel.hpp"
#include "aebound/ssl.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace aebound;
using namespace testing_support;

namespace {

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<Vector> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(random_binary(rng, dim));
    return Dataset(Matrix::from_rows(rows));
}

// Zero weights and a sigmoid head: every output entry is exactly 1/2.
NetworkParams constant_half(std::size_t dim) {
    std::vector<Layer> layers;
    layers.push_back({Matrix(1, dim), Activation::relu, {}});
    layers.push_back({Matrix(dim, 1), Activation::sigmoid, {}});
    return NetworkParams(std::move(layers), 0);
}

}  // namespace

TEST_CASE("margin_loss on hand-evaluated inputs") {
    const Vector x{1, 0, 1};
    CHECK(margin_loss(x, x, 0.45) == 0.0);
    CHECK(margin_loss(x, Vector{0.9, 0.2, 0.5}, 0.25) == doctest::Approx(1.0 / 3.0));
    // A deviation exactly at the threshold counts as reconstructed.
    CHECK(margin_loss(Vector{1.0}, Vector{0.75}, 0.25) == 0.0);
    CHECK(margin_loss(Vector{1.0}, Vector{0.7499}, 0.25) == 1.0);
    CHECK_THROWS_AS(margin_loss(x, Vector{1, 0}, 0.25), std::invalid_argument);
    CHECK_THROWS_AS(margin_loss(x, x, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(margin_loss(x, x, 0.0), std::invalid_argument);
}

TEST_CASE("margin_loss equals an entry-counting oracle and is monotone in gamma") {
    Rng rng(41);
    const std::vector<double> gammas{0.05, 0.1, 0.2, 0.25, 0.3, 0.4, 0.45, 0.49};
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t M = 1 + rng.index(40);
        const Vector x = random_binary(rng, M);
        const Vector xhat = random_vector(rng, M, 0.0, 1.0);
        double prev = -1.0;
        for (double g : gammas) {
            std::size_t count = 0;
            for (std::size_t j = 0; j < M; ++j) count += std::abs(x[j] - xhat[j]) > 0.5 - g ? 1 : 0;
            const double loss = margin_loss(x, xhat, g);
            CHECK(loss == static_cast<double>(count) / static_cast<double>(M));
            CHECK(loss >= prev);
            prev = loss;
        }
    }
}

TEST_CASE("squared and L2 errors") {
    CHECK(se_loss(Vector{1, 0}, Vector{0, 1}) == 2.0);
    CHECK(l2_error(Vector{1, 0}, Vector{0, 1}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(se_loss(Vector{1, 0, 1}, Vector{1, 0, 1}) == 0.0);
}

TEST_CASE("squared error never exceeds R(margin loss, gamma)") {
    Rng rng(42);
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t M = 1 + rng.index(64);
        const Vector x = random_binary(rng, M);
        const Vector xhat = random_vector(rng, M, 0.0, 1.0);
        for (int k = 1; k <= 10; ++k) {
            const double g = 0.049 * k;
            if (se_loss(x, xhat) > r_to_se_bound(margin_loss(x, xhat, g), g, M)) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("dataset-level metrics") {
    SUBCASE("identity reconstruction") {
        Rng rng(43);
        const Dataset d = random_dataset(rng, 50, 6);
        const NetworkParams id = identity_autoencoder(6);
        CHECK(empirical_margin_loss(id, d, 0.45) == 0.0);
        CHECK(mu_hat(id, d) == 0.0);
        const ReconMetrics m = reconstruction_metrics(id, d, MarginConfig{});
        CHECK(m.se_loss_mean == 0.0);
        CHECK(g_epsilon(id, d, 1e-9, 0.0).fraction == 1.0);
    }
    SUBCASE("constant one-half output misses every entry at gamma 0.45") {
        Rng rng(44);
        const Dataset d = random_dataset(rng, 30, 5);
        CHECK(empirical_margin_loss(constant_half(5), d, 0.45) == 1.0);
        // |x - 1/2| = 1/2 exactly, which is not above the gamma = 0 threshold
        // limit, but every gamma in (0, 1/2) has a smaller threshold.
        CHECK(empirical_margin_loss(constant_half(5), d, 1e-9) == 1.0);
    }
    SUBCASE("two samples average their losses") {
        const Dataset d(Matrix::from_rows({{1, 1, 1, 1}, {0, 0, 0, 0}}));
        // One identity-like layer pair that zeroes the last coordinate.
        Matrix enc = Matrix::identity(4);
        enc(3, 3) = 0.0;
        const NetworkParams f({{enc.select_rows(std::vector<std::size_t>{0, 1, 2}), Activation::identity, {}},
                               {Matrix::identity(4).select_rows(std::vector<std::size_t>{0, 1, 2}).transposed(),
                                Activation::identity, {}}},
                              0);
        // Sample 1 loses its last entry (1/4), sample 2 is exact (0).
        CHECK(empirical_margin_loss(f, d, 0.45) == doctest::Approx(0.125));
        CHECK(mu_hat(f, d) == doctest::Approx(0.5));
    }
}

TEST_CASE("reconstruction_metrics agrees with a second pass and any thread count") {
    Rng rng(45);
    const Dataset d = random_dataset(rng, 400, 10);
    const NetworkParams f = random_net(rng, {10, 6, 3, 6, 10}, Activation::sigmoid, 0.8);
    const MarginConfig mc;
    set_max_threads(1);
    const ReconMetrics a = reconstruction_metrics(f, d, mc);
    set_max_threads(4);
    const ReconMetrics b = reconstruction_metrics(f, d, mc);
    set_max_threads(1);
    CHECK(a.mu_hat == b.mu_hat);
    CHECK(a.per_sample_l2 == b.per_sample_l2);

    double mu = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Vector x(d.samples().row(i).begin(), d.samples().row(i).end());
        const Vector y = naive_forward(f, x);
        double se = 0.0;
        std::size_t miss = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            se += (x[j] - y[j]) * (x[j] - y[j]);
            miss += std::abs(x[j] - y[j]) > 0.5 - mc.gamma1 ? 1 : 0;
        }
        mu += std::sqrt(se);
        l1 += static_cast<double>(miss) / static_cast<double>(x.size());
    }
    CHECK(a.mu_hat == doctest::Approx(mu / 400.0).epsilon(1e-12));
    CHECK(a.margin_loss_g1 == doctest::Approx(l1 / 400.0).epsilon(1e-12));
    CHECK(mu_hat(f, d) == doctest::Approx(a.mu_hat).epsilon(1e-14));
}

TEST_CASE("G_epsilon membership") {
    const std::vector<double> l2{0.1, 0.5, 1.0, 2.0};
    CHECK(g_epsilon(l2, std::numeric_limits<double>::max(), 0.5).fraction == 1.0);
    const GEpsilon g = g_epsilon(l2, 0.5, 0.5);
    CHECK(g.mask == std::vector<bool>{true, true, false, false});
    CHECK(g.fraction == 0.5);
    CHECK_THROWS_AS(g_epsilon(l2, 0.0, 0.5), std::invalid_argument);

    // Markov on the empirical distribution, with mu_ref = its mean.
    Rng rng(46);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng.index(300));
        for (double& x : v) x = std::pow(rng.uniform(), 3.0) * 5.0;
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(v.size());
        for (double eps : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0})
            CHECK(1.0 - g_epsilon(v, eps, mu).fraction <= markov_geps_bound(mu, eps));
    }
}

TEST_CASE("margin config validation") {
    CHECK_NOTHROW(MarginConfig{}.validate());
    CHECK_THROWS_AS((MarginConfig{0.49, 0.45}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((MarginConfig{0.0, 0.45}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((MarginConfig{0.3, 0.5}.validate()), std::invalid_argument);
}
