#pragma once

#include <span>
#include <vector>

#include "aebound/data.hpp"
#include "aebound/network.hpp"

namespace aebound {

/// Margin pair for the generalization bound, 0 < gamma1 < gamma2 < 1/2.
struct MarginConfig {
    double gamma1 = 0.45;
    double gamma2 = 0.49;

    void validate() const;
};

/// Fraction of entries with |x[j] - xhat[j]| > 1/2 - gamma. An entry exactly
/// at the threshold counts as reconstructed.
double margin_loss(std::span<const double> x, std::span<const double> xhat, double gamma);

/// Squared L2 reconstruction error.
double se_loss(std::span<const double> x, std::span<const double> xhat);
double l2_error(std::span<const double> x, std::span<const double> xhat);

/// Reconstruction quality of a model on a dataset.
struct ReconMetrics {
    double margin_loss_g1 = 0.0;
    double margin_loss_g2 = 0.0;
    double se_loss_mean = 0.0;
    double mu_hat = 0.0;
    std::vector<double> per_sample_l2;
    std::vector<double> per_sample_margin_g1;
    std::vector<double> per_sample_margin_g2;
};

ReconMetrics reconstruction_metrics(const NetworkParams& f, const Dataset& data, const MarginConfig& margins);

double empirical_margin_loss(const NetworkParams& f, const Dataset& data, double gamma);
double mu_hat(const NetworkParams& f, const Dataset& data);

struct GEpsilon {
    std::vector<bool> mask;
    double fraction = 0.0;
};

/// mask[i] is true iff l2_error(x_i, f(x_i)) - mu_ref < epsilon.
GEpsilon g_epsilon(std::span<const double> per_sample_l2, double epsilon, double mu_ref);
GEpsilon g_epsilon(const NetworkParams& f, const Dataset& data, double epsilon, double mu_ref);

}  // namespace aebound
