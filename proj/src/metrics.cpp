#include "aebound/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aebound/parallel.hpp"

namespace aebound {

namespace {

void require_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 0.5))
        throw std::invalid_argument("gamma must lie in (0, 1/2), got " + std::to_string(gamma));
}

void require_same_length(std::span<const double> x, std::span<const double> xhat) {
    if (x.size() != xhat.size())
        throw std::invalid_argument("reconstruction length " + std::to_string(xhat.size()) +
                                    " differs from input length " + std::to_string(x.size()));
}

void require_model_fits(const NetworkParams& f, const Dataset& data) {
    if (f.input_dim() != data.dim())
        throw std::invalid_argument("model expects dimension " + std::to_string(f.input_dim()) +
                                    ", dataset has " + std::to_string(data.dim()));
}

}  // namespace

void MarginConfig::validate() const {
    if (!(gamma1 > 0.0 && gamma1 < gamma2 && gamma2 < 0.5))
        throw std::invalid_argument("margins must satisfy 0 < gamma1 < gamma2 < 1/2");
}

double margin_loss(std::span<const double> x, std::span<const double> xhat, double gamma) {
    require_gamma(gamma);
    require_same_length(x, xhat);
    if (x.empty()) throw std::invalid_argument("margin_loss: empty input");
    const double threshold = 0.5 - gamma;
    std::size_t missed = 0;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (std::abs(x[j] - xhat[j]) > threshold) ++missed;
    return static_cast<double>(missed) / static_cast<double>(x.size());
}

double se_loss(std::span<const double> x, std::span<const double> xhat) {
    require_same_length(x, xhat);
    return squared_distance(x, xhat);
}

double l2_error(std::span<const double> x, std::span<const double> xhat) { return std::sqrt(se_loss(x, xhat)); }

ReconMetrics reconstruction_metrics(const NetworkParams& f, const Dataset& data, const MarginConfig& margins) {
    margins.validate();
    require_model_fits(f, data);
    const std::size_t n = data.size();
    ReconMetrics out;
    out.per_sample_l2.resize(n);
    out.per_sample_margin_g1.resize(n);
    out.per_sample_margin_g2.resize(n);
    std::vector<double> se(n);
    parallel_for(n, [&](std::size_t i) {
        const auto x = data.samples().row(i);
        const Vector xhat = forward(f, x);
        se[i] = se_loss(x, xhat);
        out.per_sample_l2[i] = std::sqrt(se[i]);
        out.per_sample_margin_g1[i] = margin_loss(x, xhat, margins.gamma1);
        out.per_sample_margin_g2[i] = margin_loss(x, xhat, margins.gamma2);
    });
    // Sequential sums keep results independent of the worker count.
    for (std::size_t i = 0; i < n; ++i) {
        out.margin_loss_g1 += out.per_sample_margin_g1[i];
        out.margin_loss_g2 += out.per_sample_margin_g2[i];
        out.se_loss_mean += se[i];
        out.mu_hat += out.per_sample_l2[i];
    }
    const double dn = static_cast<double>(n);
    out.margin_loss_g1 /= dn;
    out.margin_loss_g2 /= dn;
    out.se_loss_mean /= dn;
    out.mu_hat /= dn;
    return out;
}

double empirical_margin_loss(const NetworkParams& f, const Dataset& data, double gamma) {
    require_gamma(gamma);
    require_model_fits(f, data);
    std::vector<double> per(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const auto x = data.samples().row(i);
        per[i] = margin_loss(x, forward(f, x), gamma);
    });
    double total = 0.0;
    for (double v : per) total += v;
    return total / static_cast<double>(data.size());
}

double mu_hat(const NetworkParams& f, const Dataset& data) {
    require_model_fits(f, data);
    std::vector<double> per(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const auto x = data.samples().row(i);
        per[i] = l2_error(x, forward(f, x));
    });
    double total = 0.0;
    for (double v : per) total += v;
    return total / static_cast<double>(data.size());
}

GEpsilon g_epsilon(std::span<const double> per_sample_l2, double epsilon, double mu_ref) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("g_epsilon: epsilon must be positive");
    if (!(mu_ref >= 0.0)) throw std::invalid_argument("g_epsilon: mu_ref must be non-negative");
    if (per_sample_l2.empty()) throw std::invalid_argument("g_epsilon: no samples");
    GEpsilon out;
    out.mask.resize(per_sample_l2.size());
    std::size_t inside = 0;
    for (std::size_t i = 0; i < per_sample_l2.size(); ++i) {
        out.mask[i] = per_sample_l2[i] - mu_ref < epsilon;
        inside += out.mask[i] ? 1 : 0;
    }
    out.fraction = static_cast<double>(inside) / static_cast<double>(per_sample_l2.size());
    return out;
}

GEpsilon g_epsilon(const NetworkParams& f, const Dataset& data, double epsilon, double mu_ref) {
    require_model_fits(f, data);
    std::vector<double> per(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        const auto x = data.samples().row(i);
        per[i] = l2_error(x, forward(f, x));
    });
    return g_epsilon(per, epsilon, mu_ref);
}

}  // namespace aebound
