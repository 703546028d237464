#include "aebound/bounds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aebound/errors.hpp"

namespace aebound {

namespace {

void require_r_gamma(double r, double gamma) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("r must lie in [0, 1], got " + std::to_string(r));
    if (!(gamma > 0.0 && gamma < 0.5))
        throw std::invalid_argument("gamma must lie in (0, 1/2), got " + std::to_string(gamma));
}

}  // namespace

void BoundInputs::validate() const {
    margins.validate();
    if (!(B > 0.0) || !std::isfinite(B)) throw std::invalid_argument("B must be positive");
    if (M > 0 && B > std::sqrt(static_cast<double>(M)) * (1.0 + 1e-12))
        throw std::invalid_argument("B exceeds sqrt(M) for binary inputs");
    if (m < 2) throw std::invalid_argument("sample size m must be at least 2");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (d == 0 || h == 0) throw std::invalid_argument("depth and width must be positive");
}

double complexity_term(std::span<const double> spectral, std::span<const double> frobenius, double B,
                       std::size_t d, std::size_t h) {
    if (spectral.size() != d || frobenius.size() != d)
        throw std::invalid_argument("complexity_term: need one norm pair per layer");
    const double dh = static_cast<double>(d) * static_cast<double>(h);
    if (!(dh > 1.0)) throw std::invalid_argument("complexity_term: ln(dh) must be positive");
    double prod = 1.0;
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        if (!(spectral[i] > 0.0))
            throw std::invalid_argument("complexity_term: layer " + std::to_string(i) + " has zero spectral norm");
        const double s2 = spectral[i] * spectral[i];
        prod *= s2;
        ratio_sum += frobenius[i] * frobenius[i] / s2;
    }
    const double dd = static_cast<double>(d);
    return B * B * dd * dd * static_cast<double>(h) * std::log(dh) * prod * ratio_sum;
}

double complexity_term(const NetworkParams& params, double B) {
    std::vector<double> spectral, frobenius;
    for (const Layer& l : params.layers()) {
        spectral.push_back(spectral_norm(l.weights).value);
        frobenius.push_back(frobenius_norm(l.weights));
    }
    return complexity_term(spectral, frobenius, B, params.depth(), params.max_width());
}

GeneralizationGap generalization_bound(double complexity, const BoundInputs& inputs, double margin_loss_hat_g2) {
    inputs.validate();
    if (!(margin_loss_hat_g2 >= 0.0 && margin_loss_hat_g2 <= 1.0))
        throw std::invalid_argument("margin loss must lie in [0, 1]");
    if (!(complexity > 0.0) || !std::isfinite(complexity))
        throw NumericError("complexity term must be positive and finite");
    const double gap = inputs.margins.gamma2 - inputs.margins.gamma1;
    const double m = static_cast<double>(inputs.m);
    const double log_term = std::log(static_cast<double>(inputs.d) * m / inputs.delta);
    GeneralizationGap out;
    out.delta_term = std::sqrt((complexity + log_term) / (gap * gap * m));
    out.margin_bound_g1 = margin_loss_hat_g2 + out.delta_term;
    out.delta_term_normalized = out.delta_term / std::sqrt(complexity);
    return out;
}

GeneralizationGap generalization_bound(const NetworkParams& params, const BoundInputs& inputs,
                                       double margin_loss_hat_g2) {
    return generalization_bound(complexity_term(params, inputs.B), inputs, margin_loss_hat_g2);
}

double r_to_se_bound(double r, double gamma, std::size_t M) {
    require_r_gamma(r, gamma);
    const double q = (0.5 - gamma) * (0.5 - gamma);
    const double dm = static_cast<double>(M);
    return r * dm + q * (1.0 - r) * dm;
}

double mu_bound_worst(double r, double gamma, std::size_t M) { return std::sqrt(r_to_se_bound(r, gamma, M)); }

double mu_bound_symmetric(double r, double gamma, std::size_t M) {
    require_r_gamma(r, gamma);
    const double q = (0.5 - gamma) * (0.5 - gamma);
    const double dm = static_cast<double>(M);
    return std::sqrt((q + 1.0) / 2.0 * r * dm + q / 2.0 * (1.0 - r) * dm);
}

double markov_geps_bound(double mu, double epsilon) {
    if (!(mu >= 0.0)) throw std::invalid_argument("mu must be non-negative");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    return std::min(1.0, mu / epsilon);
}

EtaPrime eta_prime_theoretical(double eta, double mu, double epsilon, double C) {
    if (!(C > 0.0)) throw std::invalid_argument("decoder Lipschitz constant must be positive");
    EtaPrime out;
    out.value = (eta - 2.0 * (mu + epsilon)) / C;
    out.vacuous = !(out.value > 0.0);
    return out;
}

double ssl_term(std::size_t m, std::size_t N) {
    if (m < 3) throw std::invalid_argument("ssl_term: m must be at least 3");
    if (N == 0) throw std::invalid_argument("ssl_term: dimension must be positive");
    const double lm = std::log(static_cast<double>(m));
    const double base = lm * lm / static_cast<double>(m);
    if (!(base < 1.0))
        throw std::invalid_argument("ssl_term: (ln m)^2 / m >= 1, m=" + std::to_string(m) +
                                    " is outside the bound's regime");
    return std::pow(base, 1.0 / static_cast<double>(N));
}

double improvement_factor(std::size_t m, std::size_t N, std::size_t N_b) {
    if (N_b == 0 || N_b > N) throw std::invalid_argument("improvement_factor: need 0 < N_b <= N");
    return ssl_term(m, N) / ssl_term(m, N_b);
}

BoundReport compute_bound_report(const NetworkParams& params, const BoundInputs& inputs,
                                 const ReconMetrics& train_metrics, const ReconMetrics& test_metrics) {
    inputs.validate();
    BoundReport r;
    for (const Layer& l : params.layers()) {
        const SpectralNorm s = spectral_norm(l.weights);
        r.spectral_norms.push_back(s.value);
        r.spectral_converged = r.spectral_converged && s.converged;
        r.frobenius_norms.push_back(frobenius_norm(l.weights));
    }
    if (!r.spectral_converged) r.notes.push_back("power iteration unconverged for at least one layer");
    r.B = inputs.B;
    r.m = inputs.m;
    r.d = inputs.d;
    r.h = inputs.h;
    r.M = inputs.M;
    r.N_b = params.code_dim();
    r.delta = inputs.delta;
    r.gamma1 = inputs.margins.gamma1;
    r.gamma2 = inputs.margins.gamma2;
    r.complexity = complexity_term(r.spectral_norms, r.frobenius_norms, inputs.B, inputs.d, inputs.h);
    r.margin_loss_hat_g2 = train_metrics.margin_loss_g2;
    const GeneralizationGap gap = generalization_bound(r.complexity, inputs, r.margin_loss_hat_g2);
    r.delta_term = gap.delta_term;
    r.delta_term_normalized = gap.delta_term_normalized;
    r.margin_bound_g1 = gap.margin_bound_g1;
    r.test_margin_loss_g1 = test_metrics.margin_loss_g1;
    r.mu_hat = test_metrics.mu_hat;
    r.R_worst = r_to_se_bound(test_metrics.margin_loss_g1, inputs.margins.gamma1, inputs.M);
    r.mu_bound_worst = mu_bound_worst(test_metrics.margin_loss_g1, inputs.margins.gamma1, inputs.M);
    r.mu_bound_symmetric = mu_bound_symmetric(test_metrics.margin_loss_g1, inputs.margins.gamma1, inputs.M);
    r.outside_theorem_assumptions = params.has_bias();
    if (r.outside_theorem_assumptions) r.notes.push_back("outside theorem assumptions: network has biases");
    return r;
}

}  // namespace aebound
