#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "aebound/metrics.hpp"
#include "aebound/network.hpp"
#include "aebound/norms.hpp"

namespace aebound {

// --- generalization bound -------------------------------------------------

/// Inputs of the norm-based margin bound.
struct BoundInputs {
    double B = 0.0;          ///< max input L2 norm
    std::size_t m = 0;       ///< training sample size
    double delta = 0.1;      ///< confidence parameter
    MarginConfig margins;
    std::size_t d = 0;       ///< depth
    std::size_t h = 0;       ///< max layer width
    std::size_t M = 0;       ///< input dimension

    void validate() const;
};

/// B^2 d^2 h ln(dh) prod_i ||W_i||_2^2 sum_i ||W_i||_F^2 / ||W_i||_2^2.
double complexity_term(const NetworkParams& params, double B);

/// Same term from precomputed per-layer norms.
double complexity_term(std::span<const double> spectral, std::span<const double> frobenius, double B,
                       std::size_t d, std::size_t h);

struct GeneralizationGap {
    double delta_term = 0.0;             ///< sqrt((C + ln(dm/delta)) / ((g2-g1)^2 m)), unit constant
    double margin_bound_g1 = 0.0;        ///< Lhat_g2 + delta_term
    double delta_term_normalized = 0.0;  ///< delta_term / sqrt(C)
};

GeneralizationGap generalization_bound(double complexity, const BoundInputs& inputs, double margin_loss_hat_g2);
GeneralizationGap generalization_bound(const NetworkParams& params, const BoundInputs& inputs,
                                       double margin_loss_hat_g2);

// --- reconstruction-error bounds ------------------------------------------

/// R(r, gamma) = r M + (1/2 - gamma)^2 (1 - r) M, a cap on the squared error
/// of a reconstruction whose gamma-margin loss is at most r.
double r_to_se_bound(double r, double gamma, std::size_t M);
double mu_bound_worst(double r, double gamma, std::size_t M);
/// Bound under errors spread symmetrically over each entry's possible range.
double mu_bound_symmetric(double r, double gamma, std::size_t M);

/// min(1, mu / epsilon): upper bound on the mass outside G_epsilon.
double markov_geps_bound(double mu, double epsilon);

// --- cluster margin at the code -------------------------------------------

struct EtaPrime {
    double value = 0.0;
    /// Non-positive value: the margin guarantee says nothing.
    bool vacuous = false;
};

/// (eta - 2 (mu + epsilon)) / C
EtaPrime eta_prime_theoretical(double eta, double mu, double epsilon, double C);

/// ((ln m)^2 / m)^(1/N)
double ssl_term(std::size_t m, std::size_t N);
/// ssl_term(m, N) / ssl_term(m, N_b)
double improvement_factor(std::size_t m, std::size_t N, std::size_t N_b);

// --- report ---------------------------------------------------------------

struct BoundReport {
    std::vector<double> spectral_norms;
    std::vector<double> frobenius_norms;
    bool spectral_converged = true;
    double B = 0.0;
    std::size_t m = 0;
    std::size_t d = 0;
    std::size_t h = 0;
    std::size_t M = 0;
    std::size_t N_b = 0;
    double delta = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double complexity = 0.0;
    double delta_term = 0.0;
    double delta_term_normalized = 0.0;
    double margin_loss_hat_g2 = 0.0;
    double margin_bound_g1 = 0.0;
    double test_margin_loss_g1 = 0.0;
    double mu_hat = 0.0;
    double R_worst = 0.0;
    double mu_bound_worst = 0.0;
    double mu_bound_symmetric = 0.0;
    double eta = 0.0;
    double eta_prime_empirical = 0.0;
    double eta_prime_theoretical = 0.0;
    bool eta_prime_vacuous = false;
    double epsilon = 0.0;
    double lipschitz_upper = 0.0;
    double lipschitz_empirical = 0.0;
    double ssl_term_input = 0.0;
    double ssl_term_code = 0.0;
    double improvement_factor = 0.0;
    /// Biased networks fall outside the bias-free form of the bound.
    bool outside_theorem_assumptions = false;
    std::vector<std::string> notes;
};

/// Fills the norm, complexity, gap and mu-bound fields. Margin losses and
/// mu_hat are taken from the given metrics; the mu bounds use the test
/// gamma1-margin loss, evaluated at gamma1.
BoundReport compute_bound_report(const NetworkParams& params, const BoundInputs& inputs,
                                 const ReconMetrics& train_metrics, const ReconMetrics& test_metrics);

}  // namespace aebound
