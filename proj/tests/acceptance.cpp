// Acceptance gate: runs every headline criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aebound/bounds.hpp"
#include "aebound/experiment.hpp"
#include "aebound/metrics.hpp"
#include "aebound/norms.hpp"
#include "aebound/parallel.hpp"
#include "aebound/report.hpp"
#include "support.hpp"

using namespace aebound;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig load_config(const std::string& name, const fs::path& out) {
    ExperimentConfig cfg = config_from_json(read_text(fs::path(AEBOUND_SOURCE_DIR) / "configs" / name));
    cfg.output_dir = out;
    cfg.validate();
    return cfg;
}

struct PipelineRun {
    ExperimentConfig cfg;
    std::vector<FractionBounds> bounds;
    std::vector<GepsRow> geps;
    GeometryResult geometry;
    SSLSummary ssl;
    double train_seconds = 0.0;
    double geometry_seconds = 0.0;
    double ssl_seconds = 0.0;
    double total_seconds = 0.0;
};

PipelineRun run_pipeline(const ExperimentConfig& cfg, bool with_geometry) {
    PipelineRun r{cfg};
    const auto t0 = Clock::now();
    cmd_gen_data(cfg);
    auto t = Clock::now();
    cmd_train(cfg);
    r.train_seconds = seconds_since(t);
    r.bounds = cmd_bounds(cfg);
    if (with_geometry) {
        t = Clock::now();
        r.geometry = cmd_geometry(cfg);
        r.geometry_seconds = seconds_since(t);
    }
    r.geps = cmd_geps(cfg);
    t = Clock::now();
    r.ssl = cmd_ssl(cfg);
    r.ssl_seconds = seconds_since(t);
    if (with_geometry) cmd_report(cfg.output_dir);
    r.total_seconds = seconds_since(t0);
    return r;
}

void improvement_factor_criterion() {
    const double f30 = improvement_factor(60000, 784, 30);
    const double f50 = improvement_factor(60000, 784, 50);
    report("improvement-factor", std::abs(f30 - 1.22) <= 0.01 && std::abs(f50 - 1.12) <= 0.01,
           fmt("N_b=30 -> %.4f (1.22 +- 0.01), N_b=50 -> %.4f (1.12 +- 0.01)", f30, f50));
}

void conversion_lemma_criterion() {
    const auto t0 = Clock::now();
    Rng rng(20240601);
    std::size_t violations = 0, checks = 0;
    for (int pair = 0; pair < 10000; ++pair) {
        const std::size_t M = 1 + rng.index(100);
        const Vector x = random_binary(rng, M);
        const Vector xhat = random_vector(rng, M, 0.0, 1.0);
        const double se = se_loss(x, xhat);
        for (int k = 1; k <= 10; ++k) {
            const double gamma = 0.0499 * k;
            ++checks;
            if (se > r_to_se_bound(margin_loss(x, xhat, gamma), gamma, M)) ++violations;
        }
    }
    const double secs = seconds_since(t0);
    report("conversion-lemma", violations == 0 && secs < 10.0,
           fmt("%zu violations over %zu (pair, gamma) checks in %.2f s", violations, checks, secs));
}

void gradient_criterion() {
    const auto t0 = Clock::now();
    Rng rng(777);
    int nets = 0;
    std::size_t entries = 0, max_params = 0;
    double worst = 0.0;
    while (nets < 50) {
        const std::size_t M = 4 + rng.index(5);
        const std::size_t h = 2 + rng.index(5);
        const std::size_t b = 1 + rng.index(std::min(h, M) - 1);
        const bool bias = nets % 4 == 3;
        const SurrogateLoss loss = nets % 2 == 0 ? SurrogateLoss::bce : SurrogateLoss::mse;
        const NetworkParams p = random_net(rng, {M, h, b, h, M}, Activation::sigmoid, 0.8, bias);
        std::size_t params = 0;
        for (const Layer& l : p.layers()) params += l.weights.size() + l.bias.size();
        if (params > 200) continue;
        const Matrix batch = batch_of(rng, 4, M, true);
        bool near_kink = false;
        for (std::size_t i = 0; i < batch.rows(); ++i)
            near_kink = near_kink || relu_kink_distance(p, Vector(batch.row(i).begin(), batch.row(i).end())) < 1e-3;
        if (near_kink) continue;
        ++nets;
        max_params = std::max(max_params, params);
        const Gradients g = gradient(p, batch, loss);
        const Gradients fd = finite_differences(p, batch, loss, 1e-5);
        for (std::size_t i = 0; i < g.weights.size(); ++i) {
            for (std::size_t k = 0; k < g.weights[i].size(); ++k, ++entries)
                worst = std::max(worst, rel_diff(g.weights[i].values()[k], fd.weights[i].values()[k], 1e-5));
            for (std::size_t k = 0; k < g.biases[i].size(); ++k, ++entries)
                worst = std::max(worst, rel_diff(g.biases[i][k], fd.biases[i][k], 1e-5));
        }
    }
    const double secs = seconds_since(t0);
    report("gradient-finite-differences", worst < 1e-4 && secs < 30.0,
           fmt("50 nets (<= %zu params), %zu entries, max relative error %.3g (< 1e-4) in %.2f s", max_params,
               entries, worst, secs));
}

void spectral_criterion() {
    const auto t0 = Clock::now();
    Rng rng(4242);
    double worst = 0.0;
    std::size_t unconverged = 0;
    for (int i = 0; i < 100; ++i) {
        const Matrix w = random_matrix(rng, 1 + rng.index(64), 1 + rng.index(64));
        const SpectralNorm s = spectral_norm(w);
        if (!s.converged) ++unconverged;
        worst = std::max(worst, rel_diff(s.value, svd_spectral_norm(w)));
    }
    const double secs = seconds_since(t0);
    report("spectral-norm-oracle", worst < 1e-6 && secs < 10.0,
           fmt("100 matrices up to 64x64, max relative error vs SVD %.3g (< 1e-6), %zu unconverged, %.2f s", worst,
               unconverged, secs));
}

void normalization_criterion() {
    Rng rng(31337);
    double worst_out = 0.0, worst_c = 0.0;
    for (int n = 0; n < 20; ++n) {
        const std::size_t M = 6 + rng.index(10);
        const NetworkParams p = random_net(rng, {M, M - 1, 2 + rng.index(3), M - 1, M}, Activation::sigmoid,
                                           0.3 + rng.uniform(0.0, 1.5));
        const NetworkParams q = normalize_weights(p);
        for (int s = 0; s < 20; ++s) {
            const Vector x = random_vector(rng, M);
            const Vector a = forward(p, x), b = forward(q, x);
            for (std::size_t j = 0; j < M; ++j) worst_out = std::max(worst_out, std::abs(a[j] - b[j]));
        }
        worst_c = std::max(worst_c, rel_diff(complexity_term(p, 1.5), complexity_term(q, 1.5)));
    }
    report("normalization-invariance", worst_out <= 1e-6 && worst_c <= 1e-8,
           fmt("20 relu nets: max output change %.3g (<= 1e-6), max complexity change %.3g (<= 1e-8)", worst_out,
               worst_c));
}

void geometry_criterion(const PipelineRun& run) {
    const GeometryResult& g = run.geometry;
    const bool pass = g.audit.pairs_checked > 0 && g.audit.decoded_violations == 0 &&
                      g.audit.encoded_violations == 0 && run.geometry_seconds < 120.0;
    report("geometry-audit", pass,
           fmt("%zu G_eps inter-cluster pairs (%zu of %zu points in G_eps, mu=%.4f, eps=%.4f, C_upper=%.4f): "
               "%zu decoded and %zu encoded violations, min slack %.4g / %.4g, %.1f s",
               g.audit.pairs_checked, g.geps_points, g.points, g.mu, g.epsilon, g.lipschitz_upper,
               g.audit.decoded_violations, g.audit.encoded_violations, g.audit.min_slack,
               g.audit.min_encoded_slack, run.geometry_seconds));
}

void bound_trend_criterion(const PipelineRun& run) {
    bool decreasing = true;
    double max_increase = 0.0;
    std::string series;
    for (std::size_t i = 0; i < run.bounds.size(); ++i) {
        const BoundReport& r = run.bounds[i].report;
        if (i > 0 && !(r.delta_term_normalized < run.bounds[i - 1].report.delta_term_normalized)) decreasing = false;
        for (std::size_t k = 0; k < i; ++k)
            max_increase = std::max(max_increase, r.test_margin_loss_g1 - run.bounds[k].report.test_margin_loss_g1);
        series += fmt("%s m=%zu:%.4f/%.4f", i ? "," : "", r.m, r.delta_term_normalized, r.test_margin_loss_g1);
    }
    report("bound-vs-sample-size", decreasing && max_increase <= 0.05 && run.total_seconds < 900.0,
           fmt("synthetic family (no MNIST files); normalized bound strictly decreasing: %s; max test margin "
               "loss increase %.4f (<= 0.05); pipeline %.1f s",
               decreasing ? "yes" : "no", max_increase, run.total_seconds) +
               "; [m:normalized/test_loss] " + series);
}

void markov_criterion(const std::vector<const PipelineRun*>& runs) {
    std::size_t violations = 0, checks = 0, models = 0;
    for (const PipelineRun* run : runs) {
        models += run->bounds.size();
        for (const GepsRow& g : run->geps) {
            ++checks;
            if (1.0 - g.fraction_in > g.mu_hat / g.epsilon) ++violations;
        }
    }
    report("markov-exactness", violations == 0 && checks > 0,
           fmt("%zu violations over %zu (model, epsilon) checks on %zu trained models", violations, checks, models));
}

void geps_criterion(const PipelineRun& run) {
    const double last = run.cfg.sample_fractions.back();
    double at_mu = -1.0, prev = -1.0;
    bool nondecreasing = true;
    std::string curve;
    for (const GepsRow& g : run.geps) {
        if (g.sample_frac != last) continue;
        if (g.fraction_in < prev) nondecreasing = false;
        prev = g.fraction_in;
        if (g.eps_over_mu == 1.0) at_mu = g.fraction_in;
        curve += fmt("%s%.2f:%.4f", curve.empty() ? "" : ",", g.eps_over_mu, g.fraction_in);
    }
    report("geps-coverage", at_mu >= 0.8 && nondecreasing,
           fmt("fraction in G_eps at eps=mu_hat %.4f (>= 0.8), curve non-decreasing: %s; [eps/mu:fraction] ", at_mu,
               nondecreasing ? "yes" : "no") +
               curve);
}

void ssl_criterion(const PipelineRun& run, const PipelineRun& exact) {
    const SSLSummary& s = run.ssl;
    double exact_max = 0.0;
    for (const SSLResult& r : exact.ssl.runs) exact_max = std::max(exact_max, r.ssl_error);
    const bool pass = s.ssl_error_mean < s.supervised_error_mean && exact_max == 0.0 && !exact.ssl.runs.empty() &&
                      run.ssl_seconds + exact.ssl_seconds < 120.0;
    report("ssl-benefit", pass,
           fmt("K=4 M=20 m=%zu n=%zu, %zu seeds: mean ssl_error %.4f vs supervised %.4f; flips=0 max ssl_error "
               "%.4f over %zu seeds; ssl stages %.1f s",
               s.runs.front().m, s.runs.front().n, s.runs.size(), s.ssl_error_mean, s.supervised_error_mean,
               exact_max, exact.ssl.runs.size(), run.ssl_seconds + exact.ssl_seconds));
}

void mu_ordering_criterion(const std::vector<const PipelineRun*>& runs) {
    std::size_t violations = 0, models = 0;
    double loose_w = 0.0, loose_s = 0.0;
    for (const PipelineRun* run : runs)
        for (const FractionBounds& fb : run->bounds) {
            ++models;
            const BoundReport& r = fb.report;
            if (!(r.mu_hat <= r.mu_bound_worst)) ++violations;
            loose_w += r.mu_bound_worst / r.mu_hat;
            loose_s += r.mu_bound_symmetric / r.mu_hat;
        }
    report("mu-bound-ordering", violations == 0 && models > 0,
           fmt("%zu violations over %zu trained models; mean looseness %.2fx worst-case, %.2fx symmetric (logged only)",
               violations, models, loose_w / models, loose_s / models));
}

}  // namespace

int main() {
    set_max_threads(0);
    const fs::path root = AEBOUND_ACCEPTANCE_DIR;
    fs::remove_all(root);

    improvement_factor_criterion();
    conversion_lemma_criterion();
    gradient_criterion();
    spectral_criterion();
    normalization_criterion();

    const PipelineRun synthetic = run_pipeline(load_config("synthetic.json", root / "synthetic"), true);
    const PipelineRun ssl = run_pipeline(load_config("ssl_k4_m20.json", root / "ssl_k4_m20"), false);
    ExperimentConfig exact_cfg = load_config("ssl_k4_m20.json", root / "ssl_k4_m20_exact");
    exact_cfg.dataset.synthetic.flips = 0;
    const PipelineRun exact = run_pipeline(exact_cfg, false);

    geometry_criterion(synthetic);
    bound_trend_criterion(synthetic);
    markov_criterion({&synthetic, &ssl, &exact});
    geps_criterion(synthetic);
    ssl_criterion(ssl, exact);
    mu_ordering_criterion({&synthetic, &ssl, &exact});

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", failures);
    return failures == 0 ? 0 : 1;
}
