#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aebound/bounds.hpp"
#include "aebound/data.hpp"
#include "aebound/geometry.hpp"
#include "aebound/metrics.hpp"
#include "aebound/network.hpp"
#include "aebound/ssl.hpp"

namespace aebound {

struct SyntheticSource {
    std::size_t clusters = 8;
    std::size_t dim = 64;
    std::size_t flips = 2;
    std::optional<std::size_t> min_hamming;
};

struct IdxSource {
    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    std::filesystem::path test_images;
    std::filesystem::path test_labels;
    double binarize_threshold = kDefaultBinarizeThreshold;
};

struct DatasetConfig {
    enum class Kind { synthetic, idx } kind = Kind::synthetic;
    SyntheticSource synthetic;
    IdxSource idx;
    /// Training/test sizes. Synthetic data is generated to exactly these
    /// sizes; IDX sets are cut down to them (0 keeps the whole file).
    std::size_t train_size = 6000;
    std::size_t test_size = 2000;
};

struct GeometryConfig {
    /// epsilon = epsilon_over_mu * mu for the G_epsilon restriction and audit.
    double epsilon_over_mu = 1.0;
    /// Use the worst-case mu bound instead of the empirical mu_hat.
    bool mu_from_bound = false;
    /// Test points used for margins, Lipschitz probes and the audit.
    std::size_t max_points = 2000;
    std::size_t max_probe_pairs = kDefaultProbePairs;
    double perturbation_step = kDefaultPerturbationStep;
};

struct SSLExperimentConfig {
    std::optional<double> cutoff;
    std::size_t k_baseline = 1;
    std::size_t num_seeds = 20;
    std::size_t n_labeled = 4;
    std::size_t m_unlabeled = 2000;
    std::size_t n_test = 500;
};

struct ExperimentConfig {
    std::uint64_t seed = 7;
    DatasetConfig dataset;
    /// Layer widths, input first; the output width must equal the input.
    std::vector<std::size_t> dims{64, 32, 4, 32, 64};
    std::vector<Activation> activations{Activation::relu, Activation::identity, Activation::relu,
                                        Activation::sigmoid};
    TrainConfig train;
    MarginConfig margins;
    double delta = 0.1;
    std::vector<double> sample_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> epsilon_grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
    GeometryConfig geometry;
    SSLExperimentConfig ssl;
    std::filesystem::path output_dir = "out";

    std::vector<LayerSpec> architecture() const;
    /// Throws ConfigError.
    void validate() const;
};

/// Parses config JSON; absent fields keep their defaults. Throws ConfigError.
ExperimentConfig config_from_json(const std::string& text);
/// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const ExperimentConfig& cfg);

/// Applies "a.b.c=<json value>" to config JSON text; a value that is not
/// valid JSON is taken as a string.
std::string apply_override(const std::string& config_text, const std::string& assignment);

/// 16 hex digits of FNV-1a over the canonical JSON, output_dir excluded, so
/// the same experiment written to two places carries the same hash.
std::string config_hash(const ExperimentConfig& cfg);

/// Independent seed for a named stochastic stage.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t index = 0);

struct ExperimentData {
    Dataset train;
    Dataset test;
};

/// Output layout under output_dir.
struct OutputPaths {
    std::filesystem::path root;
    std::filesystem::path data_dir() const { return root / "data"; }
    std::filesystem::path models_dir() const { return root / "models"; }
    std::filesystem::path model_for_fraction(std::size_t i) const;
    std::filesystem::path final_model() const { return root / "model.json"; }
};

// Each command writes its files under cfg.output_dir and returns what it
// wrote. Commands after gen-data read the cached dataset; those after train
// read checkpoints (the final model unless `checkpoint` is given).

struct GenDataResult {
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t dim = 0;
    std::optional<double> guaranteed_margin;
};
GenDataResult cmd_gen_data(const ExperimentConfig& cfg);
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

struct TrainedModel {
    double sample_frac = 0.0;
    std::size_t m = 0;
    NetworkParams params;
    std::vector<double> loss_history;
};
std::vector<TrainedModel> cmd_train(const ExperimentConfig& cfg);

struct FractionBounds {
    double sample_frac = 0.0;
    BoundReport report;
    ReconMetrics test_metrics;
    std::vector<double> geps_fraction;  // one per epsilon_grid entry
};
std::vector<FractionBounds> cmd_bounds(const ExperimentConfig& cfg);

struct GeometryResult {
    std::size_t N = 0;
    std::size_t N_b = 0;
    std::size_t m = 0;
    std::size_t points = 0;
    std::size_t geps_points = 0;
    double mu = 0.0;
    double epsilon = 0.0;
    double eta_hat = 0.0;
    double eta_prime_hat = 0.0;      ///< encoded margin over G_epsilon members
    double eta_prime_hat_all = 0.0;  ///< encoded margin over every point
    EtaPrime eta_prime_theoretical;
    double lipschitz_upper = 0.0;
    double lipschitz_empirical = 0.0;
    AuditResult audit;
    std::size_t excluded_clusters = 0;
    double ssl_term_input = 0.0;
    double ssl_term_code = 0.0;
    double improvement_factor = 0.0;
};
GeometryResult cmd_geometry(const ExperimentConfig& cfg,
                            const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

struct GepsRow {
    double sample_frac = 0.0;
    double eps_over_mu = 0.0;
    double epsilon = 0.0;
    double mu_hat = 0.0;
    double fraction_in = 0.0;
    double markov_bound = 0.0;
};
/// Coverage curve for every trained model; `checkpoint` restricts it to one.
std::vector<GepsRow> cmd_geps(const ExperimentConfig& cfg,
                              const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

SSLSummary cmd_ssl(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

/// Merges the CSV outputs into summary.json and returns its text. Throws
/// DataError when a file or expected column is missing or when the files
/// come from different configs.
std::string cmd_report(const std::filesystem::path& output_dir);

/// Columns each CSV output must carry.
std::vector<std::string> expected_columns(const std::string& file, const std::vector<double>& epsilon_grid = {});

}  // namespace aebound
