#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "aebound/data.hpp"
#include "aebound/matrix.hpp"
#include "aebound/network.hpp"

namespace aebound {

/// Connected components of the graph joining points closer than `cutoff`.
/// Component ids are 0, 1, ... in order of each component's lowest point
/// index.
std::vector<int> single_linkage_clusters(const Matrix& points, double cutoff);

/// Points with known labels, in the space the classifiers operate in.
struct LabeledPoints {
    Matrix points;
    std::vector<int> labels;
};

/// Label of the nearest labeled point; equidistant points with different
/// labels resolve to the smallest label.
int nearest_label(const LabeledPoints& labeled, std::span<const double> z);

/// Cluster-then-label classifier. Each cluster takes the majority label of
/// its labeled members, or the label nearest its medoid when it has none.
/// A query joins the cluster of its nearest clustered point when that point
/// lies within the cutoff, and otherwise falls back to nearest_label.
class ClusterLabelClassifier {
public:
    ClusterLabelClassifier(Matrix clustered_points, std::vector<int> cluster_ids, double cutoff,
                           LabeledPoints labeled, std::map<int, int> cluster_labels, std::size_t unmatched);

    int predict(std::span<const double> z) const;
    int cluster_label(int cluster) const { return cluster_labels_.at(cluster); }
    std::size_t num_clusters() const { return cluster_labels_.size(); }
    /// Clusters labeled through the medoid fallback.
    std::size_t num_unmatched() const { return unmatched_; }

private:
    Matrix points_;
    std::vector<int> cluster_ids_;
    double cutoff_;
    LabeledPoints labeled_;
    std::map<int, int> cluster_labels_;
    std::size_t unmatched_ = 0;
};

/// Builds the cluster-then-label classifier. `labels[i]` is set for the
/// labeled points among `points`. Majority-vote ties go to the smallest
/// label.
ClusterLabelClassifier label_clusters(const Matrix& points, std::span<const int> cluster_ids, double cutoff,
                                      std::span<const std::optional<int>> labels);

/// k-nearest-neighbour vote; ties in the vote go to the smallest label, and
/// among neighbours at equal distance smaller labels are taken first.
class KnnClassifier {
public:
    KnnClassifier(LabeledPoints labeled, std::size_t k);
    int predict(std::span<const double> z) const;

private:
    LabeledPoints labeled_;
    std::size_t k_;
};

struct SSLConfig {
    /// Linkage cutoff; unset means half the measured encoded margin.
    std::optional<double> cutoff;
    std::size_t k_baseline = 1;
    std::vector<std::uint64_t> seeds{1};

    void validate() const;
};

struct SSLResult {
    std::uint64_t seed = 0;
    double ssl_error = 0.0;
    double supervised_error = 0.0;
    std::size_t n_clusters_found = 0;
    std::size_t n_unmatched_clusters = 0;
    std::size_t m = 0;
    std::size_t n = 0;
    double cutoff = 0.0;
    /// Every clustered point ended up alone.
    bool degenerate = false;
};

struct SSLSummary {
    std::vector<SSLResult> runs;
    double ssl_error_mean = 0.0;
    double ssl_error_std = 0.0;
    double supervised_error_mean = 0.0;
    double supervised_error_std = 0.0;
};

/// One run on fixed splits. `labeled`, `unlabeled` and `test` index into
/// `data`, which must carry labels.
SSLResult ssl_run(const NetworkParams& encoder, const Dataset& data, const Splits& splits, const SSLConfig& cfg,
                  std::uint64_t seed);

/// Draws a split per seed from `spec` (its seed is ignored) and aggregates.
SSLSummary ssl_compare(const NetworkParams& encoder, const Dataset& data, const SplitSpec& spec,
                       const SSLConfig& cfg);

/// Identity-encoder network for running the pipeline in input space.
NetworkParams identity_autoencoder(std::size_t dim);

}  // namespace aebound
