#include "aebound/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

#include "aebound/geometry.hpp"

namespace aebound {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

int vote(const std::map<int, std::size_t>& counts) {
    int best = 0;
    std::size_t best_count = 0;
    // std::map iterates labels in ascending order, so ">" keeps the smallest.
    for (const auto& [label, count] : counts)
        if (count > best_count) {
            best = label;
            best_count = count;
        }
    return best;
}

double error_rate(std::span<const int> predicted, std::span<const int> truth) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<int> single_linkage_clusters(const Matrix& points, double cutoff) {
    if (points.empty()) throw std::invalid_argument("single_linkage_clusters: no points");
    if (!(cutoff > 0.0)) throw std::invalid_argument("single_linkage_clusters: cutoff must be positive");
    const std::size_t n = points.rows();
    DisjointSets sets(n);
    const double cutoff2 = cutoff * cutoff;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (squared_distance(points.row(i), points.row(j)) < cutoff2) sets.unite(i, j);

    std::vector<int> ids(n, -1);
    std::vector<int> root_id(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = sets.find(i);
        if (root_id[r] < 0) root_id[r] = next++;
        ids[i] = root_id[r];
    }
    return ids;
}

int nearest_label(const LabeledPoints& labeled, std::span<const double> z) {
    if (labeled.points.empty()) throw std::invalid_argument("nearest_label: no labeled points");
    double best = std::numeric_limits<double>::infinity();
    int label = 0;
    for (std::size_t i = 0; i < labeled.points.rows(); ++i) {
        const double d2 = squared_distance(labeled.points.row(i), z);
        if (d2 < best || (d2 == best && labeled.labels[i] < label)) {
            best = d2;
            label = labeled.labels[i];
        }
    }
    return label;
}

ClusterLabelClassifier::ClusterLabelClassifier(Matrix clustered_points, std::vector<int> cluster_ids, double cutoff,
                                               LabeledPoints labeled, std::map<int, int> cluster_labels,
                                               std::size_t unmatched)
    : points_(std::move(clustered_points)),
      cluster_ids_(std::move(cluster_ids)),
      cutoff_(cutoff),
      labeled_(std::move(labeled)),
      cluster_labels_(std::move(cluster_labels)),
      unmatched_(unmatched) {}

int ClusterLabelClassifier::predict(std::span<const double> z) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t nearest = 0;
    for (std::size_t i = 0; i < points_.rows(); ++i) {
        const double d2 = squared_distance(points_.row(i), z);
        if (d2 < best) {
            best = d2;
            nearest = i;
        }
    }
    if (best < cutoff_ * cutoff_) return cluster_labels_.at(cluster_ids_[nearest]);
    return nearest_label(labeled_, z);
}

ClusterLabelClassifier label_clusters(const Matrix& points, std::span<const int> cluster_ids, double cutoff,
                                      std::span<const std::optional<int>> labels) {
    if (cluster_ids.size() != points.rows() || labels.size() != points.rows())
        throw std::invalid_argument("label_clusters: need one cluster id and label slot per point");
    LabeledPoints labeled;
    std::vector<std::size_t> labeled_idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i]) {
            labeled_idx.push_back(i);
            labeled.labels.push_back(*labels[i]);
        }
    if (labeled_idx.empty()) throw std::invalid_argument("label_clusters: no labeled points");
    labeled.points = points.select_rows(labeled_idx);

    std::map<int, std::vector<std::size_t>> members;
    std::map<int, std::map<int, std::size_t>> counts;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        members[cluster_ids[i]].push_back(i);
        if (labels[i]) ++counts[cluster_ids[i]][*labels[i]];
    }

    std::map<int, int> cluster_labels;
    std::size_t unmatched = 0;
    for (const auto& [cluster, idx] : members) {
        if (auto it = counts.find(cluster); it != counts.end()) {
            cluster_labels[cluster] = vote(it->second);
            continue;
        }
        ++unmatched;
        // Medoid: member with the smallest summed distance to the others.
        std::size_t medoid = idx.front();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a : idx) {
            double sum = 0.0;
            for (std::size_t b : idx) sum += distance(points.row(a), points.row(b));
            if (sum < best) {
                best = sum;
                medoid = a;
            }
        }
        cluster_labels[cluster] = nearest_label(labeled, points.row(medoid));
    }
    return ClusterLabelClassifier(points, std::vector<int>(cluster_ids.begin(), cluster_ids.end()), cutoff,
                                  std::move(labeled), std::move(cluster_labels), unmatched);
}

KnnClassifier::KnnClassifier(LabeledPoints labeled, std::size_t k) : labeled_(std::move(labeled)), k_(k) {
    if (k_ == 0) throw std::invalid_argument("knn: k must be positive");
    if (labeled_.points.empty() || k_ > labeled_.points.rows())
        throw std::invalid_argument("knn: k=" + std::to_string(k_) + " exceeds the " +
                                    std::to_string(labeled_.points.empty() ? 0 : labeled_.points.rows()) +
                                    " labeled points");
    if (labeled_.labels.size() != labeled_.points.rows())
        throw std::invalid_argument("knn: need one label per labeled point");
}

int KnnClassifier::predict(std::span<const double> z) const {
    const std::size_t n = labeled_.points.rows();
    std::vector<std::tuple<double, int, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {squared_distance(labeled_.points.row(i), z), labeled_.labels[i], i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < k_; ++i) ++counts[std::get<1>(dist[i])];
    return vote(counts);
}

void SSLConfig::validate() const {
    if (cutoff && !(*cutoff > 0.0)) throw std::invalid_argument("ssl cutoff must be positive");
    if (k_baseline == 0) throw std::invalid_argument("k_baseline must be at least 1");
    if (seeds.empty()) throw std::invalid_argument("ssl needs at least one seed");
}

SSLResult ssl_run(const NetworkParams& encoder, const Dataset& data, const Splits& splits, const SSLConfig& cfg,
                  std::uint64_t seed) {
    cfg.validate();
    if (!data.has_labels()) throw std::invalid_argument("ssl_run: dataset has no labels");
    if (splits.labeled.empty() || splits.test.empty())
        throw std::invalid_argument("ssl_run: need labeled and test points");
    const auto& truth = *data.labels();

    std::vector<std::size_t> pool = splits.labeled;
    pool.insert(pool.end(), splits.unlabeled.begin(), splits.unlabeled.end());
    const Matrix codes = encode_batch(encoder, data.samples().select_rows(pool));
    const Matrix test_codes = encode_batch(encoder, data.samples().select_rows(splits.test));

    SSLResult r;
    r.seed = seed;
    r.m = splits.unlabeled.size();
    r.n = splits.labeled.size();

    if (cfg.cutoff) {
        r.cutoff = *cfg.cutoff;
    } else {
        std::vector<int> pool_ids;
        for (std::size_t i : pool) pool_ids.push_back(truth[i]);
        if (std::set<int>(pool_ids.begin(), pool_ids.end()).size() >= 2) {
            const ClusteredSample s{codes, pool_ids, {}};
            r.cutoff = empirical_cluster_margin(s).eta_hat / 2.0;
        }
        if (!(r.cutoff > 0.0)) r.cutoff = std::numeric_limits<double>::min();
    }

    const std::vector<int> ids = single_linkage_clusters(codes, r.cutoff);
    std::vector<std::optional<int>> slot(pool.size());
    for (std::size_t i = 0; i < splits.labeled.size(); ++i) slot[i] = truth[splits.labeled[i]];
    const ClusterLabelClassifier ssl = label_clusters(codes, ids, r.cutoff, slot);
    r.n_clusters_found = ssl.num_clusters();
    r.n_unmatched_clusters = ssl.num_unmatched();
    r.degenerate = pool.size() > 1 && r.n_clusters_found == pool.size();

    // The labeled points occupy the first rows of `codes`.
    std::vector<std::size_t> head(splits.labeled.size());
    std::iota(head.begin(), head.end(), std::size_t{0});
    LabeledPoints labeled{codes.select_rows(head), {}};
    for (std::size_t i : splits.labeled) labeled.labels.push_back(truth[i]);
    const KnnClassifier knn(std::move(labeled), cfg.k_baseline);

    std::vector<int> test_truth, ssl_pred, knn_pred;
    for (std::size_t t = 0; t < splits.test.size(); ++t) {
        test_truth.push_back(truth[splits.test[t]]);
        ssl_pred.push_back(ssl.predict(test_codes.row(t)));
        knn_pred.push_back(knn.predict(test_codes.row(t)));
    }
    r.ssl_error = error_rate(ssl_pred, test_truth);
    r.supervised_error = error_rate(knn_pred, test_truth);
    return r;
}

SSLSummary ssl_compare(const NetworkParams& encoder, const Dataset& data, const SplitSpec& spec,
                       const SSLConfig& cfg) {
    cfg.validate();
    SSLSummary out;
    std::vector<double> ssl_err, sup_err;
    for (std::uint64_t seed : cfg.seeds) {
        SplitSpec s = spec;
        s.seed = seed;
        out.runs.push_back(ssl_run(encoder, data, split(data, s), cfg, seed));
        ssl_err.push_back(out.runs.back().ssl_error);
        sup_err.push_back(out.runs.back().supervised_error);
    }
    out.ssl_error_mean = mean(ssl_err);
    out.ssl_error_std = stddev(ssl_err);
    out.supervised_error_mean = mean(sup_err);
    out.supervised_error_std = stddev(sup_err);
    return out;
}

NetworkParams identity_autoencoder(std::size_t dim) {
    std::vector<Layer> layers;
    layers.push_back({Matrix::identity(dim), Activation::identity, {}});
    layers.push_back({Matrix::identity(dim), Activation::identity, {}});
    return NetworkParams(std::move(layers), 0);
}

}  // namespace aebound
