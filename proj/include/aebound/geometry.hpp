#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "aebound/matrix.hpp"
#include "aebound/network.hpp"

namespace aebound {

/// Points with a cluster id each and an optional G_epsilon membership mask
/// (empty mask = every point is a member).
struct ClusteredSample {
    Matrix points;
    std::vector<int> cluster_id;
    std::vector<bool> in_geps;

    void validate() const;
};

struct MarginEstimate {
    double eta_hat = 0.0;
    std::pair<std::size_t, std::size_t> witness_pair{0, 0};
    std::size_t n_pairs_checked = 0;
};

/// Exhaustive scan up to this many points; larger inputs use an exact
/// sort-and-sweep along the first principal axis.
inline constexpr std::size_t kExactPairLimit = 20000;

/// Smallest L2 distance between two points of different clusters. Ignores
/// in_geps. Ties resolve to the lexicographically smallest index pair in
/// the exhaustive scan.
MarginEstimate empirical_cluster_margin(const ClusteredSample& sample,
                                        std::size_t exact_pair_limit = kExactPairLimit);

struct EncodedMargin {
    MarginEstimate estimate;
    /// Clusters dropped because restricting to G_epsilon emptied them.
    std::vector<int> excluded_clusters;
    /// Indices (into the original sample) of the points that were used.
    std::vector<std::size_t> used_points;
};

/// Cluster margin of enc(x) over the sample, optionally restricted to the
/// G_epsilon members.
EncodedMargin encoded_cluster_margin(const NetworkParams& f, const ClusteredSample& sample, bool restrict_geps);

/// Product of decoder spectral norms, times 1/4 for every sigmoid layer.
double lipschitz_upper(const NetworkParams& f);

struct CodePair {
    Vector a;
    Vector b;
};

/// All pairs among `codes` (up to max_pairs, seeded subsample beyond that)
/// plus one perturbation pair (z, z + step*u) per code with random unit u.
std::vector<CodePair> make_probe_pairs(const Matrix& codes, std::size_t max_pairs, double perturbation_step,
                                       std::uint64_t seed);

inline constexpr std::size_t kDefaultProbePairs = 100000;
inline constexpr double kDefaultPerturbationStep = 1e-3;

/// max ||dec(a) - dec(b)|| / ||a - b|| over pairs; coincident pairs are
/// skipped. A lower bound on the decoder's Lipschitz constant.
double lipschitz_empirical(const NetworkParams& f, std::span<const CodePair> pairs);

struct AuditResult {
    std::size_t pairs_checked = 0;
    std::size_t decoded_violations = 0;
    std::size_t encoded_violations = 0;
    /// Slack of ||f(x)-f(y)|| + 2(mu+eps) - ||x-y|| over audited pairs.
    double min_slack = 0.0;
    double max_slack = 0.0;
    /// Slack of ||enc(x)-enc(y)|| - (||x-y|| - 2(mu+eps)) / C.
    double min_encoded_slack = 0.0;
};

/// Absolute allowance for floating-point rounding in the audited
/// inequalities, scaled by 1 + ||x - y||.
inline constexpr double kAuditRoundingAllowance = 1e-9;

/// Checks ||x-y|| <= ||f(x)-f(y)|| + 2(mu+eps) and
/// ||enc(x)-enc(y)|| >= (||x-y|| - 2(mu+eps)) / lipschitz over every pair of
/// G_epsilon members (only pairs from different clusters when
/// inter_cluster_only is set).
AuditResult three_eps_audit(const NetworkParams& f, const ClusteredSample& sample, double mu, double epsilon,
                            double lipschitz, bool inter_cluster_only = true);

}  // namespace aebound
