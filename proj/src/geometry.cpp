#include "aebound/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "aebound/norms.hpp"
#include "aebound/parallel.hpp"
#include "aebound/rng.hpp"

namespace aebound {

namespace {

struct RowBest {
    double dist2 = std::numeric_limits<double>::infinity();
    std::size_t partner = 0;
    std::size_t checked = 0;
};

MarginEstimate reduce(const std::vector<RowBest>& rows) {
    MarginEstimate out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.n_pairs_checked += rows[i].checked;
        if (rows[i].dist2 < best) {
            best = rows[i].dist2;
            out.witness_pair = {i, rows[i].partner};
        }
    }
    out.eta_hat = std::sqrt(best);
    return out;
}

MarginEstimate margin_exhaustive(const Matrix& pts, std::span<const int> ids) {
    const std::size_t n = pts.rows();
    std::vector<RowBest> rows(n);
    parallel_for(n, [&](std::size_t i) {
        RowBest& rb = rows[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (ids[i] == ids[j]) continue;
            ++rb.checked;
            const double d2 = squared_distance(pts.row(i), pts.row(j));
            if (d2 < rb.dist2) {
                rb.dist2 = d2;
                rb.partner = j;
            }
        }
    });
    return reduce(rows);
}

// Leading principal direction of the centered points (unit length).
Vector principal_axis(const Matrix& pts) {
    const std::size_t n = pts.rows(), dim = pts.cols();
    Vector mean(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) mean[k] += pts(i, k);
    for (double& v : mean) v /= static_cast<double>(n);
    Matrix centered = pts;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) centered(i, k) -= mean[k];
    Rng rng(kPowerIterationSeed);
    Vector u(dim);
    for (double& v : u) v = rng.uniform(-1.0, 1.0);
    for (int it = 0; it < 100; ++it) {
        Vector next = centered.apply_transposed(centered.apply(u));
        const double nn = norm2(next);
        if (nn == 0.0) break;
        for (std::size_t k = 0; k < dim; ++k) u[k] = next[k] / nn;
    }
    const double nu = norm2(u);
    for (double& v : u) v /= nu;
    return u;
}

// Exact: projections onto a unit vector never exceed true distances, so a
// pair whose projection gap exceeds the best distance so far can be skipped,
// along with every later point in sorted order.
MarginEstimate margin_sweep(const Matrix& pts, std::span<const int> ids) {
    const std::size_t n = pts.rows();
    const Vector axis = principal_axis(pts);
    std::vector<double> proj(n);
    for (std::size_t i = 0; i < n; ++i) proj[i] = dot(pts.row(i), axis);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return proj[a] < proj[b] || (proj[a] == proj[b] && a < b);
    });

    MarginEstimate out;
    double best2 = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> witness{0, 0};
    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t i = order[a];
        for (std::size_t b = a + 1; b < n; ++b) {
            const std::size_t j = order[b];
            if (proj[j] - proj[i] > best * (1.0 + 1e-12) + 1e-12) break;
            if (ids[i] == ids[j]) continue;
            ++out.n_pairs_checked;
            const std::size_t lo = std::min(i, j), hi = std::max(i, j);
            const double d2 = squared_distance(pts.row(lo), pts.row(hi));
            if (d2 < best2 || (d2 == best2 && std::make_pair(lo, hi) < witness)) {
                best2 = d2;
                best = std::sqrt(d2);
                witness = {lo, hi};
            }
        }
    }
    out.eta_hat = best;
    out.witness_pair = witness;
    return out;
}

}  // namespace

void ClusteredSample::validate() const {
    if (points.empty()) throw std::invalid_argument("clustered sample has no points");
    if (cluster_id.size() != points.rows())
        throw std::invalid_argument("clustered sample needs one cluster id per point");
    if (!in_geps.empty() && in_geps.size() != points.rows())
        throw std::invalid_argument("clustered sample mask length differs from point count");
}

MarginEstimate empirical_cluster_margin(const ClusteredSample& sample, std::size_t exact_pair_limit) {
    sample.validate();
    if (std::set<int>(sample.cluster_id.begin(), sample.cluster_id.end()).size() < 2)
        throw std::invalid_argument("cluster margin needs at least two clusters");
    if (sample.points.rows() <= exact_pair_limit) return margin_exhaustive(sample.points, sample.cluster_id);
    return margin_sweep(sample.points, sample.cluster_id);
}

EncodedMargin encoded_cluster_margin(const NetworkParams& f, const ClusteredSample& sample, bool restrict_geps) {
    sample.validate();
    EncodedMargin out;
    const std::set<int> all_ids(sample.cluster_id.begin(), sample.cluster_id.end());
    for (std::size_t i = 0; i < sample.points.rows(); ++i)
        if (!restrict_geps || sample.in_geps.empty() || sample.in_geps[i]) out.used_points.push_back(i);
    if (out.used_points.empty()) throw std::invalid_argument("no points left after G_epsilon restriction");

    std::vector<int> ids;
    std::set<int> kept;
    for (std::size_t i : out.used_points) {
        ids.push_back(sample.cluster_id[i]);
        kept.insert(sample.cluster_id[i]);
    }
    for (int id : all_ids)
        if (!kept.count(id)) out.excluded_clusters.push_back(id);

    ClusteredSample encoded{encode_batch(f, sample.points.select_rows(out.used_points)), std::move(ids), {}};
    out.estimate = empirical_cluster_margin(encoded);
    // Report the witness in original indices.
    out.estimate.witness_pair = {out.used_points[out.estimate.witness_pair.first],
                                 out.used_points[out.estimate.witness_pair.second]};
    return out;
}

double lipschitz_upper(const NetworkParams& f) {
    double c = 1.0;
    for (const Layer& l : f.decoder_layers()) {
        c *= spectral_norm(l.weights).value;
        if (l.activation == Activation::sigmoid) c *= 0.25;
    }
    return c;
}

std::vector<CodePair> make_probe_pairs(const Matrix& codes, std::size_t max_pairs, double perturbation_step,
                                       std::uint64_t seed) {
    const std::size_t n = codes.rows();
    std::vector<CodePair> pairs;
    auto code = [&](std::size_t i) { return Vector(codes.row(i).begin(), codes.row(i).end()); };
    const std::size_t all = n * (n - 1) / 2;
    Rng rng(seed);
    if (all <= max_pairs) {
        pairs.reserve(all + n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({code(i), code(j)});
    } else {
        pairs.reserve(max_pairs + n);
        while (pairs.size() < max_pairs) {
            const std::size_t i = rng.index(n), j = rng.index(n);
            if (i != j) pairs.push_back({code(i), code(j)});
        }
    }
    if (perturbation_step > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            Vector u(codes.cols());
            for (double& v : u) v = rng.normal();
            const double nu = norm2(u);
            Vector z = code(i);
            Vector moved = z;
            for (std::size_t k = 0; k < u.size(); ++k) moved[k] += perturbation_step * u[k] / nu;
            pairs.push_back({std::move(z), std::move(moved)});
        }
    }
    return pairs;
}

double lipschitz_empirical(const NetworkParams& f, std::span<const CodePair> pairs) {
    std::vector<double> ratio(pairs.size(), 0.0);
    std::vector<char> used(pairs.size(), 0);
    for (const CodePair& p : pairs)
        if (p.a.size() != f.code_dim() || p.b.size() != f.code_dim())
            throw std::invalid_argument("probe pair dimension differs from code dimension");
    parallel_for(pairs.size(), [&](std::size_t i) {
        const double dz = distance(pairs[i].a, pairs[i].b);
        if (dz == 0.0) return;
        used[i] = 1;
        ratio[i] = distance(decode(f, pairs[i].a), decode(f, pairs[i].b)) / dz;
    });
    if (std::none_of(used.begin(), used.end(), [](char c) { return c != 0; }))
        throw std::invalid_argument("lipschitz_empirical: every probe pair is coincident");
    return *std::max_element(ratio.begin(), ratio.end());
}

AuditResult three_eps_audit(const NetworkParams& f, const ClusteredSample& sample, double mu, double epsilon,
                            double lipschitz, bool inter_cluster_only) {
    sample.validate();
    if (!(lipschitz > 0.0)) throw std::invalid_argument("three_eps_audit: Lipschitz constant must be positive");
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < sample.points.rows(); ++i)
        if (sample.in_geps.empty() || sample.in_geps[i]) members.push_back(i);

    AuditResult out;
    if (members.size() < 2) return out;
    const Matrix x = sample.points.select_rows(members);
    const Matrix fx = forward_batch(f, x);
    const Matrix ex = encode_batch(f, x);
    const double allowance = 2.0 * (mu + epsilon);

    struct RowAudit {
        std::size_t pairs = 0, dec_viol = 0, enc_viol = 0;
        double min_slack = std::numeric_limits<double>::infinity();
        double max_slack = -std::numeric_limits<double>::infinity();
        double min_enc = std::numeric_limits<double>::infinity();
    };
    const std::size_t n = members.size();
    std::vector<RowAudit> rows(n);
    parallel_for(n, [&](std::size_t i) {
        RowAudit& ra = rows[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (inter_cluster_only && sample.cluster_id[members[i]] == sample.cluster_id[members[j]]) continue;
            ++ra.pairs;
            const double dx = distance(x.row(i), x.row(j));
            const double df = distance(fx.row(i), fx.row(j));
            const double de = distance(ex.row(i), ex.row(j));
            const double tol = kAuditRoundingAllowance * (1.0 + dx);
            const double slack = df + allowance - dx;
            const double enc_slack = de - (dx - allowance) / lipschitz;
            if (slack < -tol) ++ra.dec_viol;
            if (enc_slack < -tol) ++ra.enc_viol;
            ra.min_slack = std::min(ra.min_slack, slack);
            ra.max_slack = std::max(ra.max_slack, slack);
            ra.min_enc = std::min(ra.min_enc, enc_slack);
        }
    });
    out.min_slack = std::numeric_limits<double>::infinity();
    out.max_slack = -std::numeric_limits<double>::infinity();
    out.min_encoded_slack = std::numeric_limits<double>::infinity();
    for (const RowAudit& ra : rows) {
        out.pairs_checked += ra.pairs;
        out.decoded_violations += ra.dec_viol;
        out.encoded_violations += ra.enc_viol;
        out.min_slack = std::min(out.min_slack, ra.min_slack);
        out.max_slack = std::max(out.max_slack, ra.max_slack);
        out.min_encoded_slack = std::min(out.min_encoded_slack, ra.min_enc);
    }
    if (out.pairs_checked == 0) out.min_slack = out.max_slack = out.min_encoded_slack = 0.0;
    return out;
}

}  // namespace aebound
