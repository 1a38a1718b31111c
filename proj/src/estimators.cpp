#include "gradid/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gradid/errors.hpp"
#include "gradid/knn.hpp"
#include "gradid/pca.hpp"
#include "gradid/rng.hpp"

namespace gradid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mle_local_value(std::span<const double> dists) {
    const std::size_t k = dists.size();
    const double tk = dists[k - 1];
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        sum += std::log(tk / dists[j]);
    }
    const double mean = sum / static_cast<double>(k - 1);
    return 1.0 / mean;  // +inf when every T_j equals T_k
}

struct Aggregate {
    double value = 0.0;
    double stderr_value = 0.0;
    std::size_t used = 0;
};

// Pools an ascending list of local estimates; see IdPooling. Sorted-order
// sums keep results independent of the original point order.
// mean: +inf sentinels (exactly tied distances) sort to the tail, carry no
// magnitude and are skipped. inverse_mean: a sentinel contributes a zero
// inverse; the stderr comes from the delta method on the mean of inverses.
Aggregate aggregate_sorted(const std::vector<double>& sorted_values, IdPooling pooling) {
    Aggregate agg;
    if (pooling == IdPooling::mean) {
        double sum = 0.0;
        for (double v : sorted_values) {
            if (!std::isfinite(v)) break;
            sum += v;
            ++agg.used;
        }
        if (agg.used == 0) {
            agg.value = std::numeric_limits<double>::infinity();
            return agg;
        }
        agg.value = sum / static_cast<double>(agg.used);
        if (agg.used > 1) {
            double ss = 0.0;
            for (std::size_t i = 0; i < agg.used; ++i) {
                const double d = sorted_values[i] - agg.value;
                ss += d * d;
            }
            const double var = ss / static_cast<double>(agg.used - 1);
            agg.stderr_value = std::sqrt(var / static_cast<double>(agg.used));
        }
        return agg;
    }
    agg.used = sorted_values.size();
    if (agg.used == 0) {
        agg.value = std::numeric_limits<double>::infinity();
        return agg;
    }
    double sum = 0.0;
    for (double v : sorted_values) sum += v > 0.0 ? 1.0 / v : 0.0;
    const double mean_inv = sum / static_cast<double>(agg.used);
    if (mean_inv <= 0.0) {
        agg.value = std::numeric_limits<double>::infinity();
        return agg;
    }
    agg.value = 1.0 / mean_inv;
    if (agg.used > 1) {
        double ss = 0.0;
        for (double v : sorted_values) {
            const double d = (v > 0.0 ? 1.0 / v : 0.0) - mean_inv;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(agg.used - 1);
        const double se_inv = std::sqrt(var / static_cast<double>(agg.used));
        agg.stderr_value = se_inv / (mean_inv * mean_inv);
    }
    return agg;
}

// Indices of the `take` smallest rank-derived keys; a seeded sample without
// replacement. Ranks refer to the cloud's row order, which estimate_id
// canonicalizes by content beforehand, so the draws are invariant to both
// point shuffling and positive rescaling (hashes of raw coordinate bytes
// would change under scaling and break the estimator's scale invariance).
std::vector<std::size_t> rank_keyed_subset(std::size_t n, std::size_t take, std::uint64_t seed,
                                           std::uint64_t round_salt) {
    const std::uint64_t salt = mix64(seed ^ (0x9e3779b97f4a7c15ULL * (round_salt + 1)));
    std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        keys[i] = {mix64(mix64(i + 1) ^ salt), i};
    }
    std::sort(keys.begin(), keys.end());
    std::vector<std::size_t> chosen(take);
    for (std::size_t i = 0; i < take; ++i) chosen[i] = keys[i].second;
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

PointCloud subset_cloud(const PointCloud& cloud, const std::vector<std::size_t>& indices) {
    PointCloud out(cloud.dim());
    for (std::size_t i : indices) out.add(cloud.point(i));
    return out;
}

// One bootstrap round: pooled local MLE values within a subsample.
double mle_round_mean(const PointCloud& sub, std::size_t k, IdPooling pooling) {
    const NeighborTable table = knn(sub, k);
    std::vector<double> locals(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        locals[i] = mle_local_value(table.row_dist(i));
    }
    std::sort(locals.begin(), locals.end());
    const Aggregate agg = aggregate_sorted(locals, pooling);
    if (!std::isfinite(agg.value)) {
        throw ParameterError("all local MLE values degenerate; the cloud has no usable geometry");
    }
    return agg.value;
}

}  // namespace

std::string id_method_name(IdMethod method) {
    return method == IdMethod::mle ? "mle" : "twonn";
}

std::string id_pooling_name(IdPooling pooling) {
    return pooling == IdPooling::mean ? "mean" : "inverse_mean";
}

IdPooling id_pooling_from(const std::string& name) {
    if (name == "mean") return IdPooling::mean;
    if (name == "inverse_mean") return IdPooling::inverse_mean;
    throw ConfigError("unknown pooling \"" + name + "\" (expected mean or inverse_mean)");
}

IdMethod id_method_from(const std::string& name) {
    if (name == "mle") return IdMethod::mle;
    if (name == "twonn") return IdMethod::twonn;
    throw ConfigError("unknown estimator method \"" + name + "\" (expected mle or twonn)");
}

double twonn_local(double t1, double t2) {
    if (!(t1 > 0.0) || t2 < t1) {
        throw ParameterError("twonn_local requires 0 < T1 <= T2");
    }
    if (t1 == t2) return kInf;
    return 1.0 / std::log(t2 / t1);
}

double mle_local(std::span<const double> dists) {
    if (dists.size() < 2) throw ParameterError("mle_local requires at least two neighbor distances");
    if (!(dists.front() > 0.0)) throw ParameterError("neighbor distances must be positive");
    for (std::size_t i = 1; i < dists.size(); ++i) {
        if (dists[i] < dists[i - 1]) throw ParameterError("neighbor distances must be ascending");
    }
    const double value = mle_local_value(dists);
    if (!std::isfinite(value)) {
        throw ParameterError("degenerate neighbor distances: all T_j equal T_k");
    }
    return value;
}

IdEstimate twonn_global(const PointCloud& cloud, double trim) {
    if (trim < 0.0 || trim >= 1.0) throw ParameterError("trim fraction must lie in [0, 1)");
    const std::size_t n = cloud.size();
    if (n < 3) {
        throw InsufficientPointsError("TwoNN needs at least 3 distinct points, found " + std::to_string(n));
    }
    const NeighborTable table = knn(cloud, 2);
    // Work on the log-ratios themselves: X = log(T2/T1) is exponential with
    // rate d, and the local estimate is 1/X. Dropping the largest `trim`
    // fraction of locals removes the smallest X values, so the kept sample is
    // left-censored; by memorylessness the gaps above the censoring point are
    // again exponential and their pooled ML rate is trim-unbiased.
    std::vector<double> log_ratios(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = table.row_dist(i);
        log_ratios[i] = std::log(d[1] / d[0]);
    }
    std::sort(log_ratios.begin(), log_ratios.end());
    const std::size_t drop = static_cast<std::size_t>(trim * static_cast<double>(n));
    if (drop >= n) throw ParameterError("trim fraction leaves no local estimates");
    const double cutoff = drop > 0 ? log_ratios[drop - 1] : 0.0;
    const std::size_t kept = n - drop;
    double sum = 0.0;
    for (std::size_t i = drop; i < n; ++i) sum += log_ratios[i] - cutoff;
    if (sum <= 0.0) {
        throw ParameterError("degenerate neighbor ratios survive the trim; the cloud has too many ties");
    }
    const double mean_gap = sum / static_cast<double>(kept);

    IdEstimate est;
    est.value = 1.0 / mean_gap;
    est.method = IdMethod::twonn;
    est.n_points = n;
    est.k_or_m = 2;
    est.bootstrap_rounds = 0;
    if (kept > 1) {
        double ss = 0.0;
        for (std::size_t i = drop; i < n; ++i) {
            const double g = (log_ratios[i] - cutoff) - mean_gap;
            ss += g * g;
        }
        const double se_gap = std::sqrt(ss / static_cast<double>(kept - 1) / static_cast<double>(kept));
        est.stderr_value = se_gap / (mean_gap * mean_gap);
    }
    return est;
}

IdEstimate mle_plain(const PointCloud& cloud, std::size_t k, IdPooling pooling) {
    if (k < 2) throw ParameterError("MLE requires k >= 2");
    const std::size_t n = cloud.size();
    if (n < k + 1) {
        throw InsufficientPointsError("MLE with k = " + std::to_string(k) + " needs at least " +
                                      std::to_string(k + 1) + " distinct points, found " + std::to_string(n));
    }
    const NeighborTable table = knn(cloud, k);
    std::vector<double> locals(n);
    for (std::size_t i = 0; i < n; ++i) locals[i] = mle_local_value(table.row_dist(i));
    std::sort(locals.begin(), locals.end());
    const Aggregate agg = aggregate_sorted(locals, pooling);
    if (!std::isfinite(agg.value)) throw ParameterError("all local MLE values degenerate");

    IdEstimate est;
    est.value = agg.value;
    est.method = IdMethod::mle;
    est.n_points = n;
    est.k_or_m = k;
    est.bootstrap_rounds = 0;
    est.stderr_value = agg.stderr_value;
    return est;
}

IdEstimate mle_global(const PointCloud& cloud, std::size_t k, const BootstrapSpec& bootstrap,
                      IdPooling pooling) {
    if (k < 2) throw ParameterError("MLE requires k >= 2");
    if (bootstrap.rounds == 0) throw ParameterError("bootstrap rounds must be positive");
    if (!(bootstrap.fraction > 0.0) || bootstrap.fraction > 1.0) {
        throw ParameterError("bootstrap fraction must lie in (0, 1]");
    }
    const std::size_t n = cloud.size();
    const std::size_t sub_n =
        static_cast<std::size_t>(std::ceil(bootstrap.fraction * static_cast<double>(n)));
    if (sub_n < k + 1) {
        throw ParameterError("bootstrap subsample of " + std::to_string(sub_n) +
                             " points is smaller than k + 1 = " + std::to_string(k + 1));
    }

    std::vector<double> round_means(bootstrap.rounds);
    for (std::size_t r = 0; r < bootstrap.rounds; ++r) {
        const PointCloud sub =
            sub_n == n ? cloud : subset_cloud(cloud, rank_keyed_subset(n, sub_n, bootstrap.seed, r));
        round_means[r] = mle_round_mean(sub, k, pooling);
    }

    double sum = 0.0;
    for (double v : round_means) sum += v;
    const double value = sum / static_cast<double>(bootstrap.rounds);
    double stderr_value = 0.0;
    if (bootstrap.rounds > 1) {
        double ss = 0.0;
        for (double v : round_means) {
            const double d = v - value;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(bootstrap.rounds - 1);
        stderr_value = std::sqrt(var / static_cast<double>(bootstrap.rounds));
    }

    IdEstimate est;
    est.value = value;
    est.method = IdMethod::mle;
    est.n_points = n;
    est.k_or_m = k;
    est.bootstrap_rounds = bootstrap.rounds;
    est.stderr_value = stderr_value;
    return est;
}

IdEstimate estimate_id(const PointCloud& cloud, const EstimatorSpec& spec) {
    PointCloud work = canonical_order(cloud);

    if (spec.max_points > 0 && work.size() > spec.max_points) {
        const std::uint64_t seed = spec.bootstrap ? spec.bootstrap->seed : 0;
        work = subset_cloud(work, rank_keyed_subset(work.size(), spec.max_points, seed, 0x5CA1EULL));
    }

    if (spec.pca_dims) {
        const PcaProjection proj = pca_fit(work, *spec.pca_dims);
        work = pca_apply(proj, work);
    }

    const DedupeResult dd = dedupe(work, spec.dedupe_tol);

    const std::size_t needed = spec.method == IdMethod::twonn ? 3 : spec.k + 1;
    if (dd.cloud.size() < needed) {
        throw InsufficientPointsError("estimator needs " + std::to_string(needed) +
                                      " distinct points, found " + std::to_string(dd.cloud.size()) +
                                      " after removing " + std::to_string(dd.removed) + " duplicates");
    }

    if (spec.method == IdMethod::twonn) {
        return twonn_global(dd.cloud, spec.twonn_trim);
    }
    if (spec.bootstrap) {
        return mle_global(dd.cloud, spec.k, *spec.bootstrap, spec.pooling);
    }
    return mle_plain(dd.cloud, spec.k, spec.pooling);
}

}  // namespace gradid
