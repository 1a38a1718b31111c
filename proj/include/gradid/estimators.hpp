#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "gradid/point_cloud.hpp"

namespace gradid {

enum class IdMethod { mle, twonn };

std::string id_method_name(IdMethod method);
IdMethod id_method_from(const std::string& name);

struct BootstrapSpec {
    std::size_t rounds = 20;
    double fraction = 0.8;
    std::uint64_t seed = 0;
};

// How local MLE estimates pool into a global value.
//   mean         — arithmetic mean of the local estimates. Heavy-tailed: one
//                  extreme local moves the global, which is what lets a
//                  single augmented gradient shift the estimate in
//                  per-sample detection.
//   inverse_mean — inverts the averaged log-ratio statistic (harmonic mean
//                  of locals). Low variance; suited to comparing batch-level
//                  estimates.
// TwoNN always pools through averaged log-ratios because the arithmetic mean
// of its locals diverges.
enum class IdPooling { mean, inverse_mean };

std::string id_pooling_name(IdPooling pooling);
IdPooling id_pooling_from(const std::string& name);

// Configuration for the single estimate_id entry point used by both
// detectors: optional PCA reduction, dedupe, then TwoNN or bootstrap-averaged
// MLE on exact neighbor distances.
struct EstimatorSpec {
    IdMethod method = IdMethod::mle;
    std::size_t k = 10;                        // MLE neighbor count
    IdPooling pooling = IdPooling::mean;       // MLE local-to-global pooling
    std::optional<std::size_t> pca_dims;       // reduce before estimating when set
    std::optional<BootstrapSpec> bootstrap;    // MLE only
    double twonn_trim = 0.10;                  // fraction of largest locals discarded
    std::size_t max_points = 5000;             // content-seeded subsample cap
    double dedupe_tol = 1e-12;
};

struct IdEstimate {
    double value = 0.0;
    IdMethod method = IdMethod::mle;
    std::size_t n_points = 0;         // points entering the estimator after dedupe
    std::size_t k_or_m = 0;           // k for MLE, 2 for TwoNN
    std::size_t bootstrap_rounds = 0; // 0 when no resampling was used
    double stderr_value = 0.0;
};

// Local TwoNN estimate 1 / log(T2 / T1). Requires 0 < T1 <= T2; returns
// +infinity when T1 == T2 (the caller discards such degenerate ratios).
double twonn_local(double t1, double t2);

// Local MLE estimate over ascending positive neighbor distances T_1..T_k:
// ((1/(k-1)) * sum_j log(T_k / T_j))^-1. Requires k >= 2; throws on a fully
// degenerate distance vector (all T_j == T_k). Coincides with twonn_local
// bit-for-bit at k = 2.
double mle_local(std::span<const double> dists);

// Pools per-point TwoNN estimates after discarding the largest `trim`
// fraction of local values. Locals combine through their harmonic mean
// (inverting the averaged log-ratio): the arithmetic mean of inverse-
// exponential locals diverges and roughly doubles the estimate. stderr is a
// delta-method standard error over the kept values.
IdEstimate twonn_global(const PointCloud& cloud, double trim = 0.10);

// Averaged MLE over the whole cloud (no resampling).
IdEstimate mle_plain(const PointCloud& cloud, std::size_t k, IdPooling pooling = IdPooling::mean);

// Bootstrap-averaged MLE: per round, a content-seeded subsample of
// ceil(fraction * N) points without replacement, neighbors searched within
// the subsample; value is the mean over round means, stderr the standard
// error across rounds. Subsamples are keyed by point content, not position,
// so shuffled clouds draw identical subsamples.
IdEstimate mle_global(const PointCloud& cloud, std::size_t k, const BootstrapSpec& bootstrap,
                      IdPooling pooling = IdPooling::mean);

// Single entry point used by the detectors: canonicalize order, cap the
// cloud, optional PCA, dedupe, then dispatch on spec.method.
IdEstimate estimate_id(const PointCloud& cloud, const EstimatorSpec& spec);

}  // namespace gradid
