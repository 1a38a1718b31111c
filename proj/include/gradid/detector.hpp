#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gradid/estimators.hpp"
#include "gradid/network.hpp"
#include "gradid/point_cloud.hpp"

namespace gradid {

// One client's local data; `truth` carries the evaluation ground truth
// ("natural" or "adversarial:<kind>") when known.
struct ClientBatch {
    int client_id = 0;
    std::vector<LabeledSample> samples;
    std::optional<std::string> truth;

    bool truth_adversarial() const;
};

enum class VerdictLabel { natural, adversarial };

// Decision plus the statistic that produced it. `error` is set instead of a
// meaningful label when a per-item failure occurred (e.g. a client batch too
// small for estimation); batch screening then continues for the rest.
struct DetectorVerdict {
    int subject_id = 0;                  // client or sample id
    VerdictLabel label = VerdictLabel::natural;
    double statistic = 0.0;              // Delta_k (batch) or ID_aug (per-sample)
    double raw_estimate = 0.0;           // the ID estimate behind the statistic
    double reference = 0.0;              // ID_natural / ID_norm
    double threshold_low = 0.0;          // natural iff low <= statistic <= high
    double threshold_high = 0.0;
    std::optional<std::string> error;
};

// Decision rules, inclusive at both boundaries per the pseudocode.
inline bool batch_natural(double delta, double tau) { return delta <= tau; }
inline bool sample_natural(double id_aug, double p10, double p90) {
    return id_aug >= p10 && id_aug <= p90;
}

// Gradient embeddings for a sample set, in order. With predicted = true the
// gradients are taken at the model's own predictions rather than the
// provided labels.
PointCloud gradient_cloud(const Network& net, const std::vector<LabeledSample>& samples,
                          bool predicted = false);

struct Reference {
    PointCloud cloud;
    IdEstimate id;
};

// Trusted reference: per-sample parameter gradients plus their estimated ID.
Reference build_reference(const Network& net, const std::vector<LabeledSample>& samples,
                          const EstimatorSpec& spec);

struct BatchDetectorState {
    IdEstimate id_natural;
    double tau = 0.0;
    bool calibrated = false;
    EstimatorSpec spec;
    // Extension beyond the base algorithms, which receive the true label
    // alongside each input: compute detection-time gradients at the model's
    // predicted label instead of the provided one.
    bool use_predicted_labels = false;
};

struct TauCalibration {
    double tau = 0.0;
    double balanced_accuracy = 0.0;
    std::vector<double> natural_deltas;
    std::vector<double> adversarial_deltas;
    std::vector<std::string> warnings;
};

// Grid search over 101 thresholds spanning [0, max Delta], maximizing
// balanced accuracy; ties resolve to the smallest threshold.
TauCalibration calibrate_tau_from_deltas(std::vector<double> natural_deltas,
                                         std::vector<double> adversarial_deltas);

// Computes per-batch deltas against state.id_natural, then calibrates as
// above. Requires both natural and adversarial batches with truth set. Sets
// state.tau.
TauCalibration calibrate_tau(const Network& net, const std::vector<ClientBatch>& labeled_batches,
                             BatchDetectorState& state);

// Algorithm "client screening": per client, Delta_k = |ID(G_k) - ID_natural|,
// natural iff Delta_k <= tau.
std::vector<DetectorVerdict> detect_clients(const Network& net, const std::vector<ClientBatch>& batches,
                                            const BatchDetectorState& state);

struct PerSampleDetectorState {
    PointCloud g_norm;
    IdEstimate id_norm;
    double p10 = 0.0;
    double p90 = 0.0;
    bool calibrated = false;
    EstimatorSpec spec;
    bool use_predicted_labels = false;  // extension; see BatchDetectorState
};

struct PercentileCalibration {
    double p10 = 0.0;
    double p90 = 0.0;
    std::vector<double> incremental_ids;  // one per held-out clean gradient
};

// For each held-out clean gradient h, compute ID(G_norm U {h}); p10/p90 are
// linear-interpolation percentiles of those incremental IDs. Needs at least
// 20 held-out gradients. Sets state.p10/p90.
PercentileCalibration calibrate_percentiles(const PointCloud& held_out_clean,
                                            PerSampleDetectorState& state);

// Incremental ID of the reference cloud augmented with one gradient.
double incremental_id(const PointCloud& g_norm, std::span<const double> gradient,
                      const EstimatorSpec& spec);

// Algorithm "per-sample percentile detection": natural iff
// p10 <= ID(G_norm U {g*}) <= p90 (inclusive).
DetectorVerdict detect_sample(const Network& net, const LabeledSample& s,
                              const PerSampleDetectorState& state, int sample_id = 0);

// DR_a = TP / (TP + FN) * 100 over verdicts on an all-adversarial set.
double detection_rate(const std::vector<DetectorVerdict>& verdicts);

struct ConfusionCounts {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;

    double detection_rate() const;   // percent
    double false_positive_rate() const;  // percent
    double accuracy() const;         // fraction
};

// Tally verdicts against ground truth (true = adversarial).
ConfusionCounts confusion(const std::vector<DetectorVerdict>& verdicts,
                          const std::vector<bool>& truth_adversarial);

}  // namespace gradid
