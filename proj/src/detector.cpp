#include "gradid/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradid/errors.hpp"
#include "gradid/stats.hpp"

namespace gradid {

bool ClientBatch::truth_adversarial() const {
    if (!truth) throw CalibrationError("client batch carries no ground truth");
    if (*truth == "natural") return false;
    if (truth->rfind("adversarial", 0) == 0) return true;
    throw CalibrationError("unrecognized truth tag \"" + *truth + "\"");
}

PointCloud gradient_cloud(const Network& net, const std::vector<LabeledSample>& samples,
                          bool predicted) {
    PointCloud cloud(net.embedding_dim());
    for (const LabeledSample& s : samples) {
        if (predicted) {
            cloud.add(param_gradient(net, LabeledSample(s.input, predict(net, s.input))));
        } else {
            cloud.add(param_gradient(net, s));
        }
    }
    return cloud;
}

Reference build_reference(const Network& net, const std::vector<LabeledSample>& samples,
                          const EstimatorSpec& spec) {
    if (samples.empty()) throw InsufficientPointsError("reference sample set is empty");
    Reference ref;
    ref.cloud = gradient_cloud(net, samples);
    ref.id = estimate_id(ref.cloud, spec);
    return ref;
}

TauCalibration calibrate_tau_from_deltas(std::vector<double> natural_deltas,
                                         std::vector<double> adversarial_deltas) {
    TauCalibration cal;
    cal.natural_deltas = std::move(natural_deltas);
    cal.adversarial_deltas = std::move(adversarial_deltas);
    if (cal.natural_deltas.empty() || cal.adversarial_deltas.empty()) {
        throw CalibrationError("calibration needs both natural and adversarial batches");
    }

    double max_delta = 0.0;
    for (double d : cal.natural_deltas) max_delta = std::max(max_delta, d);
    for (double d : cal.adversarial_deltas) max_delta = std::max(max_delta, d);

    const auto balanced_accuracy = [&](double tau) {
        std::size_t tn = 0, tp = 0;
        for (double d : cal.natural_deltas) {
            if (batch_natural(d, tau)) ++tn;
        }
        for (double d : cal.adversarial_deltas) {
            if (!batch_natural(d, tau)) ++tp;
        }
        const double tnr = static_cast<double>(tn) / static_cast<double>(cal.natural_deltas.size());
        const double tpr = static_cast<double>(tp) / static_cast<double>(cal.adversarial_deltas.size());
        return 0.5 * (tnr + tpr);
    };

    cal.tau = 0.0;
    cal.balanced_accuracy = balanced_accuracy(0.0);
    for (int j = 1; j <= 100; ++j) {
        const double tau = (max_delta * static_cast<double>(j)) / 100.0;
        const double acc = balanced_accuracy(tau);
        if (acc > cal.balanced_accuracy) {  // strict: ties keep the smallest tau
            cal.balanced_accuracy = acc;
            cal.tau = tau;
        }
    }
    if (cal.balanced_accuracy <= 0.5) {
        cal.warnings.push_back("calibration could not separate natural from adversarial deltas");
    }
    return cal;
}

TauCalibration calibrate_tau(const Network& net, const std::vector<ClientBatch>& labeled_batches,
                             BatchDetectorState& state) {
    std::vector<double> natural, adversarial;
    for (const ClientBatch& batch : labeled_batches) {
        const IdEstimate id =
            estimate_id(gradient_cloud(net, batch.samples, state.use_predicted_labels), state.spec);
        const double delta = std::fabs(id.value - state.id_natural.value);
        (batch.truth_adversarial() ? adversarial : natural).push_back(delta);
    }
    TauCalibration cal = calibrate_tau_from_deltas(std::move(natural), std::move(adversarial));
    state.tau = cal.tau;
    state.calibrated = true;
    return cal;
}

std::vector<DetectorVerdict> detect_clients(const Network& net, const std::vector<ClientBatch>& batches,
                                            const BatchDetectorState& state) {
    if (!state.calibrated) throw CalibrationError("batch detector used before tau calibration");
    std::vector<DetectorVerdict> verdicts;
    verdicts.reserve(batches.size());
    for (const ClientBatch& batch : batches) {
        DetectorVerdict v;
        v.subject_id = batch.client_id;
        v.reference = state.id_natural.value;
        v.threshold_low = 0.0;
        v.threshold_high = state.tau;
        try {
            const IdEstimate id =
                estimate_id(gradient_cloud(net, batch.samples, state.use_predicted_labels), state.spec);
            v.raw_estimate = id.value;
            v.statistic = std::fabs(id.value - state.id_natural.value);
            v.label = batch_natural(v.statistic, state.tau) ? VerdictLabel::natural
                                                            : VerdictLabel::adversarial;
        } catch (const Error& e) {
            v.error = std::string(e.kind()) + ": " + e.what();
        }
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

double incremental_id(const PointCloud& g_norm, std::span<const double> gradient,
                      const EstimatorSpec& spec) {
    PointCloud augmented = g_norm;
    augmented.add(gradient);
    return estimate_id(augmented, spec).value;
}

PercentileCalibration calibrate_percentiles(const PointCloud& held_out_clean,
                                            PerSampleDetectorState& state) {
    if (held_out_clean.size() < 20) {
        throw CalibrationError("percentile calibration needs at least 20 held-out samples, got " +
                               std::to_string(held_out_clean.size()));
    }
    if (held_out_clean.dim() != state.g_norm.dim()) {
        throw DimensionError("held-out gradients do not match the reference dimension");
    }
    PercentileCalibration cal;
    cal.incremental_ids.reserve(held_out_clean.size());
    for (std::size_t i = 0; i < held_out_clean.size(); ++i) {
        cal.incremental_ids.push_back(incremental_id(state.g_norm, held_out_clean.point(i), state.spec));
    }
    std::vector<double> sorted = cal.incremental_ids;
    std::sort(sorted.begin(), sorted.end());
    cal.p10 = percentile_sorted(sorted, 10.0);
    cal.p90 = percentile_sorted(sorted, 90.0);

    state.p10 = cal.p10;
    state.p90 = cal.p90;
    state.calibrated = true;
    return cal;
}

DetectorVerdict detect_sample(const Network& net, const LabeledSample& s,
                              const PerSampleDetectorState& state, int sample_id) {
    if (!state.calibrated) throw CalibrationError("per-sample detector used before percentile calibration");
    const std::vector<double> gradient =
        state.use_predicted_labels ? param_gradient(net, LabeledSample(s.input, predict(net, s.input)))
                                   : param_gradient(net, s);
    DetectorVerdict v;
    v.subject_id = sample_id;
    v.reference = state.id_norm.value;
    v.threshold_low = state.p10;
    v.threshold_high = state.p90;
    v.statistic = incremental_id(state.g_norm, gradient, state.spec);
    v.raw_estimate = v.statistic;
    v.label = sample_natural(v.statistic, state.p10, state.p90) ? VerdictLabel::natural
                                                                : VerdictLabel::adversarial;
    return v;
}

double detection_rate(const std::vector<DetectorVerdict>& verdicts) {
    std::size_t tp = 0, fn = 0;
    for (const DetectorVerdict& v : verdicts) {
        if (v.error) continue;
        if (v.label == VerdictLabel::adversarial) {
            ++tp;
        } else {
            ++fn;
        }
    }
    if (tp + fn == 0) throw MetricError("detection rate of an empty verdict set is undefined");
    return 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double ConfusionCounts::detection_rate() const {
    if (tp + fn == 0) throw MetricError("detection rate undefined without adversarial ground truth");
    return 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double ConfusionCounts::false_positive_rate() const {
    if (fp + tn == 0) throw MetricError("false positive rate undefined without natural ground truth");
    return 100.0 * static_cast<double>(fp) / static_cast<double>(fp + tn);
}

double ConfusionCounts::accuracy() const {
    const std::size_t total = tp + fn + fp + tn;
    if (total == 0) throw MetricError("accuracy of an empty verdict set is undefined");
    return static_cast<double>(tp + tn) / static_cast<double>(total);
}

ConfusionCounts confusion(const std::vector<DetectorVerdict>& verdicts,
                          const std::vector<bool>& truth_adversarial) {
    if (verdicts.size() != truth_adversarial.size()) {
        throw ParameterError("verdicts and ground truth differ in length");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (verdicts[i].error) continue;
        const bool said_adv = verdicts[i].label == VerdictLabel::adversarial;
        if (truth_adversarial[i]) {
            (said_adv ? c.tp : c.fn) += 1;
        } else {
            (said_adv ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

}  // namespace gradid
