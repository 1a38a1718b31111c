#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gradid/attacks.hpp"
#include "gradid/config.hpp"
#include "gradid/dataset.hpp"
#include "gradid/detector.hpp"
#include "gradid/estimators.hpp"
#include "gradid/network.hpp"

namespace gradid {

// Resolved experiment settings. Every seed is explicit; the canonical
// serialization of all resolved keys produces the config hash recorded in
// each output artifact.
struct ExperimentConfig {
    // [model]
    std::vector<std::size_t> layers{784, 256, 128, 10};
    std::size_t gradient_scope = 1;
    std::uint64_t model_seed = 1;
    std::size_t epochs = 12;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    double min_test_accuracy = 0.90;

    // [data]
    std::string data_source = "synthetic";  // synthetic | idx
    std::string idx_images;
    std::string idx_labels;
    std::size_t train_size = 2000;
    std::size_t test_size = 500;
    std::size_t pool_size = 2000;
    std::uint64_t data_seed = 7;
    std::uint64_t split_seed = 11;
    double pixel_noise = 0.04;

    // [estimator] defaults; per-detector overrides below
    EstimatorSpec estimator;

    // [attack.*] Table-style parameters per kind
    std::map<AttackKind, AttackConfig> attacks;

    // [batch] client-screening simulation
    std::size_t clients = 5;
    std::size_t client_batch = 200;
    std::size_t batch_reference_size = 600;
    std::size_t natural_calibration_batches = 10;
    std::size_t calibration_batches_per_attack = 1;
    std::size_t repetitions = 10;
    double batch_epsilon = 8.0 / 255.0;
    double batch_alpha = 2.0 / 255.0;
    std::size_t batch_steps = 10;
    std::uint64_t batch_seed = 21;
    std::size_t batch_gradient_scope = 1;
    bool batch_use_predicted_labels = false;
    EstimatorSpec batch_estimator;
    std::vector<AttackKind> batch_attacks{AttackKind::fgsm, AttackKind::pgd, AttackKind::bim,
                                          AttackKind::deepfool};

    // [per_sample]
    std::size_t sample_reference_size = 50;
    std::size_t sample_calibration_size = 200;
    std::size_t eval_clean = 200;
    std::size_t eval_per_attack = 200;
    double sample_epsilon = 0.1;   // budgeted-attack strength for this scenario
    double sample_alpha = 0.025;
    std::size_t sample_steps = 10;
    bool fooled_only = false;
    std::uint64_t per_sample_seed = 31;
    std::size_t sample_gradient_scope = 1;
    bool sample_use_predicted_labels = false;
    EstimatorSpec sample_estimator;
    std::vector<AttackKind> sample_attacks{AttackKind::fgsm, AttackKind::pgd, AttackKind::bim,
                                           AttackKind::deepfool, AttackKind::cw_l2};

    // [output]
    std::string output_dir = "out";

    std::string hash_hex;

    static ExperimentConfig defaults();
    static ExperimentConfig from(const ConfigFile& file);

    // Canonical "key = value" serialization of every resolved setting.
    std::string canonical() const;
    // Default config text with comments, for --write-config.
    static std::string default_text();
};

struct SplitSet {
    Dataset train;
    Dataset test;
    Dataset pool;
};

struct BatchRepetition {
    std::size_t rep = 0;
    std::vector<DetectorVerdict> verdicts;
    std::vector<std::string> truths;
    std::size_t correct = 0;
};

struct BatchRunResult {
    IdEstimate id_natural;
    TauCalibration calibration;
    std::vector<BatchRepetition> repetitions;
    std::size_t reps_with_at_least_4_of_5 = 0;
    std::map<std::string, ConfusionCounts> per_attack;  // across repetitions
    double seconds = 0.0;
};

struct PerSampleAttackResult {
    AttackKind kind = AttackKind::fgsm;
    std::size_t generated = 0;
    std::size_t evaluated = 0;
    std::size_t fooled = 0;
    ConfusionCounts counts;
    std::vector<DetectorVerdict> verdicts;
    std::vector<double> incremental_ids;
};

struct PerSampleRunResult {
    IdEstimate id_norm;
    double p10 = 0.0;
    double p90 = 0.0;
    std::vector<double> calibration_ids;
    std::vector<double> clean_eval_ids;
    ConfusionCounts clean_counts;
    std::vector<DetectorVerdict> clean_verdicts;
    std::vector<PerSampleAttackResult> attacks;
    double seconds = 0.0;
};

struct RunReport {
    std::string config_hash;
    double train_test_accuracy = 0.0;
    std::map<std::string, double> stage_seconds;
    BatchRunResult batch;
    PerSampleRunResult per_sample;
};

struct BatchCalibrationArtifacts {
    Reference reference;
    BatchDetectorState state;
    TauCalibration calibration;
};

struct SampleCalibrationArtifacts {
    Reference reference;
    PerSampleDetectorState state;
    PercentileCalibration calibration;
};

// Pipeline stages. Artifacts land under <out_root>/<hash8>/ and stages reuse
// them when present, so runs are resumable and independently auditable.
class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, std::string out_root);

    const ExperimentConfig& config() const { return cfg_; }
    const std::string& out_dir() const { return out_dir_; }

    SplitSet& splits();
    Network& model();

    BatchCalibrationArtifacts calibrate_batch_detector();
    SampleCalibrationArtifacts calibrate_sample_detector();
    void write_calibration_json(const BatchCalibrationArtifacts* batch,
                                const SampleCalibrationArtifacts* sample);

    BatchRunResult run_batch_detector();
    PerSampleRunResult run_per_sample_detector();

    // Generates (or reloads) the per-sample evaluation attack set for `kind`.
    std::vector<AdversarialExample> eval_attack_set(AttackKind kind);

    RunReport run_all();

    // Recomputes metrics.csv from persisted verdict files.
    void evaluate_from_artifacts();

private:
    void write_manifest();
    void write_report(const RunReport& report);
    void write_metrics(const RunReport& report);
    void write_histograms(const PerSampleRunResult& result);

    ExperimentConfig cfg_;
    std::string out_dir_;
    bool have_splits_ = false;
    bool have_model_ = false;
    SplitSet splits_;
    Network model_;
};

// JSON record {method, value, stderr, n_points, params} for one estimate.
std::string id_estimate_record(const IdEstimate& est);

// Reference Table-style detection rates reported by the method's original
// per-sample evaluation; emitted alongside ours for context.
const std::map<std::string, double>& reference_detection_rates_cifar10();

std::string resolve_out_root(const std::string& cli_out_root);

}  // namespace gradid
