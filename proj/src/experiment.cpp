#include "gradid/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gradid/archive.hpp"
#include "gradid/checkpoint.hpp"
#include "gradid/digits.hpp"
#include "gradid/errors.hpp"
#include "gradid/idx.hpp"
#include "gradid/rng.hpp"
#include "gradid/stats.hpp"

namespace gradid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string attack_list_string(const std::vector<AttackKind>& kinds) {
    std::string out;
    for (const AttackKind k : kinds) {
        if (!out.empty()) out += ",";
        out += attack_kind_name(k);
    }
    return out;
}

std::vector<AttackKind> parse_attack_list(const std::string& text, const std::string& key) {
    std::vector<AttackKind> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        out.push_back(attack_kind_from(item.substr(b, e - b + 1)));
    }
    if (out.empty()) throw ConfigError(key + ": empty attack list");
    return out;
}

EstimatorSpec parse_estimator(const ConfigFile& file, const std::string& prefix, EstimatorSpec base) {
    EstimatorSpec spec = base;
    spec.method = id_method_from(file.get_string(prefix + ".method", id_method_name(base.method)));
    spec.k = file.get_size(prefix + ".k", base.k);
    spec.pooling = id_pooling_from(file.get_string(prefix + ".pooling", id_pooling_name(base.pooling)));
    spec.pca_dims = file.get_optional_size(prefix + ".pca_dims", base.pca_dims);
    spec.twonn_trim = file.get_double(prefix + ".twonn_trim", base.twonn_trim);
    const std::size_t rounds =
        file.get_size(prefix + ".bootstrap_rounds", base.bootstrap ? base.bootstrap->rounds : 0);
    if (rounds == 0) {
        spec.bootstrap.reset();
    } else {
        BootstrapSpec bs = base.bootstrap ? *base.bootstrap : BootstrapSpec{};
        bs.rounds = rounds;
        bs.fraction = file.get_double(prefix + ".bootstrap_fraction", bs.fraction);
        bs.seed = file.get_u64(prefix + ".bootstrap_seed", bs.seed);
        spec.bootstrap = bs;
    }
    spec.max_points = file.get_size(prefix + ".max_points", base.max_points);
    spec.dedupe_tol = file.get_double(prefix + ".dedupe_tol", base.dedupe_tol);
    return spec;
}

void append_estimator_keys(std::vector<std::string>& keys, const std::string& prefix) {
    for (const char* k : {"method", "k", "pooling", "pca_dims", "twonn_trim", "bootstrap_rounds",
                          "bootstrap_fraction", "bootstrap_seed", "max_points", "dedupe_tol"}) {
        keys.push_back(prefix + "." + k);
    }
}

void canonical_estimator(std::vector<std::pair<std::string, std::string>>& kv, const std::string& prefix,
                         const EstimatorSpec& spec) {
    kv.emplace_back(prefix + ".method", id_method_name(spec.method));
    kv.emplace_back(prefix + ".k", std::to_string(spec.k));
    kv.emplace_back(prefix + ".pooling", id_pooling_name(spec.pooling));
    kv.emplace_back(prefix + ".pca_dims", spec.pca_dims ? std::to_string(*spec.pca_dims) : "none");
    kv.emplace_back(prefix + ".twonn_trim", fmt(spec.twonn_trim, "%.17g"));
    kv.emplace_back(prefix + ".bootstrap_rounds",
                    std::to_string(spec.bootstrap ? spec.bootstrap->rounds : 0));
    kv.emplace_back(prefix + ".bootstrap_fraction",
                    fmt(spec.bootstrap ? spec.bootstrap->fraction : 0.0, "%.17g"));
    kv.emplace_back(prefix + ".bootstrap_seed",
                    std::to_string(spec.bootstrap ? spec.bootstrap->seed : 0));
    kv.emplace_back(prefix + ".max_points", std::to_string(spec.max_points));
    kv.emplace_back(prefix + ".dedupe_tol", fmt(spec.dedupe_tol, "%.17g"));
}

json estimate_json(const IdEstimate& est) {
    return json{{"method", id_method_name(est.method)},
                {"value", est.value},
                {"stderr", est.stderr_value},
                {"n_points", est.n_points},
                {"params",
                 json{{"k_or_m", est.k_or_m}, {"bootstrap_rounds", est.bootstrap_rounds}}}};
}

// Draw `count` distinct entries from `base` (partial Fisher-Yates).
std::vector<std::size_t> draw_without_replacement(Rng& rng, std::vector<std::size_t> base,
                                                  std::size_t count) {
    if (count > base.size()) throw ParameterError("draw larger than its pool segment");
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.index(base.size() - i);
        std::swap(base[i], base[j]);
    }
    base.resize(count);
    return base;
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> v(end - begin);
    std::iota(v.begin(), v.end(), begin);
    return v;
}

Network with_scope(const Network& net, std::size_t scope) {
    Network copy = net;
    copy.set_gradient_scope(scope);
    return copy;
}

std::uint64_t dataset_content_hash(const Dataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor& t : ds.inputs) {
        h = fnv1a64(t.data().data(), t.data().size() * sizeof(double), h);
    }
    for (int l : ds.labels) {
        h = fnv1a64(&l, sizeof(l), h);
    }
    return h;
}

std::string verdict_label_name(const DetectorVerdict& v) {
    if (v.error) return "error";
    return v.label == VerdictLabel::natural ? "natural" : "adversarial";
}

json verdict_json(const std::string& config_hash, const std::string& detector,
                  const DetectorVerdict& v, const std::string& truth, int rep = -1) {
    json rec{{"config", config_hash},  {"detector", detector},       {"subject", v.subject_id},
             {"truth", truth},         {"label", verdict_label_name(v)}, {"statistic", v.statistic},
             {"raw_estimate", v.raw_estimate}, {"reference", v.reference},
             {"low", v.threshold_low}, {"high", v.threshold_high}};
    if (rep >= 0) rec["rep"] = rep;
    if (v.error) rec["error"] = *v.error;
    return rec;
}

struct HistogramBins {
    double lo = 0.0;
    double width = 1.0;
    std::size_t count = 1;
};

// Freedman-Diaconis width on the pooled values, shared across all series so
// the emitted distributions are comparable.
HistogramBins freedman_diaconis(const std::vector<double>& pooled) {
    HistogramBins bins;
    if (pooled.empty()) return bins;
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    bins.lo = lo;
    if (hi <= lo) {
        bins.width = 1.0;
        bins.count = 1;
        return bins;
    }
    const double iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
    if (width <= 0.0) width = (hi - lo) / 10.0;
    bins.count = std::min<std::size_t>(200, std::max<std::size_t>(1, static_cast<std::size_t>(
                                                                         std::ceil((hi - lo) / width))));
    bins.width = (hi - lo) / static_cast<double>(bins.count);
    return bins;
}

std::vector<std::size_t> bin_counts(const HistogramBins& bins, const std::vector<double>& values) {
    std::vector<std::size_t> counts(bins.count, 0);
    for (double v : values) {
        auto idx = static_cast<std::ptrdiff_t>((v - bins.lo) / bins.width);
        idx = std::max<std::ptrdiff_t>(0, std::min<std::ptrdiff_t>(idx, static_cast<std::ptrdiff_t>(bins.count) - 1));
        ++counts[static_cast<std::size_t>(idx)];
    }
    return counts;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace

const std::map<std::string, double>& reference_detection_rates_cifar10() {
    static const std::map<std::string, double> rates{
        {"fgsm", 96.4}, {"pgd", 100.0}, {"bim", 98.4}, {"deepfool", 92.7}, {"cw", 100.0}};
    return rates;
}

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.estimator.method = IdMethod::mle;
    cfg.estimator.k = 10;
    cfg.estimator.pca_dims = 10;
    cfg.estimator.bootstrap = BootstrapSpec{20, 0.8, 99};

    AttackConfig fgsm_cfg;
    fgsm_cfg.kind = AttackKind::fgsm;
    fgsm_cfg.epsilon = 0.008;
    cfg.attacks[AttackKind::fgsm] = fgsm_cfg;

    AttackConfig pgd_cfg;
    pgd_cfg.kind = AttackKind::pgd;
    pgd_cfg.epsilon = 0.01;
    pgd_cfg.alpha = 0.02;
    pgd_cfg.steps = 40;
    pgd_cfg.random_start = true;
    pgd_cfg.seed = 17;
    cfg.attacks[AttackKind::pgd] = pgd_cfg;

    AttackConfig bim_cfg;
    bim_cfg.kind = AttackKind::bim;
    bim_cfg.epsilon = 0.03;
    bim_cfg.alpha = 0.01;
    bim_cfg.steps = 10;
    cfg.attacks[AttackKind::bim] = bim_cfg;

    AttackConfig df_cfg;
    df_cfg.kind = AttackKind::deepfool;
    df_cfg.steps = 20;
    cfg.attacks[AttackKind::deepfool] = df_cfg;

    AttackConfig cw_cfg;
    cw_cfg.kind = AttackKind::cw_l2;
    cw_cfg.c = 2.0;
    cw_cfg.kappa = 2.0;
    cw_cfg.steps = 500;
    cw_cfg.lr = 0.01;
    cfg.attacks[AttackKind::cw_l2] = cw_cfg;

    cfg.batch_estimator = cfg.estimator;
    cfg.batch_estimator.pooling = IdPooling::inverse_mean;
    // Augmenting a fixed reference with one gradient: skip the per-call PCA
    // refit and resampling so the only moving part is the augmented point.
    cfg.sample_estimator = cfg.estimator;
    cfg.sample_estimator.pca_dims.reset();
    cfg.sample_estimator.bootstrap.reset();
    cfg.batch_gradient_scope = cfg.gradient_scope;
    cfg.sample_gradient_scope = cfg.gradient_scope;

    const std::string canon = cfg.canonical();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon.data(), canon.size())));
    cfg.hash_hex = buf;
    return cfg;
}

ExperimentConfig ExperimentConfig::from(const ConfigFile& file) {
    std::vector<std::string> known{
        "model.layers", "model.gradient_scope", "model.seed", "model.epochs", "model.batch_size",
        "model.learning_rate", "model.min_test_accuracy",
        "data.source", "data.idx_images", "data.idx_labels", "data.train", "data.test", "data.pool",
        "data.seed", "data.split_seed", "data.pixel_noise",
        "attack.fgsm.epsilon",
        "attack.pgd.epsilon", "attack.pgd.alpha", "attack.pgd.steps", "attack.pgd.random_start",
        "attack.pgd.seed",
        "attack.bim.epsilon", "attack.bim.alpha", "attack.bim.steps",
        "attack.deepfool.steps",
        "attack.cw.c", "attack.cw.kappa", "attack.cw.steps", "attack.cw.lr",
        "batch.clients", "batch.client_batch", "batch.reference_size",
        "batch.natural_calibration_batches", "batch.calibration_batches_per_attack",
        "batch.repetitions", "batch.epsilon", "batch.alpha", "batch.steps", "batch.seed",
        "batch.gradient_scope", "batch.attacks", "batch.use_predicted_labels",
        "per_sample.reference_size", "per_sample.calibration_size", "per_sample.eval_clean",
        "per_sample.eval_per_attack", "per_sample.epsilon", "per_sample.alpha", "per_sample.steps",
        "per_sample.fooled_only", "per_sample.seed",
        "per_sample.gradient_scope", "per_sample.attacks", "per_sample.use_predicted_labels",
        "output.dir",
    };
    append_estimator_keys(known, "estimator");
    append_estimator_keys(known, "batch.estimator");
    append_estimator_keys(known, "per_sample.estimator");
    file.require_known_keys(known);

    ExperimentConfig cfg = defaults();
    cfg.layers = file.get_size_list("model.layers", cfg.layers);
    cfg.gradient_scope = file.get_size("model.gradient_scope", cfg.gradient_scope);
    cfg.model_seed = file.get_u64("model.seed", cfg.model_seed);
    cfg.epochs = file.get_size("model.epochs", cfg.epochs);
    cfg.batch_size = file.get_size("model.batch_size", cfg.batch_size);
    cfg.learning_rate = file.get_double("model.learning_rate", cfg.learning_rate);
    cfg.min_test_accuracy = file.get_double("model.min_test_accuracy", cfg.min_test_accuracy);

    cfg.data_source = file.get_string("data.source", cfg.data_source);
    if (cfg.data_source != "synthetic" && cfg.data_source != "idx") {
        throw ConfigError("data.source must be synthetic or idx");
    }
    cfg.idx_images = file.get_string("data.idx_images", cfg.idx_images);
    cfg.idx_labels = file.get_string("data.idx_labels", cfg.idx_labels);
    cfg.train_size = file.get_size("data.train", cfg.train_size);
    cfg.test_size = file.get_size("data.test", cfg.test_size);
    cfg.pool_size = file.get_size("data.pool", cfg.pool_size);
    cfg.data_seed = file.get_u64("data.seed", cfg.data_seed);
    cfg.split_seed = file.get_u64("data.split_seed", cfg.split_seed);
    cfg.pixel_noise = file.get_double("data.pixel_noise", cfg.pixel_noise);

    cfg.estimator = parse_estimator(file, "estimator", cfg.estimator);

    auto& fg = cfg.attacks[AttackKind::fgsm];
    fg.epsilon = file.get_double("attack.fgsm.epsilon", fg.epsilon);
    auto& pg = cfg.attacks[AttackKind::pgd];
    pg.epsilon = file.get_double("attack.pgd.epsilon", pg.epsilon);
    pg.alpha = file.get_double("attack.pgd.alpha", pg.alpha);
    pg.steps = static_cast<unsigned>(file.get_size("attack.pgd.steps", pg.steps));
    pg.random_start = file.get_bool("attack.pgd.random_start", pg.random_start);
    pg.seed = file.get_u64("attack.pgd.seed", pg.seed);
    auto& bm = cfg.attacks[AttackKind::bim];
    bm.epsilon = file.get_double("attack.bim.epsilon", bm.epsilon);
    bm.alpha = file.get_double("attack.bim.alpha", bm.alpha);
    bm.steps = static_cast<unsigned>(file.get_size("attack.bim.steps", bm.steps));
    auto& df = cfg.attacks[AttackKind::deepfool];
    df.steps = static_cast<unsigned>(file.get_size("attack.deepfool.steps", df.steps));
    auto& cw = cfg.attacks[AttackKind::cw_l2];
    cw.c = file.get_double("attack.cw.c", cw.c);
    cw.kappa = file.get_double("attack.cw.kappa", cw.kappa);
    cw.steps = static_cast<unsigned>(file.get_size("attack.cw.steps", cw.steps));
    cw.lr = file.get_double("attack.cw.lr", cw.lr);

    cfg.clients = file.get_size("batch.clients", cfg.clients);
    cfg.client_batch = file.get_size("batch.client_batch", cfg.client_batch);
    cfg.batch_reference_size = file.get_size("batch.reference_size", cfg.batch_reference_size);
    cfg.natural_calibration_batches =
        file.get_size("batch.natural_calibration_batches", cfg.natural_calibration_batches);
    cfg.calibration_batches_per_attack =
        file.get_size("batch.calibration_batches_per_attack", cfg.calibration_batches_per_attack);
    cfg.repetitions = file.get_size("batch.repetitions", cfg.repetitions);
    cfg.batch_epsilon = file.get_double("batch.epsilon", cfg.batch_epsilon);
    cfg.batch_alpha = file.get_double("batch.alpha", cfg.batch_alpha);
    cfg.batch_steps = file.get_size("batch.steps", cfg.batch_steps);
    cfg.batch_seed = file.get_u64("batch.seed", cfg.batch_seed);
    cfg.batch_gradient_scope = file.get_size("batch.gradient_scope", cfg.gradient_scope);
    cfg.batch_use_predicted_labels =
        file.get_bool("batch.use_predicted_labels", cfg.batch_use_predicted_labels);
    // Batch screening compares whole-batch estimates, so it defaults to the
    // low-variance pooling unless the config says otherwise.
    EstimatorSpec batch_base = cfg.estimator;
    if (!file.has("estimator.pooling")) batch_base.pooling = IdPooling::inverse_mean;
    cfg.batch_estimator = parse_estimator(file, "batch.estimator", batch_base);
    if (file.has("batch.attacks")) {
        cfg.batch_attacks = parse_attack_list(file.get_string("batch.attacks", ""), "batch.attacks");
    }

    cfg.sample_reference_size = file.get_size("per_sample.reference_size", cfg.sample_reference_size);
    cfg.sample_calibration_size =
        file.get_size("per_sample.calibration_size", cfg.sample_calibration_size);
    cfg.eval_clean = file.get_size("per_sample.eval_clean", cfg.eval_clean);
    cfg.eval_per_attack = file.get_size("per_sample.eval_per_attack", cfg.eval_per_attack);
    cfg.sample_epsilon = file.get_double("per_sample.epsilon", cfg.sample_epsilon);
    cfg.sample_alpha = file.get_double("per_sample.alpha", cfg.sample_alpha);
    cfg.sample_steps = file.get_size("per_sample.steps", cfg.sample_steps);
    cfg.fooled_only = file.get_bool("per_sample.fooled_only", cfg.fooled_only);
    cfg.per_sample_seed = file.get_u64("per_sample.seed", cfg.per_sample_seed);
    cfg.sample_gradient_scope = file.get_size("per_sample.gradient_scope", cfg.gradient_scope);
    cfg.sample_use_predicted_labels =
        file.get_bool("per_sample.use_predicted_labels", cfg.sample_use_predicted_labels);
    EstimatorSpec sample_base = cfg.estimator;
    if (!file.has("estimator.pca_dims")) sample_base.pca_dims.reset();
    if (!file.has("estimator.bootstrap_rounds")) sample_base.bootstrap.reset();
    cfg.sample_estimator = parse_estimator(file, "per_sample.estimator", sample_base);
    if (file.has("per_sample.attacks")) {
        cfg.sample_attacks =
            parse_attack_list(file.get_string("per_sample.attacks", ""), "per_sample.attacks");
    }

    cfg.output_dir = file.get_string("output.dir", cfg.output_dir);

    if (cfg.layers.size() < 2) throw ConfigError("model.layers needs at least two widths");
    if (cfg.clients < 1) throw ConfigError("batch.clients must be positive");
    if (cfg.data_source == "idx" && (cfg.idx_images.empty() || cfg.idx_labels.empty())) {
        throw ConfigError("data.source = idx requires data.idx_images and data.idx_labels");
    }

    const std::string canon = cfg.canonical();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon.data(), canon.size())));
    cfg.hash_hex = buf;
    return cfg;
}

std::string ExperimentConfig::canonical() const {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string layer_text;
    for (std::size_t w : layers) {
        if (!layer_text.empty()) layer_text += ",";
        layer_text += std::to_string(w);
    }
    kv.emplace_back("model.layers", layer_text);
    kv.emplace_back("model.gradient_scope", std::to_string(gradient_scope));
    kv.emplace_back("model.seed", std::to_string(model_seed));
    kv.emplace_back("model.epochs", std::to_string(epochs));
    kv.emplace_back("model.batch_size", std::to_string(batch_size));
    kv.emplace_back("model.learning_rate", fmt(learning_rate, "%.17g"));
    kv.emplace_back("model.min_test_accuracy", fmt(min_test_accuracy, "%.17g"));

    kv.emplace_back("data.source", data_source);
    kv.emplace_back("data.idx_images", idx_images);
    kv.emplace_back("data.idx_labels", idx_labels);
    kv.emplace_back("data.train", std::to_string(train_size));
    kv.emplace_back("data.test", std::to_string(test_size));
    kv.emplace_back("data.pool", std::to_string(pool_size));
    kv.emplace_back("data.seed", std::to_string(data_seed));
    kv.emplace_back("data.split_seed", std::to_string(split_seed));
    kv.emplace_back("data.pixel_noise", fmt(pixel_noise, "%.17g"));

    canonical_estimator(kv, "estimator", estimator);
    canonical_estimator(kv, "batch.estimator", batch_estimator);
    canonical_estimator(kv, "per_sample.estimator", sample_estimator);

    const auto& fg = attacks.at(AttackKind::fgsm);
    kv.emplace_back("attack.fgsm.epsilon", fmt(fg.epsilon, "%.17g"));
    const auto& pg = attacks.at(AttackKind::pgd);
    kv.emplace_back("attack.pgd.epsilon", fmt(pg.epsilon, "%.17g"));
    kv.emplace_back("attack.pgd.alpha", fmt(pg.alpha, "%.17g"));
    kv.emplace_back("attack.pgd.steps", std::to_string(pg.steps));
    kv.emplace_back("attack.pgd.random_start", pg.random_start ? "true" : "false");
    kv.emplace_back("attack.pgd.seed", std::to_string(pg.seed));
    const auto& bm = attacks.at(AttackKind::bim);
    kv.emplace_back("attack.bim.epsilon", fmt(bm.epsilon, "%.17g"));
    kv.emplace_back("attack.bim.alpha", fmt(bm.alpha, "%.17g"));
    kv.emplace_back("attack.bim.steps", std::to_string(bm.steps));
    const auto& df = attacks.at(AttackKind::deepfool);
    kv.emplace_back("attack.deepfool.steps", std::to_string(df.steps));
    const auto& cw = attacks.at(AttackKind::cw_l2);
    kv.emplace_back("attack.cw.c", fmt(cw.c, "%.17g"));
    kv.emplace_back("attack.cw.kappa", fmt(cw.kappa, "%.17g"));
    kv.emplace_back("attack.cw.steps", std::to_string(cw.steps));
    kv.emplace_back("attack.cw.lr", fmt(cw.lr, "%.17g"));

    kv.emplace_back("batch.clients", std::to_string(clients));
    kv.emplace_back("batch.client_batch", std::to_string(client_batch));
    kv.emplace_back("batch.reference_size", std::to_string(batch_reference_size));
    kv.emplace_back("batch.natural_calibration_batches", std::to_string(natural_calibration_batches));
    kv.emplace_back("batch.calibration_batches_per_attack",
                    std::to_string(calibration_batches_per_attack));
    kv.emplace_back("batch.repetitions", std::to_string(repetitions));
    kv.emplace_back("batch.epsilon", fmt(batch_epsilon, "%.17g"));
    kv.emplace_back("batch.alpha", fmt(batch_alpha, "%.17g"));
    kv.emplace_back("batch.steps", std::to_string(batch_steps));
    kv.emplace_back("batch.seed", std::to_string(batch_seed));
    kv.emplace_back("batch.gradient_scope", std::to_string(batch_gradient_scope));
    kv.emplace_back("batch.use_predicted_labels", batch_use_predicted_labels ? "true" : "false");
    kv.emplace_back("batch.attacks", attack_list_string(batch_attacks));

    kv.emplace_back("per_sample.reference_size", std::to_string(sample_reference_size));
    kv.emplace_back("per_sample.calibration_size", std::to_string(sample_calibration_size));
    kv.emplace_back("per_sample.eval_clean", std::to_string(eval_clean));
    kv.emplace_back("per_sample.eval_per_attack", std::to_string(eval_per_attack));
    kv.emplace_back("per_sample.epsilon", fmt(sample_epsilon, "%.17g"));
    kv.emplace_back("per_sample.alpha", fmt(sample_alpha, "%.17g"));
    kv.emplace_back("per_sample.steps", std::to_string(sample_steps));
    kv.emplace_back("per_sample.fooled_only", fooled_only ? "true" : "false");
    kv.emplace_back("per_sample.seed", std::to_string(per_sample_seed));
    kv.emplace_back("per_sample.gradient_scope", std::to_string(sample_gradient_scope));
    kv.emplace_back("per_sample.use_predicted_labels", sample_use_predicted_labels ? "true" : "false");
    kv.emplace_back("per_sample.attacks", attack_list_string(sample_attacks));

    kv.emplace_back("output.dir", output_dir);

    std::sort(kv.begin(), kv.end());
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

std::string resolve_out_root(const std::string& cli_out_root) {
    if (!cli_out_root.empty()) return cli_out_root;
    if (const char* env = std::getenv("GRADID_OUT_ROOT"); env && *env) return env;
    return ".";
}

Pipeline::Pipeline(ExperimentConfig cfg, std::string out_root) : cfg_(std::move(cfg)) {
    fs::path dir = fs::path(resolve_out_root(out_root)) / cfg_.output_dir / cfg_.hash_hex.substr(0, 8);
    fs::create_directories(dir);
    out_dir_ = dir.string();
}

SplitSet& Pipeline::splits() {
    if (have_splits_) return splits_;

    Dataset full;
    if (cfg_.data_source == "synthetic") {
        DigitsSpec spec;
        spec.count = cfg_.train_size + cfg_.test_size + cfg_.pool_size;
        spec.seed = cfg_.data_seed;
        spec.pixel_noise = cfg_.pixel_noise;
        full = gen_digits(spec);
    } else {
        full = load_idx(cfg_.idx_images, cfg_.idx_labels);
        if (full.size() < cfg_.train_size + cfg_.test_size + cfg_.pool_size) {
            throw ConfigError("IDX dataset holds " + std::to_string(full.size()) +
                              " samples, fewer than train + test + pool");
        }
    }

    const double n = static_cast<double>(full.size());
    const std::size_t rest =
        full.size() - cfg_.train_size - cfg_.test_size - cfg_.pool_size;
    std::vector<double> fractions{static_cast<double>(cfg_.train_size) / n,
                                  static_cast<double>(cfg_.test_size) / n,
                                  static_cast<double>(cfg_.pool_size) / n};
    if (rest > 0) fractions.push_back(static_cast<double>(rest) / n);
    auto parts = split(full, fractions, cfg_.split_seed);
    splits_.train = std::move(parts[0]);
    splits_.test = std::move(parts[1]);
    splits_.pool = std::move(parts[2]);
    have_splits_ = true;
    write_manifest();
    return splits_;
}

Network& Pipeline::model() {
    if (have_model_) return model_;
    const fs::path path = fs::path(out_dir_) / "model.idsn";
    SplitSet& data = splits();
    if (fs::exists(path)) {
        model_ = load_checkpoint(path.string());
        model_.set_gradient_scope(cfg_.gradient_scope);
        have_model_ = true;
        return model_;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Network net(cfg_.layers, cfg_.model_seed, cfg_.gradient_scope);
    TrainConfig tc{cfg_.epochs, cfg_.batch_size, cfg_.learning_rate, cfg_.model_seed};
    TrainStats stats;
    model_ = train(std::move(net), data.train.samples(), tc, &stats);
    have_model_ = true;
    const double train_acc = accuracy(model_, data.train.samples());
    const double test_acc = accuracy(model_, data.test.samples());
    if (test_acc < cfg_.min_test_accuracy) {
        throw TrainingError("held-out accuracy " + fmt(test_acc) + " below the " +
                            fmt(cfg_.min_test_accuracy) + " gate for downstream experiments");
    }
    save_checkpoint(path.string(), model_);

    json rec{{"config_hash", cfg_.hash_hex},
             {"epoch_mean_loss", stats.epoch_mean_loss},
             {"train_accuracy", train_acc},
             {"test_accuracy", test_acc},
             {"seconds", elapsed_since(t0)}};
    write_text_file(fs::path(out_dir_) / "train.json", rec.dump(2) + "\n");
    return model_;
}

std::vector<AdversarialExample> Pipeline::eval_attack_set(AttackKind kind) {
    SplitSet& data = splits();
    Network net = with_scope(model(), cfg_.sample_gradient_scope);

    // Attack base: a fixed slice of the pool, disjoint from reference,
    // calibration and clean-eval slices (see run_per_sample_detector).
    const std::size_t base_begin =
        cfg_.sample_reference_size + cfg_.sample_calibration_size + cfg_.eval_clean;
    if (base_begin + cfg_.eval_per_attack > data.pool.size()) {
        throw ConfigError("pool too small for the per-sample evaluation slices");
    }

    const fs::path path = fs::path(out_dir_) / ("adv_" + attack_kind_name(kind) + ".idsa");
    if (fs::exists(path)) {
        const TensorArchive archive = load_archive(path.string());
        std::vector<AdversarialExample> out;
        out.reserve(archive.count());
        for (std::size_t i = 0; i < archive.count(); ++i) {
            AdversarialExample adv;
            adv.x_adv = archive.tensor_at(i);
            const LabeledSample base = data.pool.sample(base_begin + i);
            adv.delta_linf = linf_distance(adv.x_adv.data(), base.input.data());
            adv.delta_l2 = l2_distance(adv.x_adv.data(), base.input.data());
            adv.fooled = archive.flags && (*archive.flags)[i] != 0;
            out.push_back(std::move(adv));
        }
        return out;
    }

    AttackConfig atk = cfg_.attacks.at(kind);
    if (kind == AttackKind::fgsm || kind == AttackKind::pgd || kind == AttackKind::bim) {
        atk.epsilon = cfg_.sample_epsilon;
    }
    if (kind == AttackKind::pgd || kind == AttackKind::bim) {
        atk.alpha = cfg_.sample_alpha;
        atk.steps = static_cast<unsigned>(cfg_.sample_steps);
    }
    std::vector<AdversarialExample> out;
    out.reserve(cfg_.eval_per_attack);
    TensorArchive archive;
    archive.labels.emplace();
    archive.flags.emplace();
    for (std::size_t i = 0; i < cfg_.eval_per_attack; ++i) {
        const LabeledSample base = data.pool.sample(base_begin + i);
        if (kind == AttackKind::pgd) {
            atk.seed = mix64(cfg_.attacks.at(kind).seed ^ mix64(0x9D00 + i));
        }
        AdversarialExample adv = run_attack(net, base, atk);
        if (archive.shape.empty()) archive.shape = adv.x_adv.shape();
        archive.data.insert(archive.data.end(), adv.x_adv.data().begin(), adv.x_adv.data().end());
        archive.labels->push_back(static_cast<std::uint32_t>(base.label));
        archive.flags->push_back(adv.fooled ? 1 : 0);
        out.push_back(std::move(adv));
    }
    save_archive(path.string(), archive);
    return out;
}

namespace {

// Attack parameters for the client simulation: the batch-mode epsilon/alpha/
// steps apply to the budgeted attacks, the rest keep their table defaults.
AttackConfig batch_attack_config(const ExperimentConfig& cfg, AttackKind kind, std::uint64_t salt) {
    AttackConfig atk = cfg.attacks.at(kind);
    if (kind == AttackKind::fgsm || kind == AttackKind::pgd || kind == AttackKind::bim) {
        atk.epsilon = cfg.batch_epsilon;
    }
    if (kind == AttackKind::pgd || kind == AttackKind::bim) {
        atk.alpha = cfg.batch_alpha;
        atk.steps = static_cast<unsigned>(cfg.batch_steps);
    }
    if (kind == AttackKind::pgd) atk.seed = mix64(cfg.batch_seed ^ salt);
    return atk;
}

std::vector<LabeledSample> attacked_batch(const Network& net, const ExperimentConfig& cfg,
                                          const std::vector<LabeledSample>& base, AttackKind kind,
                                          std::uint64_t salt) {
    std::vector<LabeledSample> out;
    out.reserve(base.size());
    const AttackConfig atk = batch_attack_config(cfg, kind, salt);
    for (const LabeledSample& s : base) {
        AdversarialExample adv = run_attack(net, s, atk);
        out.emplace_back(std::move(adv.x_adv), s.label);
    }
    return out;
}

struct BatchSegments {
    std::vector<std::size_t> calibration;
    std::vector<std::size_t> evaluation;
};

BatchSegments batch_segments(const ExperimentConfig& cfg, std::size_t pool_n) {
    if (cfg.batch_reference_size + 2 * cfg.client_batch > pool_n) {
        throw ConfigError("pool too small for batch-mode reference, calibration and evaluation");
    }
    const std::size_t cal_begin = cfg.batch_reference_size;
    const std::size_t cal_end = cal_begin + (pool_n - cal_begin) * 45 / 100;
    BatchSegments seg{iota_range(cal_begin, cal_end), iota_range(cal_end, pool_n)};
    if (seg.calibration.size() < cfg.client_batch || seg.evaluation.size() < cfg.client_batch) {
        throw ConfigError("pool segments smaller than one client batch");
    }
    return seg;
}

}  // namespace

BatchCalibrationArtifacts Pipeline::calibrate_batch_detector() {
    SplitSet& data = splits();
    Network net = with_scope(model(), cfg_.batch_gradient_scope);
    const BatchSegments seg = batch_segments(cfg_, data.pool.size());

    BatchCalibrationArtifacts art;
    art.reference = build_reference(
        net, data.pool.samples(iota_range(0, cfg_.batch_reference_size)), cfg_.batch_estimator);
    save_archive((fs::path(out_dir_) / "reference_batch.idsa").string(),
                 TensorArchive::from_cloud(art.reference.cloud));

    art.state.id_natural = art.reference.id;
    art.state.spec = cfg_.batch_estimator;
    art.state.use_predicted_labels = cfg_.batch_use_predicted_labels;

    std::vector<ClientBatch> calibration;
    Rng rng(mix64(cfg_.batch_seed ^ 0xCA11B7A7E5ULL));
    int id = 0;
    for (std::size_t b = 0; b < cfg_.natural_calibration_batches; ++b) {
        ClientBatch batch;
        batch.client_id = id++;
        batch.samples = data.pool.samples(draw_without_replacement(rng, seg.calibration, cfg_.client_batch));
        batch.truth = "natural";
        calibration.push_back(std::move(batch));
    }
    for (const AttackKind kind : cfg_.batch_attacks) {
        for (std::size_t b = 0; b < cfg_.calibration_batches_per_attack; ++b) {
            ClientBatch batch;
            batch.client_id = id++;
            const auto base =
                data.pool.samples(draw_without_replacement(rng, seg.calibration, cfg_.client_batch));
            batch.samples = attacked_batch(net, cfg_, base, kind, 0xCA1 + b);
            batch.truth = "adversarial:" + attack_kind_name(kind);
            calibration.push_back(std::move(batch));
        }
    }
    art.calibration = calibrate_tau(net, calibration, art.state);
    return art;
}

BatchRunResult Pipeline::run_batch_detector() {
    const auto t0 = std::chrono::steady_clock::now();
    SplitSet& data = splits();
    Network net = with_scope(model(), cfg_.batch_gradient_scope);
    const BatchSegments seg = batch_segments(cfg_, data.pool.size());

    BatchRunResult result;
    BatchCalibrationArtifacts art = calibrate_batch_detector();
    result.id_natural = art.reference.id;
    result.calibration = art.calibration;
    write_calibration_json(&art, nullptr);
    const BatchDetectorState& state = art.state;

    // Seeded repetitions of the K-client scenario: client 0 clean, the rest
    // one attack kind each.
    std::ofstream verdict_file(fs::path(out_dir_) / "verdicts_batch.jsonl", std::ios::trunc);
    if (!verdict_file) throw IoError("cannot open verdicts_batch.jsonl for writing");
    for (std::size_t rep = 0; rep < cfg_.repetitions; ++rep) {
        Rng rng(mix64(cfg_.batch_seed ^ (0xE9E1ULL + rep * 0x9E3779B97F4A7C15ULL)));
        BatchRepetition repetition;
        repetition.rep = rep;

        std::vector<ClientBatch> clients;
        for (std::size_t c = 0; c < cfg_.clients; ++c) {
            ClientBatch batch;
            batch.client_id = static_cast<int>(c);
            const auto base =
                data.pool.samples(draw_without_replacement(rng, seg.evaluation, cfg_.client_batch));
            if (c == 0) {
                batch.samples = base;
                batch.truth = "natural";
            } else {
                const AttackKind kind = cfg_.batch_attacks[(c - 1) % cfg_.batch_attacks.size()];
                batch.samples = attacked_batch(net, cfg_, base, kind, mix64(0xE7A1 + rep * 131 + c));
                batch.truth = "adversarial:" + attack_kind_name(kind);
            }
            clients.push_back(std::move(batch));
        }

        repetition.verdicts = detect_clients(net, clients, state);
        for (std::size_t c = 0; c < clients.size(); ++c) {
            const std::string truth = *clients[c].truth;
            repetition.truths.push_back(truth);
            const DetectorVerdict& v = repetition.verdicts[c];
            const bool truth_adv = clients[c].truth_adversarial();
            if (!v.error) {
                const bool said_adv = v.label == VerdictLabel::adversarial;
                if (said_adv == truth_adv) ++repetition.correct;
                const std::string key = truth_adv ? truth.substr(truth.find(':') + 1) : "natural";
                ConfusionCounts& cc = result.per_attack[key];
                if (truth_adv) {
                    (said_adv ? cc.tp : cc.fn) += 1;
                } else {
                    (said_adv ? cc.fp : cc.tn) += 1;
                }
            }
            verdict_file << verdict_json(cfg_.hash_hex, "batch", v, truth, static_cast<int>(rep)).dump()
                         << "\n";
        }
        if (repetition.correct >= 4) ++result.reps_with_at_least_4_of_5;
        result.repetitions.push_back(std::move(repetition));
    }
    if (!verdict_file) throw IoError("write failed on verdicts_batch.jsonl");

    result.seconds = elapsed_since(t0);
    return result;
}

SampleCalibrationArtifacts Pipeline::calibrate_sample_detector() {
    SplitSet& data = splits();
    Network net = with_scope(model(), cfg_.sample_gradient_scope);

    const std::size_t needed = cfg_.sample_reference_size + cfg_.sample_calibration_size +
                               cfg_.eval_clean + cfg_.eval_per_attack;
    if (needed > data.pool.size()) {
        throw ConfigError("pool holds " + std::to_string(data.pool.size()) +
                          " samples but the per-sample slices need " + std::to_string(needed));
    }

    // Contiguous disjoint slices of the (already shuffled) pool.
    const std::size_t ref_end = cfg_.sample_reference_size;
    const std::size_t cal_end = ref_end + cfg_.sample_calibration_size;
    const auto ref_idx = iota_range(0, ref_end);
    const auto cal_idx = iota_range(ref_end, cal_end);

    SampleCalibrationArtifacts art;
    art.reference = build_reference(net, data.pool.samples(ref_idx), cfg_.sample_estimator);
    save_archive((fs::path(out_dir_) / "reference_sample.idsa").string(),
                 TensorArchive::from_cloud(art.reference.cloud));

    art.state.g_norm = art.reference.cloud;
    art.state.id_norm = art.reference.id;
    art.state.spec = cfg_.sample_estimator;
    art.state.use_predicted_labels = cfg_.sample_use_predicted_labels;

    // Calibration mirrors the detection-time gradient path, including the
    // predicted-label extension when enabled.
    const PointCloud cal_gradients =
        gradient_cloud(net, data.pool.samples(cal_idx), cfg_.sample_use_predicted_labels);
    art.calibration = calibrate_percentiles(cal_gradients, art.state);
    return art;
}

PerSampleRunResult Pipeline::run_per_sample_detector() {
    const auto t0 = std::chrono::steady_clock::now();
    SplitSet& data = splits();
    Network net = with_scope(model(), cfg_.sample_gradient_scope);

    PerSampleRunResult result;
    SampleCalibrationArtifacts art = calibrate_sample_detector();
    write_calibration_json(nullptr, &art);
    const PerSampleDetectorState& state = art.state;
    result.id_norm = art.reference.id;
    result.p10 = art.calibration.p10;
    result.p90 = art.calibration.p90;
    result.calibration_ids = art.calibration.incremental_ids;

    const std::size_t clean_begin = cfg_.sample_reference_size + cfg_.sample_calibration_size;
    const auto clean_idx = iota_range(clean_begin, clean_begin + cfg_.eval_clean);

    std::ofstream verdict_file(fs::path(out_dir_) / "verdicts_sample.jsonl", std::ios::trunc);
    if (!verdict_file) throw IoError("cannot open verdicts_sample.jsonl for writing");

    std::vector<bool> clean_truth;
    for (const std::size_t i : clean_idx) {
        const DetectorVerdict v = detect_sample(net, data.pool.sample(i), state, static_cast<int>(i));
        result.clean_eval_ids.push_back(v.statistic);
        verdict_file << verdict_json(cfg_.hash_hex, "per_sample", v, "natural").dump() << "\n";
        result.clean_verdicts.push_back(v);
        clean_truth.push_back(false);
    }
    result.clean_counts = confusion(result.clean_verdicts, clean_truth);

    for (const AttackKind kind : cfg_.sample_attacks) {
        PerSampleAttackResult attack_result;
        attack_result.kind = kind;
        const std::vector<AdversarialExample> adversarial = eval_attack_set(kind);
        attack_result.generated = adversarial.size();
        const std::size_t base_begin = clean_begin + cfg_.eval_clean;
        std::vector<bool> truth;
        for (std::size_t i = 0; i < adversarial.size(); ++i) {
            const AdversarialExample& adv = adversarial[i];
            if (adv.fooled) ++attack_result.fooled;
            if (cfg_.fooled_only && !adv.fooled) continue;
            const int label = data.pool.labels[base_begin + i];
            const DetectorVerdict v = detect_sample(net, LabeledSample(adv.x_adv, label), state,
                                                    static_cast<int>(base_begin + i));
            attack_result.incremental_ids.push_back(v.statistic);
            verdict_file << verdict_json(cfg_.hash_hex, "per_sample", v,
                                         "adversarial:" + attack_kind_name(kind))
                                .dump()
                         << "\n";
            attack_result.verdicts.push_back(v);
            truth.push_back(true);
        }
        attack_result.evaluated = attack_result.verdicts.size();
        attack_result.counts = confusion(attack_result.verdicts, truth);
        result.attacks.push_back(std::move(attack_result));
    }
    if (!verdict_file) throw IoError("write failed on verdicts_sample.jsonl");

    result.seconds = elapsed_since(t0);
    return result;
}

RunReport Pipeline::run_all() {
    RunReport report;
    report.config_hash = cfg_.hash_hex;

    auto t0 = std::chrono::steady_clock::now();
    splits();
    report.stage_seconds["dataset"] = elapsed_since(t0);

    t0 = std::chrono::steady_clock::now();
    model();
    report.stage_seconds["train"] = elapsed_since(t0);
    report.train_test_accuracy = accuracy(model_, splits_.test.samples());

    report.batch = run_batch_detector();
    report.stage_seconds["batch_detector"] = report.batch.seconds;

    report.per_sample = run_per_sample_detector();
    report.stage_seconds["per_sample_detector"] = report.per_sample.seconds;

    write_metrics(report);
    write_histograms(report.per_sample);
    write_report(report);
    return report;
}

void Pipeline::write_manifest() {
    const auto split_entry = [](const Dataset& ds) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(dataset_content_hash(ds)));
        return json{{"count", ds.size()}, {"content_hash", buf}};
    };
    json manifest{{"config_hash", cfg_.hash_hex},
                  {"source", cfg_.data_source},
                  {"data_seed", cfg_.data_seed},
                  {"split_seed", cfg_.split_seed},
                  {"splits", json{{"train", split_entry(splits_.train)},
                                  {"test", split_entry(splits_.test)},
                                  {"pool", split_entry(splits_.pool)}}}};
    if (cfg_.data_source == "idx") {
        manifest["idx_images"] = cfg_.idx_images;
        manifest["idx_labels"] = cfg_.idx_labels;
    }
    write_text_file(fs::path(out_dir_) / "manifest.json", manifest.dump(2) + "\n");
}

void Pipeline::write_metrics(const RunReport& report) {
    std::string csv = "# config=" + cfg_.hash_hex + "\n";
    csv += "detector,attack,n,tp,fn,fp,tn,dr_a,fpr,accuracy,reference_dr\n";

    const auto row = [&](const std::string& detector, const std::string& attack,
                         const ConfusionCounts& c) {
        const std::size_t n = c.tp + c.fn + c.fp + c.tn;
        if (n == 0) return;
        csv += detector + "," + attack + "," + std::to_string(n) + "," + std::to_string(c.tp) + "," +
               std::to_string(c.fn) + "," + std::to_string(c.fp) + "," + std::to_string(c.tn) + ",";
        csv += (c.tp + c.fn > 0) ? fmt(c.detection_rate()) : "";
        csv += ",";
        csv += (c.fp + c.tn > 0) ? fmt(c.false_positive_rate()) : "";
        csv += ",";
        csv += fmt(c.accuracy());
        csv += ",";
        const auto& reference = reference_detection_rates_cifar10();
        if (const auto it = reference.find(attack); it != reference.end() && detector == "per_sample") {
            csv += fmt(it->second);
        }
        csv += "\n";
    };

    for (const auto& [attack, counts] : report.batch.per_attack) {
        row("batch", attack, counts);
    }
    std::map<std::string, ConfusionCounts> sample_rows;
    sample_rows["natural"] = report.per_sample.clean_counts;
    for (const PerSampleAttackResult& a : report.per_sample.attacks) {
        sample_rows[attack_kind_name(a.kind)] = a.counts;
    }
    for (const auto& [attack, counts] : sample_rows) {
        row("per_sample", attack, counts);
    }
    write_text_file(fs::path(out_dir_) / "metrics.csv", csv);
}

void Pipeline::write_histograms(const PerSampleRunResult& result) {
    std::vector<double> pooled = result.calibration_ids;
    pooled.insert(pooled.end(), result.clean_eval_ids.begin(), result.clean_eval_ids.end());
    for (const PerSampleAttackResult& a : result.attacks) {
        pooled.insert(pooled.end(), a.incremental_ids.begin(), a.incremental_ids.end());
    }
    const HistogramBins bins = freedman_diaconis(pooled);

    std::string csv = "# config=" + cfg_.hash_hex + "\n";
    csv += "series,bin_lo,bin_hi,count\n";
    const auto emit = [&](const std::string& series, const std::vector<double>& values) {
        const auto counts = bin_counts(bins, values);
        for (std::size_t b = 0; b < counts.size(); ++b) {
            csv += series + "," + fmt(bins.lo + bins.width * static_cast<double>(b)) + "," +
                   fmt(bins.lo + bins.width * static_cast<double>(b + 1)) + "," +
                   std::to_string(counts[b]) + "\n";
        }
    };
    emit("natural_calibration", result.calibration_ids);
    emit("natural_eval", result.clean_eval_ids);
    for (const PerSampleAttackResult& a : result.attacks) {
        emit(attack_kind_name(a.kind), a.incremental_ids);
    }
    write_text_file(fs::path(out_dir_) / "histograms.csv", csv);
}

void Pipeline::write_report(const RunReport& report) {
    json doc;
    doc["config_hash"] = report.config_hash;
    doc["stage_seconds"] = report.stage_seconds;
    doc["train"] = json{{"test_accuracy", report.train_test_accuracy}};

    json batch;
    batch["estimator_gradient_scope"] = cfg_.batch_gradient_scope;
    batch["id_natural"] = estimate_json(report.batch.id_natural);
    batch["tau"] = report.batch.calibration.tau;
    batch["calibration"] = json{{"balanced_accuracy", report.batch.calibration.balanced_accuracy},
                                {"natural_deltas", report.batch.calibration.natural_deltas},
                                {"adversarial_deltas", report.batch.calibration.adversarial_deltas},
                                {"warnings", report.batch.calibration.warnings}};
    // Signed gap ID_natural - ID(G_k), aggregated per client type. The
    // detectors use |Delta| and interval membership, so the direction is
    // reported, never asserted.
    std::map<std::string, std::pair<double, std::size_t>> signed_gaps;
    for (const BatchRepetition& rep : report.batch.repetitions) {
        for (std::size_t c = 0; c < rep.verdicts.size(); ++c) {
            if (rep.verdicts[c].error) continue;
            const std::string truth = rep.truths[c];
            const std::string key =
                truth.rfind("adversarial", 0) == 0 ? truth.substr(truth.find(':') + 1) : "natural";
            auto& [sum, count] = signed_gaps[key];
            sum += report.batch.id_natural.value - rep.verdicts[c].raw_estimate;
            ++count;
        }
    }
    json gap_json;
    for (const auto& [key, agg] : signed_gaps) {
        if (agg.second > 0) gap_json[key] = agg.first / static_cast<double>(agg.second);
    }
    batch["mean_signed_gap_id_natural_minus_id_client"] = std::move(gap_json);

    json reps = json::array();
    for (const BatchRepetition& rep : report.batch.repetitions) {
        json clients = json::array();
        for (std::size_t c = 0; c < rep.verdicts.size(); ++c) {
            const DetectorVerdict& v = rep.verdicts[c];
            json entry{{"client", v.subject_id}, {"truth", rep.truths[c]},
                       {"label", verdict_label_name(v)}, {"delta", v.statistic}};
            if (v.error) entry["error"] = *v.error;
            clients.push_back(std::move(entry));
        }
        reps.push_back(json{{"rep", rep.rep}, {"correct", rep.correct}, {"clients", std::move(clients)}});
    }
    batch["repetitions"] = std::move(reps);
    batch["reps_with_at_least_4_of_5"] = report.batch.reps_with_at_least_4_of_5;
    doc["batch"] = std::move(batch);

    json per_sample;
    per_sample["estimator_gradient_scope"] = cfg_.sample_gradient_scope;
    {
        std::vector<double> pooled = report.per_sample.calibration_ids;
        pooled.insert(pooled.end(), report.per_sample.clean_eval_ids.begin(),
                      report.per_sample.clean_eval_ids.end());
        for (const PerSampleAttackResult& a : report.per_sample.attacks) {
            pooled.insert(pooled.end(), a.incremental_ids.begin(), a.incremental_ids.end());
        }
        const HistogramBins bins = freedman_diaconis(pooled);
        per_sample["histogram"] = json{{"rule", "freedman-diaconis"},
                                       {"bin_count", bins.count},
                                       {"bin_width", bins.width},
                                       {"lo", bins.lo}};
    }
    per_sample["id_norm"] = estimate_json(report.per_sample.id_norm);
    per_sample["p10"] = report.per_sample.p10;
    per_sample["p90"] = report.per_sample.p90;
    per_sample["clean"] = json{{"n", report.per_sample.clean_counts.fp + report.per_sample.clean_counts.tn},
                               {"fp", report.per_sample.clean_counts.fp},
                               {"fpr", report.per_sample.clean_counts.false_positive_rate()}};
    json attacks = json::array();
    const auto& reference = reference_detection_rates_cifar10();
    for (const PerSampleAttackResult& a : report.per_sample.attacks) {
        json entry{{"attack", attack_kind_name(a.kind)},
                   {"generated", a.generated},
                   {"evaluated", a.evaluated},
                   {"fooled", a.fooled},
                   {"tp", a.counts.tp},
                   {"fn", a.counts.fn}};
        if (a.counts.tp + a.counts.fn > 0) entry["dr_a"] = a.counts.detection_rate();
        if (const auto it = reference.find(attack_kind_name(a.kind)); it != reference.end()) {
            entry["reference_dr_cifar10"] = it->second;
        }
        attacks.push_back(std::move(entry));
    }
    per_sample["attacks"] = std::move(attacks);
    doc["per_sample"] = std::move(per_sample);

    write_text_file(fs::path(out_dir_) / "report.json", doc.dump(2) + "\n");
}

void Pipeline::evaluate_from_artifacts() {
    const fs::path batch_path = fs::path(out_dir_) / "verdicts_batch.jsonl";
    const fs::path sample_path = fs::path(out_dir_) / "verdicts_sample.jsonl";
    if (!fs::exists(batch_path) && !fs::exists(sample_path)) {
        throw IoError("no verdict files under " + out_dir_ + "; run the detectors first");
    }

    std::map<std::string, ConfusionCounts> batch_counts;
    std::map<std::string, ConfusionCounts> sample_counts;
    std::size_t adversarial_records = 0;

    const auto consume = [&](const fs::path& path, std::map<std::string, ConfusionCounts>& into) {
        if (!fs::exists(path)) return;
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json rec = json::parse(line);
            if (rec.contains("error")) continue;
            const std::string truth = rec.at("truth").get<std::string>();
            const bool truth_adv = truth.rfind("adversarial", 0) == 0;
            const bool said_adv = rec.at("label").get<std::string>() == "adversarial";
            const std::string key = truth_adv ? truth.substr(truth.find(':') + 1) : "natural";
            ConfusionCounts& c = into[key];
            if (truth_adv) {
                ++adversarial_records;
                (said_adv ? c.tp : c.fn) += 1;
            } else {
                (said_adv ? c.fp : c.tn) += 1;
            }
        }
    };
    consume(batch_path, batch_counts);
    consume(sample_path, sample_counts);
    if (adversarial_records == 0) {
        throw MetricError("verdict files contain no adversarial records; detection rate undefined");
    }

    std::string csv = "# config=" + cfg_.hash_hex + "\n";
    csv += "detector,attack,n,tp,fn,fp,tn,dr_a,fpr,accuracy,reference_dr\n";
    const auto row = [&](const std::string& detector, const std::string& attack,
                         const ConfusionCounts& c) {
        const std::size_t n = c.tp + c.fn + c.fp + c.tn;
        if (n == 0) return;
        csv += detector + "," + attack + "," + std::to_string(n) + "," + std::to_string(c.tp) + "," +
               std::to_string(c.fn) + "," + std::to_string(c.fp) + "," + std::to_string(c.tn) + ",";
        csv += (c.tp + c.fn > 0) ? fmt(c.detection_rate()) : "";
        csv += ",";
        csv += (c.fp + c.tn > 0) ? fmt(c.false_positive_rate()) : "";
        csv += ",";
        csv += fmt(c.accuracy());
        csv += ",";
        const auto& reference = reference_detection_rates_cifar10();
        if (const auto it = reference.find(attack); it != reference.end() && detector == "per_sample") {
            csv += fmt(it->second);
        }
        csv += "\n";
    };
    for (const auto& [attack, counts] : batch_counts) row("batch", attack, counts);
    for (const auto& [attack, counts] : sample_counts) row("per_sample", attack, counts);
    write_text_file(fs::path(out_dir_) / "metrics.csv", csv);
}

void Pipeline::write_calibration_json(const BatchCalibrationArtifacts* batch,
                                      const SampleCalibrationArtifacts* sample) {
    const fs::path path = fs::path(out_dir_) / "calibration.json";
    json doc;
    if (fs::exists(path)) {
        std::ifstream in(path);
        try {
            in >> doc;
        } catch (const json::exception&) {
            doc = json::object();
        }
    }
    doc["config_hash"] = cfg_.hash_hex;
    if (batch) {
        doc["batch"] = json{{"id_natural", estimate_json(batch->reference.id)},
                            {"tau", batch->calibration.tau},
                            {"balanced_accuracy", batch->calibration.balanced_accuracy},
                            {"natural_deltas", batch->calibration.natural_deltas},
                            {"adversarial_deltas", batch->calibration.adversarial_deltas},
                            {"warnings", batch->calibration.warnings}};
    }
    if (sample) {
        doc["per_sample"] = json{{"id_norm", estimate_json(sample->reference.id)},
                                 {"p10", sample->calibration.p10},
                                 {"p90", sample->calibration.p90},
                                 {"incremental_ids", sample->calibration.incremental_ids}};
    }
    write_text_file(path, doc.dump(2) + "\n");
}

std::string id_estimate_record(const IdEstimate& est) { return estimate_json(est).dump(); }

std::string ExperimentConfig::default_text() {
    return R"([model]
layers = 784,256,128,10
gradient_scope = 1
seed = 1
epochs = 12
batch_size = 32
learning_rate = 0.1
min_test_accuracy = 0.90

[data]
source = synthetic        ; synthetic | idx
idx_images =
idx_labels =
train = 2000
test = 500
pool = 2000
seed = 7
split_seed = 11
pixel_noise = 0.04

[estimator]
method = mle              ; mle | twonn
k = 10
pooling = mean            ; mean | inverse_mean (local-to-global pooling)
pca_dims = 10             ; empty or none = estimate on raw embeddings
twonn_trim = 0.10
bootstrap_rounds = 20     ; 0 = plain averaged MLE
bootstrap_fraction = 0.8
bootstrap_seed = 99
max_points = 5000
dedupe_tol = 1e-12

[attack.fgsm]
epsilon = 0.008

[attack.pgd]
epsilon = 0.01
alpha = 0.02
steps = 40
random_start = true
seed = 17

[attack.bim]
epsilon = 0.03
alpha = 0.01
steps = 10

[attack.deepfool]
steps = 20

[attack.cw]
c = 2
kappa = 2
steps = 500
lr = 0.01

[batch]
clients = 5
client_batch = 200
reference_size = 600
natural_calibration_batches = 10
calibration_batches_per_attack = 1
repetitions = 10
epsilon = 8/255
alpha = 2/255
steps = 10
seed = 21
attacks = fgsm,pgd,bim,deepfool
use_predicted_labels = false ; extension: gradients at predicted labels

[batch.estimator]      ; inherits [estimator] except where set here
pooling = inverse_mean ; batch screening compares whole-batch estimates


[per_sample]
reference_size = 50
calibration_size = 200
eval_clean = 200
eval_per_attack = 200
epsilon = 0.1             ; budgeted-attack strength for this scenario
alpha = 0.025
steps = 10
fooled_only = false
seed = 31
attacks = fgsm,pgd,bim,deepfool,cw
use_predicted_labels = false ; extension: gradients at predicted labels

[per_sample.estimator] ; inherits [estimator] except where set here
pca_dims = none        ; augmentation must be the only moving part
bootstrap_rounds = 0

[output]
dir = out
)";
}

}  // namespace gradid
