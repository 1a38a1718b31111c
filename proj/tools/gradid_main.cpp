#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradid/archive.hpp"
#include "gradid/errors.hpp"
#include "gradid/experiment.hpp"
#include "gradid/manifold.hpp"

using namespace gradid;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;  // section.key=value
    std::string out_root;
};

ExperimentConfig load_config(const CommonOptions& opts) {
    ConfigFile file =
        opts.config_path.empty() ? ConfigFile{} : ConfigFile::parse_file(opts.config_path);
    for (const std::string& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects section.key=value, got \"" + kv + "\"");
        }
        file.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return ExperimentConfig::from(file);
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "experiment config file");
    if (config_required) c->required();
    cmd->add_option("--set", opts.overrides, "override a config key (section.key=value)");
    cmd->add_option("--out-root", opts.out_root,
                    "output root (default: $GRADID_OUT_ROOT or the working directory)");
}

void print_run_summary(const RunReport& report) {
    std::printf("config %s\n", report.config_hash.c_str());
    std::printf("model test accuracy: %.4f\n", report.train_test_accuracy);
    std::printf("batch detector: tau=%.6g, %zu/%zu repetitions with >= 4 of 5 clients correct\n",
                report.batch.calibration.tau, report.batch.reps_with_at_least_4_of_5,
                report.batch.repetitions.size());
    std::printf("per-sample detector: P10=%.6g P90=%.6g, clean FPR=%.2f%%\n", report.per_sample.p10,
                report.per_sample.p90, report.per_sample.clean_counts.false_positive_rate());
    for (const PerSampleAttackResult& a : report.per_sample.attacks) {
        std::printf("  %-8s DR_a=%6.2f%%  (fooled %zu/%zu)\n", attack_kind_name(a.kind).c_str(),
                    a.counts.detection_rate(), a.fooled, a.generated);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"intrinsic-dimension screening of parameter-gradient embeddings"};
    app.require_subcommand(1);

    CommonOptions run_opts, train_opts, attack_opts, calibrate_opts, batch_opts, sample_opts,
        eval_opts;

    auto* run_cmd = app.add_subcommand("run", "full pipeline: data, train, both detectors, report");
    add_common(run_cmd, run_opts);

    auto* train_cmd = app.add_subcommand("train", "train the classifier and write the checkpoint");
    add_common(train_cmd, train_opts);

    auto* attack_cmd = app.add_subcommand("attack", "generate one adversarial evaluation set");
    add_common(attack_cmd, attack_opts);
    std::string attack_kind = "fgsm";
    attack_cmd->add_option("--kind", attack_kind, "fgsm|pgd|bim|deepfool|cw")->required();

    auto* calibrate_cmd = app.add_subcommand("calibrate", "calibrate tau and the P10/P90 interval");
    add_common(calibrate_cmd, calibrate_opts);

    auto* batch_cmd = app.add_subcommand("detect-batch", "run the client-screening scenario");
    add_common(batch_cmd, batch_opts);

    auto* sample_cmd = app.add_subcommand("detect-sample", "run the per-sample detector");
    add_common(sample_cmd, sample_opts);

    auto* eval_cmd = app.add_subcommand("evaluate", "recompute metrics.csv from persisted verdicts");
    add_common(eval_cmd, eval_opts);

    auto* manifold_cmd = app.add_subcommand("gen-manifold", "write a known-dimension manifold fixture");
    std::string manifold_kind = "hypercube", manifold_out;
    std::size_t manifold_d = 2, manifold_ambient = 50, manifold_n = 2000;
    double manifold_sigma = 0.0;
    std::uint64_t manifold_seed = 0;
    manifold_cmd->add_option("--kind", manifold_kind, "hypercube|sphere|swiss_roll");
    manifold_cmd->add_option("--d", manifold_d, "intrinsic dimension");
    manifold_cmd->add_option("--ambient", manifold_ambient, "ambient dimension");
    manifold_cmd->add_option("--n", manifold_n, "number of points");
    manifold_cmd->add_option("--sigma", manifold_sigma, "noise standard deviation");
    manifold_cmd->add_option("--seed", manifold_seed, "generator seed");
    manifold_cmd->add_option("--out", manifold_out, "output archive path")->required();

    auto* estimate_cmd = app.add_subcommand("estimate-id", "estimate the ID of an archived cloud");
    std::string estimate_in, estimate_method = "mle", estimate_pca = "none", estimate_json_out;
    std::size_t estimate_k = 10, estimate_rounds = 20, estimate_max_points = 5000;
    double estimate_fraction = 0.8, estimate_trim = 0.10;
    std::uint64_t estimate_seed = 99;
    estimate_cmd->add_option("--in", estimate_in, "input archive (IDSA)")->required();
    estimate_cmd->add_option("--method", estimate_method, "mle|twonn");
    estimate_cmd->add_option("--k", estimate_k, "MLE neighbor count");
    estimate_cmd->add_option("--pca", estimate_pca, "PCA target dims or none");
    estimate_cmd->add_option("--trim", estimate_trim, "TwoNN trim fraction");
    estimate_cmd->add_option("--bootstrap-rounds", estimate_rounds, "0 = plain averaged MLE");
    estimate_cmd->add_option("--bootstrap-fraction", estimate_fraction, "subsample fraction");
    estimate_cmd->add_option("--bootstrap-seed", estimate_seed, "subsample seed");
    estimate_cmd->add_option("--max-points", estimate_max_points, "subsample cap");
    estimate_cmd->add_option("--json", estimate_json_out, "also write the record to this path");

    auto* config_cmd = app.add_subcommand("write-config", "print the default config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            Pipeline pipeline(load_config(run_opts), run_opts.out_root);
            const RunReport report = pipeline.run_all();
            print_run_summary(report);
            std::printf("artifacts: %s\n", pipeline.out_dir().c_str());
        } else if (*train_cmd) {
            Pipeline pipeline(load_config(train_opts), train_opts.out_root);
            Network& net = pipeline.model();
            std::printf("model ready: %zu parameters, test accuracy %.4f\n", net.param_count(),
                        accuracy(net, pipeline.splits().test.samples()));
            std::printf("checkpoint: %s/model.idsn\n", pipeline.out_dir().c_str());
        } else if (*attack_cmd) {
            Pipeline pipeline(load_config(attack_opts), attack_opts.out_root);
            const AttackKind kind = attack_kind_from(attack_kind);
            const auto set = pipeline.eval_attack_set(kind);
            std::size_t fooled = 0;
            for (const auto& adv : set) fooled += adv.fooled ? 1 : 0;
            std::printf("%s: %zu samples, %zu fooled; archive under %s\n", attack_kind.c_str(),
                        set.size(), fooled, pipeline.out_dir().c_str());
        } else if (*calibrate_cmd) {
            Pipeline pipeline(load_config(calibrate_opts), calibrate_opts.out_root);
            const auto batch = pipeline.calibrate_batch_detector();
            const auto sample = pipeline.calibrate_sample_detector();
            pipeline.write_calibration_json(&batch, &sample);
            std::printf("tau=%.6g (balanced accuracy %.3f), P10=%.6g P90=%.6g\n",
                        batch.calibration.tau, batch.calibration.balanced_accuracy,
                        sample.calibration.p10, sample.calibration.p90);
            std::printf("calibration: %s/calibration.json\n", pipeline.out_dir().c_str());
        } else if (*batch_cmd) {
            Pipeline pipeline(load_config(batch_opts), batch_opts.out_root);
            const BatchRunResult result = pipeline.run_batch_detector();
            std::printf("tau=%.6g, %zu/%zu repetitions with >= 4 of 5 clients correct\n",
                        result.calibration.tau, result.reps_with_at_least_4_of_5,
                        result.repetitions.size());
        } else if (*sample_cmd) {
            Pipeline pipeline(load_config(sample_opts), sample_opts.out_root);
            const PerSampleRunResult result = pipeline.run_per_sample_detector();
            std::printf("P10=%.6g P90=%.6g, clean FPR=%.2f%%\n", result.p10, result.p90,
                        result.clean_counts.false_positive_rate());
            for (const PerSampleAttackResult& a : result.attacks) {
                std::printf("  %-8s DR_a=%6.2f%%\n", attack_kind_name(a.kind).c_str(),
                            a.counts.detection_rate());
            }
        } else if (*eval_cmd) {
            Pipeline pipeline(load_config(eval_opts), eval_opts.out_root);
            pipeline.evaluate_from_artifacts();
            std::printf("metrics: %s/metrics.csv\n", pipeline.out_dir().c_str());
        } else if (*manifold_cmd) {
            ManifoldSpec spec;
            spec.kind = manifold_kind_from(manifold_kind);
            spec.intrinsic_d = manifold_d;
            spec.ambient_n = manifold_ambient;
            spec.n_points = manifold_n;
            spec.noise_sigma = manifold_sigma;
            spec.seed = manifold_seed;
            save_archive(manifold_out, TensorArchive::from_cloud(gen_manifold(spec)));
            std::printf("wrote %zu points (d=%zu, ambient=%zu) to %s\n", manifold_n, manifold_d,
                        manifold_ambient, manifold_out.c_str());
        } else if (*estimate_cmd) {
            EstimatorSpec spec;
            spec.method = id_method_from(estimate_method);
            spec.k = estimate_k;
            if (estimate_pca != "none" && !estimate_pca.empty()) {
                spec.pca_dims = static_cast<std::size_t>(std::stoul(estimate_pca));
            }
            spec.twonn_trim = estimate_trim;
            if (estimate_rounds > 0 && spec.method == IdMethod::mle) {
                spec.bootstrap = BootstrapSpec{estimate_rounds, estimate_fraction, estimate_seed};
            }
            spec.max_points = estimate_max_points;
            const TensorArchive archive = load_archive(estimate_in);
            const IdEstimate est = estimate_id(archive.to_cloud(), spec);
            const std::string record = id_estimate_record(est);
            std::printf("%s\n", record.c_str());
            if (!estimate_json_out.empty()) {
                std::ofstream out(estimate_json_out, std::ios::trunc);
                if (!out) throw IoError("cannot open " + estimate_json_out + " for writing");
                out << record << "\n";
            }
        } else if (*config_cmd) {
            std::printf("%s", ExperimentConfig::default_text().c_str());
        }
    } catch (const Error& e) {
        const json record{{"error", e.kind()}, {"message", e.what()}};
        std::fprintf(stderr, "%s\n", record.dump().c_str());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        const json record{{"error", "internal"}, {"message", e.what()}};
        std::fprintf(stderr, "%s\n", record.dump().c_str());
        return 1;
    }
    return 0;
}
