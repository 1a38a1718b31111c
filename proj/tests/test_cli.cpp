#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gradid/config.hpp"
#include "gradid/errors.hpp"
#include "gradid/experiment.hpp"

using namespace gradid;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Small end-to-end configuration: every stage runs, sizes stay tiny.
ConfigFile mini_config() {
    return ConfigFile::parse_string(R"(
[model]
layers = 784,24,10
epochs = 3
batch_size = 16
learning_rate = 0.15
min_test_accuracy = 0.55
seed = 5

[data]
train = 320
test = 100
pool = 520
seed = 7
split_seed = 11

[batch]
clients = 3
client_batch = 60
reference_size = 140
natural_calibration_batches = 4
calibration_batches_per_attack = 1
repetitions = 2
attacks = fgsm,bim

[per_sample]
reference_size = 30
calibration_size = 40
eval_clean = 40
eval_per_attack = 30
attacks = fgsm,bim
seed = 31

[per_sample.estimator]
k = 6

[batch.estimator]
k = 6

[output]
dir = mini
)");
}

}  // namespace

TEST_CASE("config: parsing, sections, comments and fractions") {
    const ConfigFile cfg = ConfigFile::parse_string(
        "top = 1\n"
        "[alpha]\n"
        "key = value   ; trailing comment\n"
        "ratio = 8/255\n"
        "# full-line comment\n"
        "[beta.gamma]\n"
        "x = 2\n");
    CHECK(cfg.get_string("top", "") == "1");
    CHECK(cfg.get_string("alpha.key", "") == "value");
    CHECK(cfg.get_double("alpha.ratio", 0.0) == doctest::Approx(8.0 / 255.0).epsilon(1e-15));
    CHECK(cfg.get_size("beta.gamma.x", 0) == 2);
    CHECK(cfg.get_string("absent", "fallback") == "fallback");

    CHECK_THROWS_AS(ConfigFile::parse_string("[unterminated\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("[s]\n= v\n"), ConfigError);

    ConfigFile with_bad = ConfigFile::parse_string("[alpha]\nratio = 1/0\n");
    CHECK_THROWS_AS(with_bad.get_double("alpha.ratio", 0.0), ConfigError);
}

TEST_CASE("config: unknown keys are rejected by the experiment loader") {
    ConfigFile cfg;
    cfg.set("model.layerz", "784,10");  // typo
    CHECK_THROWS_AS(ExperimentConfig::from(cfg), ConfigError);
}

TEST_CASE("config: overrides land and the hash tracks semantics only") {
    ConfigFile a;
    const ExperimentConfig base = ExperimentConfig::from(a);

    ConfigFile b = ConfigFile::parse_string("# just a comment\n");
    const ExperimentConfig same = ExperimentConfig::from(b);
    CHECK(same.hash_hex == base.hash_hex);

    ConfigFile c;
    c.set("model.epochs", "13");
    const ExperimentConfig changed = ExperimentConfig::from(c);
    CHECK(changed.epochs == 13);
    CHECK(changed.hash_hex != base.hash_hex);
}

TEST_CASE("config: the documented default text resolves to the built-in defaults") {
    const ConfigFile parsed = ConfigFile::parse_string(ExperimentConfig::default_text());
    const ExperimentConfig from_text = ExperimentConfig::from(parsed);
    const ExperimentConfig builtin = ExperimentConfig::from(ConfigFile{});
    CHECK(from_text.hash_hex == builtin.hash_hex);
    CHECK(from_text.canonical() == builtin.canonical());
    // Batch mode inherits the estimator with inverse-mean pooling by default.
    CHECK(from_text.batch_estimator.pooling == IdPooling::inverse_mean);
    CHECK(from_text.sample_estimator.pooling == IdPooling::mean);
    CHECK_FALSE(from_text.sample_estimator.pca_dims.has_value());
    CHECK(from_text.batch_estimator.pca_dims == std::size_t{10});
}

TEST_CASE("config: idx source demands file paths") {
    ConfigFile cfg;
    cfg.set("data.source", "idx");
    CHECK_THROWS_AS(ExperimentConfig::from(cfg), ConfigError);
    cfg.set("data.source", "something");
    CHECK_THROWS_AS(ExperimentConfig::from(cfg), ConfigError);
}

TEST_CASE("out root: explicit argument wins over the environment") {
    setenv("GRADID_OUT_ROOT", "/tmp/gradid_env_root", 1);
    CHECK(resolve_out_root("") == "/tmp/gradid_env_root");
    CHECK(resolve_out_root("/tmp/explicit") == "/tmp/explicit");
    unsetenv("GRADID_OUT_ROOT");
    CHECK(resolve_out_root("") == ".");
}

TEST_CASE("pipeline: two runs from one config are byte-identical") {
    const ExperimentConfig cfg = ExperimentConfig::from(mini_config());

    const fs::path root_a = fs::temp_directory_path() / "gradid_cli_a";
    const fs::path root_b = fs::temp_directory_path() / "gradid_cli_b";
    fs::remove_all(root_a);
    fs::remove_all(root_b);

    Pipeline a(cfg, root_a.string());
    const RunReport report_a = a.run_all();
    Pipeline b(cfg, root_b.string());
    const RunReport report_b = b.run_all();

    for (const char* name : {"metrics.csv", "histograms.csv", "verdicts_batch.jsonl",
                             "verdicts_sample.jsonl", "manifest.json", "calibration.json"}) {
        const std::string bytes_a = read_file(fs::path(a.out_dir()) / name);
        CHECK(bytes_a == read_file(fs::path(b.out_dir()) / name));
        CHECK_FALSE(bytes_a.empty());
    }

    CHECK(report_a.config_hash == cfg.hash_hex);
    CHECK(report_a.train_test_accuracy == report_b.train_test_accuracy);
    CHECK(report_a.batch.calibration.tau == report_b.batch.calibration.tau);
    CHECK(report_a.per_sample.p10 == report_b.per_sample.p10);

    // The metrics CSV carries the config hash and one row per detector/attack.
    const std::string metrics = read_file(fs::path(a.out_dir()) / "metrics.csv");
    CHECK(metrics.find("# config=" + cfg.hash_hex) == 0);
    CHECK(metrics.find("per_sample,fgsm") != std::string::npos);
    CHECK(metrics.find("per_sample,natural") != std::string::npos);
    CHECK(metrics.find("batch,") != std::string::npos);

    // Histograms cover the natural series plus each attack.
    const std::string hist = read_file(fs::path(a.out_dir()) / "histograms.csv");
    CHECK(hist.find("natural_calibration,") != std::string::npos);
    CHECK(hist.find("fgsm,") != std::string::npos);

    // Every persisted artifact exists.
    for (const char* name : {"model.idsn", "report.json", "reference_batch.idsa",
                             "reference_sample.idsa", "adv_fgsm.idsa", "adv_bim.idsa", "train.json"}) {
        CHECK(fs::exists(fs::path(a.out_dir()) / name));
    }

    // report.json is parseable and traces the config hash.
    const auto report = nlohmann::json::parse(read_file(fs::path(a.out_dir()) / "report.json"));
    CHECK(report.at("config_hash").get<std::string>() == cfg.hash_hex);
    CHECK(report.at("per_sample").contains("attacks"));

    // evaluate_from_artifacts reproduces metrics.csv from the verdict files.
    const std::string before = read_file(fs::path(a.out_dir()) / "metrics.csv");
    a.evaluate_from_artifacts();
    CHECK(read_file(fs::path(a.out_dir()) / "metrics.csv") == before);
}

TEST_CASE("pipeline: evaluating verdicts without adversarial records is a metric error") {
    ExperimentConfig cfg = ExperimentConfig::from(mini_config());
    const fs::path root = fs::temp_directory_path() / "gradid_cli_eval";
    fs::remove_all(root);
    Pipeline pipeline(cfg, root.string());

    CHECK_THROWS_AS(pipeline.evaluate_from_artifacts(), IoError);  // nothing persisted yet

    std::ofstream out(fs::path(pipeline.out_dir()) / "verdicts_sample.jsonl");
    out << R"({"detector":"per_sample","subject":0,"truth":"natural","label":"natural",)"
        << R"("statistic":3.0,"reference":3.0,"low":2.5,"high":3.5})"
        << "\n";
    out.close();
    CHECK_THROWS_AS(pipeline.evaluate_from_artifacts(), MetricError);
}
