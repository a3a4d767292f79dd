// Command-line front end: run, suite, prep, selftest.

#include <label_remedy/eval_cli.hpp>
#include <label_remedy/prep.hpp>
#include <label_remedy/testing/oracles.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lr = label_remedy;
namespace fs = std::filesystem;

namespace {

// Flags that map one-to-one onto task settings. Only flags given on the
// command line are collected, so they override the config file.
struct SettingFlags {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        options.emplace_back(key, app.add_option(flag, values[key], help));
    }

    lr::Settings collect() const {
        lr::Settings out;
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) out[key] = values.at(key);
        }
        return out;
    }
};

void add_task_flags(CLI::App& app, SettingFlags& flags) {
    flags.add(app, "--name", "name", "Task name used in reports");
    flags.add(app, "--source", "source", "Source dataset manifest name or path, or 'synthetic'");
    flags.add(app, "--target", "target", "Target dataset manifest name or path, or 'synthetic'");
    flags.add(app, "--adapter", "adapter", "identity (nn), jda or bda");
    flags.add(app, "--rho", "rho", "Trust parameter in (0, 1)");
    flags.add(app, "--it", "it", "Remedy inner iterations");
    flags.add(app, "--t", "t", "Outer iterations");
    flags.add(app, "-k,--subspace-dim", "k", "Projection dimension");
    flags.add(app, "--lambda", "lambda", "Ridge weight");
    flags.add(app, "--mu", "mu", "BDA balance factor");
    flags.add(app, "--seed", "seed", "Seed for resampling and synthetic data");
    flags.add(app, "--source-samples", "source_samples", "Seeded subsample size for the source (0 = all)");
    flags.add(app, "--target-samples", "target_samples", "Seeded subsample size for the target (0 = all)");
    flags.add(app, "--syn-classes", "syn_classes", "Synthetic: number of classes");
    flags.add(app, "--syn-per-class", "syn_per_class", "Synthetic: samples per class");
    flags.add(app, "--syn-dim", "syn_dim", "Synthetic: feature dimension");
    flags.add(app, "--syn-shift", "syn_shift", "Synthetic: target translation length");
    flags.add(app, "--syn-noise", "syn_noise", "Synthetic: extra target noise rate in [0, 1)");
}

void add_bool_flag(CLI::App& app, const std::string& on, const std::string& off, std::optional<bool>& value,
                   const std::string& help) {
    app.add_flag_callback(on, [&value] { value = true; }, "Enable " + help);
    app.add_flag_callback(off, [&value] { value = false; }, "Disable " + help);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out = lr::detail::open_out(path, false);
    out << text;
}

int report_errors(const std::vector<lr::TaskReport>& reports) {
    int failures = 0;
    for (const lr::TaskReport& r : reports) {
        if (r.error) {
            std::cerr << "error: " << r.task << " (" << r.method << "): " << *r.error << '\n';
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

lr::Settings parse_assignments(const std::vector<std::string>& items) {
    lr::Settings out;
    for (const std::string& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw lr::Error(lr::ErrorCode::ParseError, "--set expects key=value, got '" + item + "'");
        }
        out[lr::detail::trim(std::string_view(item).substr(0, eq))] = lr::detail::trim(std::string_view(item).substr(eq + 1));
    }
    return out;
}

int run_selftest(std::uint64_t seed, bool quick) {
    const std::size_t scale = quick ? 5 : 1;
    const std::vector<lr::testing::PropertyOutcome> outcomes{
        lr::testing::check_spanning_tree_oracle(500 / scale, seed),
        lr::testing::check_threshold_oracle(200 / scale, seed + 1),
        lr::testing::check_scale_invariance(50 / scale, seed + 2),
        lr::testing::check_partition_oracle(200 / scale, seed + 3),
    };
    bool ok = true;
    for (const auto& o : outcomes) {
        std::printf("%s  %-42s %zu/%zu  %.3fs\n", o.passed() ? "PASS" : "FAIL", o.name.c_str(),
                    o.instances - o.failures, o.instances, o.seconds);
        if (!o.passed()) {
            std::printf("      first failure: %s\n", o.first_failure.c_str());
            ok = false;
        }
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-label remedy for unsupervised domain adaptation"};
    app.require_subcommand(1);

    // run
    CLI::App* run = app.add_subcommand("run", "Run a single task and print its summary row");
    SettingFlags run_flags;
    add_task_flags(*run, run_flags);
    std::optional<bool> run_tsrp;
    std::optional<bool> run_normalize;
    std::optional<bool> run_early_stop;
    add_bool_flag(*run, "--tsrp", "--no-tsrp", run_tsrp, "the pseudo-label remedy loop");
    add_bool_flag(*run, "--normalize", "--no-normalize", run_normalize, "L2 normalisation of features");
    add_bool_flag(*run, "--early-stop", "--no-early-stop", run_early_stop, "stopping when labels settle");
    std::string run_config;
    std::string run_out;
    bool run_labels = false;
    run->add_option("--config", run_config, "Settings file (top-level key = value lines); flags override it")
        ->check(CLI::ExistingFile);
    run->add_option("-o,--out", run_out, "Directory for the trace, summary and label files");
    run->add_flag("--write-labels", run_labels, "Also write predicted target labels (needs --out)");

    // suite
    CLI::App* suite = app.add_subcommand("suite", "Run every task of a suite file and print the table");
    std::string suite_config;
    std::string suite_out;
    std::vector<std::string> suite_set;
    unsigned suite_jobs = std::max(1u, std::thread::hardware_concurrency());
    suite->add_option("--config", suite_config, "Suite file with [task NAME] sections")->required()->check(CLI::ExistingFile);
    suite->add_option("-o,--out", suite_out, "Directory for traces, summary.csv and table.txt");
    suite->add_option("--set", suite_set, "Override a setting for every task (key=value, repeatable)");
    suite->add_option("-j,--jobs", suite_jobs, "Worker threads")->check(CLI::PositiveNumber);

    // prep
    CLI::App* prep = app.add_subcommand("prep", "Convert downloaded feature files into the data directory layout");
    prep->require_subcommand(1);
    std::string prep_name;
    std::string prep_out;
    std::size_t prep_count = 0;
    std::uint64_t prep_seed = 0;
    auto common_prep = [&](CLI::App* sub) {
        sub->add_option("--name", prep_name, "Dataset name (manifest file stem)")->required();
        sub->add_option("-o,--out", prep_out, "Output directory (default: $LABEL_REMEDY_DATA_DIR or ./data)");
        sub->add_option("--count", prep_count, "Keep a seeded subsample of this many samples (0 = all)");
        sub->add_option("--seed", prep_seed, "Subsample seed");
    };
    CLI::App* prep_mat = prep->add_subcommand("mat", "Level-5 MAT file with a feature and a label variable");
    std::string mat_file;
    std::string mat_x;
    std::string mat_y;
    std::string mat_orient = "auto";
    prep_mat->add_option("--file", mat_file, "MAT file")->required()->check(CLI::ExistingFile);
    prep_mat->add_option("--features", mat_x, "Feature variable name, e.g. X_src")->required();
    prep_mat->add_option("--labels", mat_y, "Label variable name, e.g. Y_src")->required();
    prep_mat->add_option("--orient", mat_orient, "auto, rows (one sample per row) or cols")
        ->check(CLI::IsMember({"auto", "rows", "cols"}));
    common_prep(prep_mat);
    CLI::App* prep_idx = prep->add_subcommand("idx", "MNIST-style IDX image and label files");
    std::string idx_images;
    std::string idx_labels;
    std::size_t idx_side = 16;
    prep_idx->add_option("--images", idx_images, "IDX3 image file")->required()->check(CLI::ExistingFile);
    prep_idx->add_option("--labels", idx_labels, "IDX1 label file")->required()->check(CLI::ExistingFile);
    prep_idx->add_option("--side", idx_side, "Resize images to side x side");
    common_prep(prep_idx);
    CLI::App* prep_csv = prep->add_subcommand("csv", "CSV feature file with a label column (header labels=1)");
    std::string csv_file;
    prep_csv->add_option("--file", csv_file, "CSV file")->required()->check(CLI::ExistingFile);
    common_prep(prep_csv);

    // selftest
    CLI::App* selftest = app.add_subcommand("selftest", "Run the oracle property suites");
    std::uint64_t selftest_seed = 20240601;
    bool selftest_quick = false;
    selftest->add_option("--seed", selftest_seed, "Seed for the random instances");
    selftest->add_flag("--quick", selftest_quick, "Run a fifth of the instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            lr::TaskSpec task;
            if (!run_config.empty()) {
                const lr::SuiteConfig file = lr::load_suite_config(run_config);
                lr::apply_settings(task, file.defaults);
            }
            lr::Settings flags = run_flags.collect();
            if (run_tsrp) flags["tsrp"] = *run_tsrp ? "true" : "false";
            if (run_normalize) flags["normalize"] = *run_normalize ? "true" : "false";
            if (run_early_stop) flags["early_stop"] = *run_early_stop ? "true" : "false";
            if (run_labels) flags["write_labels"] = "true";
            lr::apply_settings(task, flags);
            if (task.source.empty() || task.target.empty()) {
                std::cerr << "error: --source and --target are required\n";
                return 2;
            }
            std::optional<fs::path> out;
            if (!run_out.empty()) out = fs::path(run_out);
            const lr::TaskReport report = lr::execute_task(task, out);
            const std::string summary = lr::summary_csv("", {report}, false);
            std::cout << summary;
            if (out) write_file(*out / (lr::trace_basename(report) + ".summary.csv"), summary);
            return report_errors({report});
        }

        if (suite->parsed()) {
            const lr::SuiteConfig config = lr::load_suite_config(suite_config);
            const std::vector<lr::TaskSpec> tasks = lr::suite_tasks(config, parse_assignments(suite_set));
            if (tasks.empty()) {
                std::cerr << "error: suite file has no [task NAME] sections\n";
                return 2;
            }
            std::optional<fs::path> out;
            if (!suite_out.empty()) out = fs::path(suite_out);
            const std::vector<lr::TaskReport> reports = lr::run_suite(tasks, out, suite_jobs);
            const std::string table = lr::render_table(reports);
            std::cout << table;
            if (out) {
                write_file(*out / "summary.csv", lr::summary_csv("", reports, true));
                write_file(*out / "table.txt", table);
            }
            return report_errors(reports);
        }

        if (prep->parsed()) {
            std::pair<lr::FeatureMatrix, lr::RawLabels> data = [&] {
                if (prep_mat->parsed()) {
                    std::optional<bool> rows;
                    if (mat_orient != "auto") rows = mat_orient == "rows";
                    return lr::prep::read_mat(mat_file, mat_x, mat_y, rows);
                }
                if (prep_idx->parsed()) {
                    return lr::prep::read_idx(idx_images, idx_labels, idx_side);
                }
                lr::LoadedMatrix m = lr::load_matrix(csv_file, lr::MatrixFormat::Csv);
                if (!m.labels) {
                    throw lr::Error(lr::ErrorCode::ParseError, csv_file + ": header needs labels=1");
                }
                return std::pair{std::move(m.features), std::move(*m.labels)};
            }();
            auto [features, labels] = lr::prep::subsample(data.first, data.second, prep_count, prep_seed);
            const fs::path out_dir = prep_out.empty() ? lr::data_dir() : fs::path(prep_out);
            const lr::prep::PrepOutput written = lr::prep::write_dataset(out_dir, prep_name, features, labels);
            try {
                written.manifest.check_known_shape();
            } catch (const lr::Error& e) {
                std::cerr << "warning: " << e.what() << '\n';
            }
            std::cout << written.manifest_path.string() << ": " << features.dim() << " x " << features.samples() << '\n';
            return 0;
        }

        if (selftest->parsed()) {
            return run_selftest(selftest_seed, selftest_quick);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
