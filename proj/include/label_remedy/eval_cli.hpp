#ifndef LABEL_REMEDY_EVAL_CLI_HPP
#define LABEL_REMEDY_EVAL_CLI_HPP

#include "datasets_io.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

/**
 * @file eval_cli.hpp
 *
 * @brief Task execution and reporting behind the command-line tool.
 *
 * A task names a source and a target (dataset manifests, or the built-in
 * synthetic generator), an adapter and the remedy settings. Running it
 * writes a per-iteration trace, a summary row and optionally the predicted
 * labels. Suites run many tasks and add the per-method average row.
 */

namespace label_remedy {

/// Flat `key = value` settings; later layers override earlier ones.
using Settings = std::map<std::string, std::string>;

struct SyntheticParams {
    std::size_t classes = 5;
    std::size_t per_class = 100;
    std::size_t dim = 20;
    double shift = 4.0;
    double noise = 0.2;
};

struct TaskSpec {
    std::string name;
    std::string source;
    std::string target;
    ExperimentConfig cfg;
    bool subspace_dim_set = false;
    SyntheticParams synthetic;
    std::size_t source_samples = 0; ///< 0 keeps every sample
    std::size_t target_samples = 0;
    bool write_labels = false;

    std::string method() const {
        std::string m = cfg.adapter == AdapterKind::Identity ? "NN"
                        : cfg.adapter == AdapterKind::Jda    ? "JDA"
                                                             : "BDA";
        return cfg.tsrp ? m + "+TSRP" : m;
    }
};

struct TaskReport {
    std::string task;
    std::string method;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    std::vector<IterationTrace> trace;
    std::optional<std::string> error;
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::ParseError, "setting '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::string format_double(double v, int precision = 6) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

inline std::string sanitize(std::string s) {
    for (char& c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+')) {
            c = '_';
        }
    }
    return s;
}

} // namespace detail

/// Applies recognised keys to a task. Unknown keys are an error so typos surface.
inline void apply_settings(TaskSpec& task, const Settings& settings) {
    for (const auto& [key, value] : settings) {
        const std::string where = "setting '" + key + "'";
        if (key == "name") task.name = value;
        else if (key == "source") task.source = value;
        else if (key == "target") task.target = value;
        else if (key == "adapter") task.cfg.adapter = parse_adapter(value);
        else if (key == "tsrp") task.cfg.tsrp = detail::parse_bool(key, value);
        else if (key == "rho") task.cfg.rho = detail::parse_double(value, where);
        else if (key == "it" || key == "inner_iters") task.cfg.inner_iters = static_cast<int>(detail::parse_int(value, where));
        else if (key == "t" || key == "outer_iters") task.cfg.outer_iters = static_cast<int>(detail::parse_int(value, where));
        else if (key == "k" || key == "subspace_dim") {
            task.cfg.subspace_dim = static_cast<int>(detail::parse_int(value, where));
            task.subspace_dim_set = true;
        }
        else if (key == "lambda") task.cfg.lambda = detail::parse_double(value, where);
        else if (key == "mu") task.cfg.mu = detail::parse_double(value, where);
        else if (key == "seed") task.cfg.seed = static_cast<std::uint64_t>(detail::parse_int(value, where));
        else if (key == "normalize") task.cfg.normalize = detail::parse_bool(key, value);
        else if (key == "early_stop") task.cfg.early_stop = detail::parse_bool(key, value);
        else if (key == "source_samples") task.source_samples = static_cast<std::size_t>(detail::parse_int(value, where));
        else if (key == "target_samples") task.target_samples = static_cast<std::size_t>(detail::parse_int(value, where));
        else if (key == "write_labels") task.write_labels = detail::parse_bool(key, value);
        else if (key == "syn_classes") task.synthetic.classes = static_cast<std::size_t>(detail::parse_int(value, where));
        else if (key == "syn_per_class") task.synthetic.per_class = static_cast<std::size_t>(detail::parse_int(value, where));
        else if (key == "syn_dim") task.synthetic.dim = static_cast<std::size_t>(detail::parse_int(value, where));
        else if (key == "syn_shift") task.synthetic.shift = detail::parse_double(value, where);
        else if (key == "syn_noise") task.synthetic.noise = detail::parse_double(value, where);
        else throw Error(ErrorCode::ParseError, "unknown setting '" + key + "'");
    }
}

struct SuiteConfig {
    Settings defaults;
    /// Task sections in file order: (section name, settings).
    std::vector<std::pair<std::string, Settings>> tasks;
};

/**
 * Parses the suite file: top-level `key = value` lines are defaults, and each
 * `[task NAME]` (or `[task.NAME]`) header starts a task section. `#` starts a comment.
 */
inline SuiteConfig parse_suite_config(std::istream& in, const std::string& where = "config") {
    SuiteConfig out;
    Settings* current = &out.defaults;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string t = detail::trim(line);
        if (t.empty()) {
            continue;
        }
        const std::string at = where + ":" + std::to_string(line_no);
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw Error(ErrorCode::ParseError, at + ": unterminated section header");
            }
            std::string section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.rfind("task.", 0) == 0) {
                section = section.substr(5);
            } else if (section.rfind("task ", 0) == 0) {
                section = detail::trim(std::string_view(section).substr(5));
            } else {
                throw Error(ErrorCode::ParseError, at + ": only [task NAME] sections are recognised");
            }
            if (section.size() >= 2 && section.front() == '"' && section.back() == '"') {
                section = section.substr(1, section.size() - 2);
            }
            out.tasks.emplace_back(section, Settings{{"name", section}});
            current = &out.tasks.back().second;
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ParseError, at + ": expected key = value");
        }
        std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        (*current)[detail::trim(std::string_view(t).substr(0, eq))] = value;
    }
    return out;
}

inline SuiteConfig load_suite_config(const std::filesystem::path& path) {
    std::ifstream in = detail::open_in(path, false);
    return parse_suite_config(in, path.string());
}

/// Source, target and target ground truth as handed to the pipeline.
struct TaskData {
    LabeledDomain source;
    UnlabeledDomain target;
    LabelVector truth;
    RawLabels class_values; ///< dense class -> original label value
};

inline TaskData load_task_data(const TaskSpec& task) {
    const bool syn_source = task.source == "synthetic";
    const bool syn_target = task.target == "synthetic";
    if (syn_source != syn_target) {
        throw Error(ErrorCode::InvalidArgument, "synthetic data must be used for both source and target");
    }
    if (syn_source) {
        const SyntheticParams& p = task.synthetic;
        SyntheticShift data = make_synthetic_shift(p.classes, p.per_class, p.dim, p.shift, p.noise, task.cfg.seed);
        RawLabels values(p.classes);
        std::iota(values.begin(), values.end(), std::int64_t{0});
        return TaskData{std::move(data.source), std::move(data.target), std::move(data.target_truth), std::move(values)};
    }

    LoadedDataset src = load_dataset(parse_manifest(resolve_manifest(task.source)));
    LoadedDataset tgt = load_dataset(parse_manifest(resolve_manifest(task.target)));
    auto resample = [](LoadedDataset& d, std::size_t count, std::uint64_t seed) {
        if (count == 0 || count == d.features.samples()) {
            return;
        }
        const IndexSet keep = seeded_subsample(d.features.samples(), count, seed);
        RawLabels labels(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            labels[i] = d.labels[keep[i]];
        }
        d.features = d.features.select_columns(keep);
        d.labels = std::move(labels);
    };
    resample(src, task.source_samples, task.cfg.seed * 2 + 1);
    resample(tgt, task.target_samples, task.cfg.seed * 2 + 2);

    const LabelMap map(src.labels);
    LabeledDomain source(std::move(src.features), map.to_dense(src.labels), map.num_classes());
    LabelVector truth = map.to_dense(tgt.labels);
    return TaskData{std::move(source), UnlabeledDomain(std::move(tgt.features)), std::move(truth), map.raw_values()};
}

inline std::string report_header(const TaskSpec& task) {
    std::ostringstream h;
    h << "# task=" << task.name << '\n'
      << "# method=" << task.method() << '\n'
      << "# source=" << task.source << '\n'
      << "# target=" << task.target << '\n'
      << "# adapter=" << to_string(task.cfg.adapter) << '\n'
      << "# tsrp=" << (task.cfg.tsrp ? "true" : "false") << '\n'
      << "# rho=" << detail::format_double(task.cfg.rho, 4) << '\n'
      << "# it=" << task.cfg.inner_iters << '\n'
      << "# t=" << task.cfg.outer_iters << '\n'
      << "# k=" << task.cfg.subspace_dim << '\n'
      << "# lambda=" << detail::format_double(task.cfg.lambda, 6) << '\n'
      << "# mu=" << detail::format_double(task.cfg.mu, 4) << '\n'
      << "# normalize=" << (task.cfg.normalize ? "true" : "false") << '\n'
      << "# early_stop=" << (task.cfg.early_stop ? "true" : "false") << '\n'
      << "# seed=" << task.cfg.seed << '\n';
    if (task.source == "synthetic") {
        h << "# syn_classes=" << task.synthetic.classes << '\n'
          << "# syn_per_class=" << task.synthetic.per_class << '\n'
          << "# syn_dim=" << task.synthetic.dim << '\n'
          << "# syn_shift=" << detail::format_double(task.synthetic.shift, 4) << '\n'
          << "# syn_noise=" << detail::format_double(task.synthetic.noise, 4) << '\n';
    }
    if (task.source_samples || task.target_samples) {
        h << "# source_samples=" << task.source_samples << '\n' << "# target_samples=" << task.target_samples << '\n';
    }
    return h.str();
}

inline std::string trace_csv(const TaskSpec& task, const std::vector<IterationTrace>& trace) {
    std::ostringstream out;
    out << report_header(task) << "iter,crude_acc,remedied_acc,high_frac\n";
    for (const IterationTrace& t : trace) {
        out << t.iter << ',' << detail::format_double(t.crude_label_accuracy) << ','
            << detail::format_double(t.remedied_label_accuracy) << ',' << detail::format_double(t.high_conf_fraction)
            << '\n';
    }
    return out.str();
}

inline std::string trace_basename(const TaskReport& r) { return detail::sanitize(r.task + "_" + r.method); }

/// Loads the data, runs the pipeline and, when `out_dir` is set, writes the trace and label files.
inline TaskReport execute_task(TaskSpec task, const std::optional<std::filesystem::path>& out_dir) {
    TaskReport report;
    if (task.name.empty()) {
        task.name = task.source + "->" + task.target;
    }
    report.task = task.name;
    report.method = task.method();
    try {
        TaskData data = load_task_data(task);
        const std::size_t m = data.source.features().dim();
        if (!task.subspace_dim_set) {
            task.cfg.subspace_dim = task.cfg.adapter == AdapterKind::Identity
                                        ? static_cast<int>(m)
                                        : static_cast<int>(std::min<std::size_t>(100, m));
        }
        PipelineResult result = run(data.source, data.target, task.cfg, data.truth);
        report.trace = result.trace;
        if (result.failure) {
            report.error = result.failure->what();
        } else if (result.labels) {
            report.accuracy = accuracy(result.labels->labels(), data.truth);
        }
        if (out_dir) {
            std::filesystem::create_directories(*out_dir);
            std::ofstream trace_out = detail::open_out(*out_dir / (trace_basename(report) + ".trace.csv"), false);
            trace_out << trace_csv(task, report.trace);
            if (task.write_labels && result.labels) {
                RawLabels predicted(result.labels->size());
                for (std::size_t i = 0; i < predicted.size(); ++i) {
                    predicted[i] = data.class_values[static_cast<std::size_t>(result.labels->labels()[i])];
                }
                save_labels(*out_dir / (trace_basename(report) + ".labels"), predicted);
            }
        }
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    return report;
}

/// Mean accuracy per method, in first-appearance order.
inline std::vector<std::pair<std::string, double>> method_averages(const std::vector<TaskReport>& reports) {
    std::vector<std::pair<std::string, double>> out;
    std::vector<std::size_t> counts;
    for (const TaskReport& r : reports) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r.method; });
        if (it == out.end()) {
            out.emplace_back(r.method, 0.0);
            counts.push_back(0);
            it = out.end() - 1;
        }
        const auto idx = static_cast<std::size_t>(it - out.begin());
        it->second += r.accuracy;
        ++counts[idx];
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].second /= static_cast<double>(counts[i]);
    }
    return out;
}

/// CSV rows `task,method,accuracy` plus one `Average` row per method when asked.
inline std::string summary_csv(const std::string& header, const std::vector<TaskReport>& reports, bool with_average) {
    std::ostringstream out;
    out << header << "task,method,accuracy\n";
    for (const TaskReport& r : reports) {
        out << r.task << ',' << r.method << ',' << detail::format_double(r.accuracy) << '\n';
    }
    if (with_average) {
        for (const auto& [method, avg] : method_averages(reports)) {
            out << "Average," << method << ',' << detail::format_double(avg) << '\n';
        }
    }
    return out.str();
}

/// Text table: one row per task, one column per method, accuracies in percent, average row last.
inline std::string render_table(const std::vector<TaskReport>& reports) {
    std::vector<std::string> tasks;
    std::vector<std::string> methods;
    std::map<std::pair<std::string, std::string>, double> cell;
    for (const TaskReport& r : reports) {
        if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        cell[{r.task, r.method}] = r.accuracy;
    }
    std::size_t first = std::string("Average accuracy").size();
    for (const std::string& t : tasks) first = std::max(first, t.size());
    std::vector<std::size_t> widths;
    for (const std::string& m : methods) widths.push_back(std::max<std::size_t>(m.size(), 7));

    std::ostringstream out;
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    auto rule = [&] {
        out << std::string(first, '-');
        for (std::size_t w : widths) out << "-+-" << std::string(w, '-');
        out << '\n';
    };
    out << pad("Task", first);
    for (std::size_t i = 0; i < methods.size(); ++i) out << " | " << pad(methods[i], widths[i]);
    out << '\n';
    rule();
    for (const std::string& t : tasks) {
        out << pad(t, first);
        for (std::size_t i = 0; i < methods.size(); ++i) {
            const auto it = cell.find({t, methods[i]});
            out << " | " << pad(it == cell.end() ? "" : detail::format_double(100.0 * it->second, 2), widths[i]);
        }
        out << '\n';
    }
    rule();
    out << pad("Average accuracy", first);
    const auto averages = method_averages(reports);
    for (std::size_t i = 0; i < methods.size(); ++i) {
        out << " | " << pad(detail::format_double(100.0 * averages[i].second, 2), widths[i]);
    }
    out << '\n';
    return out.str();
}

/// Runs tasks on a pool of `jobs` workers; reports come back in task order.
inline std::vector<TaskReport> run_suite(const std::vector<TaskSpec>& tasks,
                                         const std::optional<std::filesystem::path>& out_dir, unsigned jobs) {
    std::vector<TaskReport> reports(tasks.size());
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
    std::mutex mutex;
    std::size_t next = 0;
    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard lock(mutex);
                if (next >= tasks.size()) return;
                i = next++;
            }
            reports[i] = execute_task(tasks[i], out_dir);
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    pool.clear();
    return reports;
}

/// Builds task specs from a suite file with command-line overrides applied last.
inline std::vector<TaskSpec> suite_tasks(const SuiteConfig& config, const Settings& overrides) {
    std::vector<TaskSpec> out;
    for (const auto& [name, settings] : config.tasks) {
        TaskSpec task;
        apply_settings(task, config.defaults);
        apply_settings(task, settings);
        apply_settings(task, overrides);
        if (task.name.empty()) task.name = name;
        if (task.source.empty() || task.target.empty()) {
            throw Error(ErrorCode::ParseError, "task '" + name + "' needs both source and target");
        }
        out.push_back(std::move(task));
    }
    return out;
}

} // namespace label_remedy

#endif
