#include "cura/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "cura/ablation.hpp"
#include "cura/errors.hpp"
#include "cura/io.hpp"
#include "cura/report.hpp"

namespace cura::cli {
namespace {

// Flags shared by the subcommands that build a RunConfig. Each one given on
// the command line overrides the config file.
struct RunFlags {
    std::string config;
    std::string data, target, features, task;
    std::size_t window = 0, horizon = 0, stride = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;
    std::vector<std::pair<std::string, CLI::Option*>> bound;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "key = value run configuration")->check(CLI::ExistingFile);
        bound.emplace_back("data", app.add_option("--data", data, "input CSV"));
        bound.emplace_back("target", app.add_option("--target", target, "target column"));
        bound.emplace_back("features", app.add_option("--features", features, "comma-separated feature columns"));
        bound.emplace_back("task", app.add_option("--task", task, "regression or classification"));
        bound.emplace_back("window", app.add_option("--window", window, "window length L"));
        bound.emplace_back("horizon", app.add_option("--horizon", horizon, "forecast horizon H"));
        bound.emplace_back("stride", app.add_option("--stride", stride, "window stride"));
        bound.emplace_back("seed", app.add_option("--seed", seed, "seed for init, shuffling and synthetic data"));
        app.add_option("--set", overrides, "extra key=value binding (repeatable)");
    }

    RunConfig resolve(RunConfig base) const {
        RunConfig rc = config.empty() ? std::move(base) : load_run_config(config);
        for (const auto& [key, opt] : bound)
            if (opt->count() > 0) rc.set(key, opt->as<std::string>());
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
            auto trim = [](std::string s) {
                s.erase(0, s.find_first_not_of(" \t"));
                s.erase(s.find_last_not_of(" \t") + 1);
                return s;
            };
            rc.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
        }
        return rc;
    }
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + path + "'");
    f << text;
    if (!f) throw Error("failed writing '" + path + "'");
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Normalizer normalizer_for(const DataSidecar& sc, const Series& series) {
    Normalizer n;
    for (const auto& name : sc.normalized_columns) n.columns.push_back(series.column_index(name));
    n.mean = sc.mean;
    n.stddev = sc.stddev;
    return n;
}

void check_model_matches(const CuraConfig& config, const DataSidecar& sc) {
    if (config.in_channels != sc.features.size() || config.seq_len != sc.window)
        throw SchemaError("model expects " + std::to_string(config.in_channels) + " channels over " +
                          std::to_string(config.seq_len) + " steps but its data file lists " +
                          std::to_string(sc.features.size()) + " features with window " + std::to_string(sc.window));
}

// ------------------------------------------------------------ train

struct TrainCmd {
    RunFlags flags;
    std::string model, out;

    void attach(CLI::App& app) {
        flags.attach(app);
        app.add_option("--model", model, "where to write the model file")->required();
        app.add_option("--out", out, "report file (default: standard output)");
    }

    int operator()(std::ostream& os) const {
        const RunConfig rc = flags.resolve({});
        const Series series = load_series(rc);
        const WindowedDataset dataset = make_windows(series, window_spec(rc, series));
        const CuraConfig config = rc.resolved_model();
        const FitResult result = fit(config, dataset, rc.hyper);
        save_model(model, config, result.params);
        save_sidecar(sidecar_path(model), DataSidecar::from_dataset(dataset, series));
        emit(format_train_report(result.report, config), out, os);
        return kExitOk;
    }
};

// ------------------------------------------------------------- eval

struct EvalCmd {
    RunFlags flags;
    std::string model, out;
    bool all = false;

    void attach(CLI::App& app) {
        flags.attach(app);
        app.add_option("--model", model, "model file written by train")->required()->check(CLI::ExistingFile);
        app.add_option("--out", out, "report file (default: standard output)");
        app.add_flag("--all", all, "score every window instead of the held-out tail");
    }

    int operator()(std::ostream& os) const {
        const RunConfig rc = flags.resolve({});
        const SavedModel saved = load_model(model);
        const DataSidecar sc = load_sidecar(sidecar_path(model));
        check_model_matches(saved.config, sc);
        if (!rc.features.empty() && rc.features != sc.features)
            throw SchemaError("feature columns differ from the ones the model was trained on");

        const Series series = rc.data.empty() ? gen_synth(rc.synth) : load_csv(rc.data, sc.target, sc.features);
        WindowSpec spec;
        spec.task = sc.task;
        spec.window = sc.window;
        spec.horizon = sc.task == Task::regression ? sc.horizon : 0;
        spec.stride = sc.stride;
        spec.train_fraction = rc.train_fraction;
        spec.target = series.column_index(sc.target);
        for (const auto& f : sc.features) spec.features.push_back(series.column_index(f));
        const WindowedDataset windows = make_windows(series, spec, normalizer_for(sc, series));

        const Metrics m = all ? evaluate(saved.params, saved.config, windows)
                              : evaluate(saved.params, saved.config, chrono_split(windows, rc.train_fraction).second);
        emit(format_eval_report(m, count_params(saved.config)), out, os);
        return kExitOk;
    }
};

// ---------------------------------------------------------- predict

struct PredictCmd {
    std::string model, data, out, features;
    std::size_t stride = 1;
    CLI::Option* features_opt = nullptr;

    void attach(CLI::App& app) {
        app.add_option("--model", model, "model file written by train")->required()->check(CLI::ExistingFile);
        app.add_option("--data", data, "input CSV")->required()->check(CLI::ExistingFile);
        app.add_option("--out", out, "prediction CSV (default: standard output)");
        features_opt = app.add_option("--features", features, "expected feature columns, checked against the model");
        app.add_option("--stride", stride, "step between consecutive windows")->check(CLI::PositiveNumber);
    }

    int operator()(std::ostream& os) const {
        const SavedModel saved = load_model(model);
        const DataSidecar sc = load_sidecar(sidecar_path(model));
        check_model_matches(saved.config, sc);
        if (features_opt->count() > 0 && split_names(features) != sc.features)
            throw SchemaError("feature columns differ from the ones the model was trained on");

        const Series raw = load_csv(data);
        for (const auto& f : sc.features)
            if (std::find(raw.names.begin(), raw.names.end(), f) == raw.names.end())
                throw SchemaError("input lacks feature column '" + f + "'");
        const std::size_t L = sc.window;
        if (raw.rows < L)
            throw InsufficientDataError("need at least " + std::to_string(L) + " rows, got " +
                                        std::to_string(raw.rows));

        const Normalizer norm = normalizer_for(sc, raw);
        const Series z = norm.apply(raw);
        std::vector<std::size_t> cols;
        for (const auto& f : sc.features) cols.push_back(raw.column_index(f));

        const std::size_t count = (raw.rows - L) / stride + 1;
        std::vector<Tensor> inputs;
        inputs.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            Tensor x(Shape{L, cols.size()});
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t c = 0; c < cols.size(); ++c) x.at(t, c) = z.at(i * stride + t, cols[c]);
            inputs.push_back(std::move(x));
        }
        const auto outputs = predict_batch(saved.params, saved.config, inputs);

        // The target column may be absent from the input; its statistics
        // live in the sidecar.
        const auto target_slot = std::find(sc.normalized_columns.begin(), sc.normalized_columns.end(), sc.target);
        std::ostringstream csv;
        csv << "end_row";
        if (sc.task == Task::classification) {
            csv << ",class";
        } else {
            for (std::size_t h = 0; h < saved.config.out_dim; ++h) csv << ',' << sc.target << "+" << h + 1;
        }
        csv << '\n';
        for (std::size_t i = 0; i < count; ++i) {
            csv << i * stride + L - 1;
            const auto v = outputs[i].data();
            if (sc.task == Task::classification) {
                csv << ',' << static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
            } else {
                for (double y : v) {
                    if (target_slot != sc.normalized_columns.end()) {
                        const auto k = static_cast<std::size_t>(target_slot - sc.normalized_columns.begin());
                        y = y * sc.stddev[k] + sc.mean[k];
                    }
                    csv << ',' << format_number(y);
                }
            }
            csv << '\n';
        }
        emit(csv.str(), out, os);
        return kExitOk;
    }
};

// ----------------------------------------------------------- params

struct ParamsCmd {
    RunFlags flags;
    bool efficiency = false;
    bool layout = false;

    void attach(CLI::App& app) {
        flags.attach(app);
        app.add_flag("--efficiency-table", efficiency, "check the published parameter-efficiency rows");
        app.add_flag("--layout", layout, "list every parameter blob with its shape");
    }

    int operator()(std::ostream& os) const {
        if (efficiency) {
            std::vector<EfficiencyCheck> checks;
            for (const auto& row : published_efficiency_table()) checks.push_back(check_efficiency(row));
            os << format_efficiency_table(checks);
            return kExitOk;
        }
        const CuraConfig config = flags.resolve({}).resolved_model();
        config.validate();
        if (layout) {
            TextTable t({"blob", "shape", "size"});
            for (const auto& spec : param_layout(config))
                t.add_row({std::string(blob_name(spec.blob)), shape_string(spec.shape),
                           std::to_string(shape_size(spec.shape))});
            os << t.render();
        }
        os << count_params(config) << '\n';
        return kExitOk;
    }
};

// ----------------------------------------------------------- ablate

struct AblateCmd {
    RunFlags flags;
    std::string out, preset = "classification";

    void attach(CLI::App& app) {
        flags.attach(app);
        app.add_option("--out", out, "report file (default: standard output)");
        app.add_option("--preset", preset, "built-in setup used when no --config is given")
            ->check(CLI::IsMember({"classification", "regression"}));
    }

    int operator()(std::ostream& os) const {
        const RunConfig rc = flags.resolve(preset == "regression" ? regression_analogue() : classification_analogue());
        emit(format_ablation_report(run_ablation(rc), rc.task), out, os);
        return kExitOk;
    }
};

// -------------------------------------------------------- gen-synth

struct GenSynthCmd {
    RunFlags flags;
    std::string out, kind;
    std::size_t rows = 0, channels = 0, classes = 0, segment = 0;
    double noise = 0.0, ar1 = 0.0, ar2 = 0.0;
    std::vector<std::pair<std::string, CLI::Option*>> bound;

    void attach(CLI::App& app) {
        app.add_option("--config", flags.config, "key = value run configuration")->check(CLI::ExistingFile);
        flags.bound.emplace_back("seed", app.add_option("--seed", flags.seed, "generator seed"));
        app.add_option("--out", out, "CSV to write")->required();
        bound.emplace_back("synth_kind", app.add_option("--kind", kind, "sine_mix, freq_classes or linear_ar"));
        bound.emplace_back("synth_rows", app.add_option("--rows", rows, "number of rows"));
        bound.emplace_back("synth_channels", app.add_option("--channels", channels, "number of channels"));
        bound.emplace_back("synth_noise", app.add_option("--noise", noise, "Gaussian noise standard deviation"));
        bound.emplace_back("synth_classes", app.add_option("--classes", classes, "freq_classes: class count"));
        bound.emplace_back("synth_segment", app.add_option("--segment", segment, "freq_classes: rows per segment"));
        bound.emplace_back("synth_ar1", app.add_option("--ar1", ar1, "linear_ar: lag-1 coefficient"));
        bound.emplace_back("synth_ar2", app.add_option("--ar2", ar2, "linear_ar: lag-2 coefficient"));
    }

    int operator()(std::ostream& os) const {
        RunConfig rc = flags.resolve({});
        for (const auto& [key, opt] : bound)
            if (opt->count() > 0) rc.set(key, opt->as<std::string>());
        write_csv(out, gen_synth(rc.synth));
        os << "rows=" << rc.synth.rows << '\n' << "out=" << out << '\n';
        return kExitOk;
    }
};

int usage_failure(const std::string& message, const CLI::App& app, std::ostream& err) {
    err << "error: " << message << '\n' << app.help();
    return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compact gated residual models for time series", "cura"};
    app.require_subcommand(1);
    app.fallthrough(false);

    TrainCmd train;
    EvalCmd eval;
    PredictCmd predict;
    ParamsCmd params;
    AblateCmd ablate;
    GenSynthCmd gen;
    std::function<int(std::ostream&)> action;

    auto add = [&](const char* name, const char* about, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, about);
        cmd.attach(*sub);
        sub->callback([&action, &cmd] { action = [&cmd](std::ostream& os) { return cmd(os); }; });
    };
    add("train", "fit a model and write it with its report", train);
    add("eval", "score a saved model", eval);
    add("predict", "apply a saved model to a CSV", predict);
    add("params", "print the parameter count of a configuration", params);
    add("ablate", "train every architectural variant and rank them", ablate);
    add("gen-synth", "write a synthetic series as CSV", gen);

    if (!args.empty() && !args.front().empty() && args.front().front() != '-') {
        const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
        const bool known = std::any_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->check_name(args.front()); });
        if (!known) return usage_failure("unknown subcommand '" + args.front() + "'", app, err);
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        return usage_failure(e.what(), app, err);
    }

    try {
        return action(out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "error: training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace cura::cli
