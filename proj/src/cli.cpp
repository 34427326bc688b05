#include "uhisr/cli.hpp"

#include "uhisr/persist.hpp"
#include "uhisr/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace uhisr {

namespace fs = std::filesystem;

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++number;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
        out[key] = value;
    }
    return out;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("config key '" + key + "': invalid number '" + value + "'");
    return v;
}

void apply_train_key(TrainConfig& t, const std::string& field, const std::string& key,
                     const std::string& value) {
    if (field == "epochs") t.epochs = parse_number<int>(key, value);
    else if (field == "batch_size") t.batch_size = parse_number<int>(key, value);
    else if (field == "learning_rate") t.adam.learning_rate = parse_number<double>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

const std::vector<std::string>& sr_fields() {
    static const std::vector<std::string> f{"niterations", "ncycles",   "populations",
                                            "population_size", "maxsize", "maxdepth",
                                            "threads",     "optimize_probability", "early_stop_loss"};
    return f;
}

}  // namespace

void RunConfig::apply(const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        if (key == "data") data = value;
        else if (key == "out") out = value;
        else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
        else if (key == "epochs" || key == "batch_size" || key == "learning_rate")
            for (auto& t : train) apply_train_key(t, key, key, value);
        else if (key.size() > 7 && key.starts_with("stage") && key[6] == '.') {
            const int s = key[5] - '0';
            if (s < 1 || s > 3) throw ConfigError("unknown config key '" + key + "'");
            apply_train_key(train[static_cast<std::size_t>(s - 1)], key.substr(7), key, value);
        } else if (key.starts_with("sr.")) {
            const std::string field = key.substr(key.rfind('.') + 1);
            if (std::find(sr_fields().begin(), sr_fields().end(), field) == sr_fields().end())
                throw ConfigError("unknown config key '" + key + "'");
            const std::string middle = key.substr(3, key.size() - 3 - field.size());
            if (!middle.empty()) {
                const std::string level = middle.substr(0, middle.size() - 1);
                const auto& levels = pipeline_levels();
                if (std::none_of(levels.begin(), levels.end(), [&](const LevelSpec& l) { return l.name == level; }))
                    throw ConfigError("config key '" + key + "' names unknown level '" + level + "'");
            }
            (void)parse_number<double>(key, value);
            sr[key] = value;
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
}

void RunConfig::apply_sr(SRConfig& cfg, const LevelSpec& level) const {
    auto set = [&](const std::string& field, const std::string& key, const std::string& value) {
        if (field == "niterations") cfg.niterations = parse_number<int>(key, value);
        else if (field == "ncycles") cfg.ncycles_per_iteration = parse_number<int>(key, value);
        else if (field == "populations") cfg.populations = parse_number<int>(key, value);
        else if (field == "population_size") cfg.population_size = parse_number<int>(key, value);
        else if (field == "maxsize") cfg.maxsize = parse_number<int>(key, value);
        else if (field == "maxdepth") cfg.maxdepth = parse_number<int>(key, value);
        else if (field == "threads") cfg.threads = parse_number<int>(key, value);
        else if (field == "optimize_probability") cfg.optimize_probability = parse_number<double>(key, value);
        else if (field == "early_stop_loss") cfg.early_stop_loss = parse_number<double>(key, value);
    };
    // Global keys first, then level-specific ones.
    for (const auto& f : sr_fields())
        if (auto it = sr.find("sr." + f); it != sr.end()) set(f, it->first, it->second);
    for (const auto& f : sr_fields())
        if (auto it = sr.find("sr." + level.name + "." + f); it != sr.end()) set(f, it->first, it->second);
    cfg.validate();
}

namespace {

struct Options {
    std::string data, out, config, system;
    std::optional<std::uint64_t> seed;
    int stage = 0;
    std::string level;
};

RunConfig resolve(const Options& o) {
    RunConfig rc;
    if (!o.config.empty()) {
        std::string text;
        try {
            text = read_file(o.config);
        } catch (const std::exception&) {
            throw ConfigError("cannot read config file '" + o.config + "'");
        }
        rc.apply(parse_config_text(text));
    }
    if (!o.data.empty()) rc.data = o.data;
    if (!o.out.empty()) rc.out = o.out;
    if (o.seed) rc.seed = *o.seed;
    return rc;
}

void require_data(const RunConfig& rc) {
    if (rc.data.empty()) throw ConfigError("no dataset given (use --data or 'data' in the config)");
}

void require_out(const RunConfig& rc) {
    if (rc.out.empty()) throw ConfigError("no output directory given (use --out or 'out' in the config)");
}

DataTable load_dataset(const RunConfig& rc, std::ostream& log, bool require_target = true) {
    require_data(rc);
    LoadOptions lo;
    lo.require_target = require_target;
    LoadReport report;
    DataTable t = load_csv(rc.data, lo, &report);
    for (const auto& w : report.warnings) log << "warning: " << w << "\n";
    return t;
}

std::string fmt(double v) { return format_number(v, PrintStyle::Display); }

std::string manifest(const StageResult& r, std::uint64_t seed, const TrainConfig& tc) {
    std::ostringstream m;
    const StageSpec& s = r.net.spec();
    m << "stage = " << s.number << "\n";
    m << "target = " << s.target << "\n";
    for (const auto& c : s.clusters) {
        m << "cluster." << c.latent << " =";
        for (const auto& f : c.features) m << " " << f;
        m << "\n";
    }
    m << "head_output = " << activation_name(s.head_output) << "\n";
    m << "hidden = " << s.hidden_layers << "x" << s.hidden_width << "\n";
    m << "leak = " << fmt(r.net.head().spec.leak) << "\n";
    m << "parameters = " << r.net.parameter_count() << "\n";
    m << "seed = " << seed << "\n";
    m << "epochs = " << tc.epochs << "\n";
    m << "batch_size = " << tc.batch_size << "\n";
    m << "learning_rate = " << fmt(tc.adam.learning_rate) << "\n";
    m << "best_epoch = " << r.history.best_epoch + 1 << "\n";
    m << "best_valid_rmse = " << fmt(r.history.best_valid_rmse) << "\n";
    m << "test_r2 = " << fmt(r.test_r2) << "\n";
    m << "test_rmse = " << fmt(r.test_rmse) << "\n";
    return m.str();
}

DataTable with_row_index(const DataTable& latents) {
    std::vector<double> row(latents.rows());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<double>(i);
    DataTable out({"row"}, {row}, latents.ids());
    return merge_columns(out, latents);
}

void save_stage(const fs::path& dir, const StageResult& r, std::uint64_t seed, const TrainConfig& tc) {
    const std::string base = "stage" + std::to_string(r.net.spec().number);
    auto nets = r.net.params();
    save_params(dir / (base + ".params"), nets);
    write_atomic(dir / (base + ".manifest"), manifest(r, seed, tc));
}

// Merges previously saved latents with the freshly trained stage's.
DataTable update_latents(const fs::path& dir, const DataTable& fresh, int stage) {
    const fs::path p = dir / "latents.csv";
    DataTable keep({}, {}, fresh.ids());
    if (stage > 1 && fs::exists(p)) {
        DataTable old = read_numeric_csv(p);
        for (const auto& n : old.names())
            if (n != "row" && !fresh.has(n)) keep.set_column(n, old.column(n));
    }
    DataTable merged = merge_columns(keep, fresh);
    write_atomic(p, to_csv(with_row_index(merged)));
    return merged;
}

DataTable load_latents(const fs::path& dir, std::size_t rows) {
    const fs::path p = dir / "latents.csv";
    if (!fs::exists(p)) throw MissingArtifact("missing upstream latent: no latents.csv in '" + dir.string() + "'");
    DataTable t = read_numeric_csv(p);
    if (t.rows() != rows)
        throw MissingArtifact("latents.csv has " + std::to_string(t.rows()) + " rows but the dataset has " +
                              std::to_string(rows));
    std::vector<std::string> names;
    for (const auto& n : t.names())
        if (n != "row") names.push_back(n);
    return t.select_columns(names);
}

SplitIndices run_split(const RunConfig& rc, const DataTable& t) {
    return split(t, derive_seed(rc.seed, "split"));
}

TrainConfig stage_train_config(const RunConfig& rc, int stage) {
    TrainConfig tc = rc.train[static_cast<std::size_t>(stage - 1)];
    tc.seed = derive_seed(rc.seed, "stage" + std::to_string(stage));
    return tc;
}

int cmd_validate(const RunConfig& rc, std::ostream& out) {
    require_data(rc);
    LoadReport report;
    DataTable t = load_csv(rc.data, {}, &report);
    out << "rows: " << report.rows << "\n";
    if (t.has_ids()) out << "compounds: " << report.distinct_ids << "\n";
    out << "columns: " << t.cols() << "\n";
    for (const auto& w : report.warnings) out << "warning: " << w << "\n";
    out << "ok\n";
    return kExitOk;
}

int cmd_train(const RunConfig& rc, int stage, std::ostream& out) {
    if (stage < 1 || stage > 3) throw ConfigError("--stage must be 1, 2 or 3");
    require_out(rc);
    DataTable t = load_dataset(rc, out);
    RunLock lock(rc.out);
    DataTable data = t;
    if (stage > 1) {
        const std::string target = UhisrPlan::builtin().stage(stage).target;
        DataTable latents;
        try {
            latents = load_latents(rc.out, t.rows());
        } catch (const MissingArtifact&) {
            throw MissingArtifact("missing upstream latent '" + target + "': run train --stage " +
                                  std::to_string(stage - 1) + " first");
        }
        if (!latents.has(target))
            throw MissingArtifact("missing upstream latent '" + target + "' in latents.csv");
        data = merge_columns(t, latents);
    }
    const TrainConfig tc = stage_train_config(rc, stage);
    StageResult r = train_stage(UhisrPlan::builtin().stage(stage), data, run_split(rc, t), tc);
    save_stage(rc.out, r, rc.seed, tc);
    update_latents(rc.out, r.latents, stage);
    out << "stage " << stage << ": best epoch " << r.history.best_epoch + 1 << ", valid RMSE "
        << fmt(r.history.best_valid_rmse) << ", test R2 " << fmt(r.test_r2) << ", test RMSE "
        << fmt(r.test_rmse) << "\n";
    return kExitOk;
}

void write_level(const fs::path& dir, const LevelResult& r) {
    write_atomic(dir / ("frontier_" + r.level.name + ".txt"), r.frontier);
}

int cmd_distill(const RunConfig& rc, const std::string& level_name, std::ostream& out) {
    const auto& levels = pipeline_levels();
    auto it = std::find_if(levels.begin(), levels.end(), [&](const LevelSpec& l) { return l.name == level_name; });
    if (it == levels.end()) throw ConfigError("unknown level '" + level_name + "'");
    require_out(rc);
    DataTable t = load_dataset(rc, out);
    RunLock lock(rc.out);
    DataTable data = merge_columns(t, load_latents(rc.out, t.rows()));
    SRConfig sr = level_config(*it);
    sr.seed = derive_seed(rc.seed, "sr:" + it->name);
    rc.apply_sr(sr, *it);
    LevelResult r = distill_level(*it, data, run_split(rc, t), sr);
    write_level(rc.out, r);
    const std::string eq = it->name + " = " + print(r.selected.expr, VarTable(it->inputs));
    write_atomic(rc.out / ("selected_" + it->name + ".txt"), eq + "\n");
    out << r.frontier << "selected: " << eq << "\n";
    return kExitOk;
}

PipelineResult pipeline_run(const RunConfig& rc, const DataTable& t, std::ostream& out) {
    PipelineConfig pc;
    pc.seed = rc.seed;
    pc.train = rc.train;
    pc.sr_override = [&rc](SRConfig& cfg, const LevelSpec& level) { rc.apply_sr(cfg, level); };
    pc.log = &out;
    pc.on_stage = [&](const StageResult& r) {
        const int s = r.net.spec().number;
        save_stage(rc.out, r, rc.seed, stage_train_config(rc, s));
        update_latents(rc.out, r.latents, s);
    };
    pc.on_level = [&](const LevelResult& r) { write_level(rc.out, r); };
    PipelineResult res = run_pipeline(t, UhisrPlan::builtin(), pc);
    write_atomic(rc.out / "equations.txt", print_system(res.system));
    write_atomic(rc.out / "report.csv", report_csv(res.report));
    return res;
}

int cmd_pipeline(const RunConfig& rc, std::ostream& out) {
    require_out(rc);
    DataTable t = load_dataset(rc, out);
    RunLock lock(rc.out);
    PipelineResult res = pipeline_run(rc, t, out);
    out << print_system(res.system, PrintStyle::Display) << report_csv(res.report);
    return kExitOk;
}

std::string predictions_csv(const DataTable& t, const std::vector<double>& pred) {
    DataTable p({"Rf_pred"}, {pred}, t.ids());
    return to_csv(p);
}

int cmd_predict(const RunConfig& rc, const std::string& system_path, std::ostream& out) {
    if (system_path.empty()) throw ConfigError("predict needs --system FILE");
    EquationSystem sys = load_system(system_path);
    DataTable t = load_dataset(rc, out, false);
    std::vector<double> pred = predict(sys, t);
    const std::string csv = predictions_csv(t, pred);
    if (!rc.out.empty()) {
        RunLock lock(rc.out);
        write_atomic(rc.out / "predictions.csv", csv);
    } else {
        out << csv;
    }
    if (t.has(schema::target_column)) {
        FitReport r = fit_report(sys, t);
        const FitRow& c = r.rows.back();
        out << "R2 " << (c.r2 ? fmt(*c.r2) : "NA") << ", RMSE " << (c.rmse ? fmt(*c.rmse) : "NA");
        if (c.nonfinite) out << ", non-finite rows " << c.nonfinite;
        out << "\n";
    }
    return kExitOk;
}

int cmd_probe(const RunConfig& rc, int stage, std::ostream& out) {
    if (stage < 1 || stage > 3) throw ConfigError("--stage must be 1, 2 or 3");
    require_out(rc);
    const fs::path params = rc.out / ("stage" + std::to_string(stage) + ".params");
    if (!fs::exists(params)) throw MissingArtifact("missing artifact '" + params.string() + "'");
    const StageSpec spec = UhisrPlan::builtin().stage(stage);
    StageNet net(spec, load_params(params));

    std::string csv = "latent,feature,value\n";
    auto emit = [&](const std::string& latent, std::vector<std::pair<std::string, double>> probes,
                    bool descending, const char* title) {
        std::stable_sort(probes.begin(), probes.end(), [&](const auto& a, const auto& b) {
            return descending ? a.second > b.second : a.second < b.second;
        });
        out << title << " (" << latent << ")\n";
        for (const auto& [name, v] : probes) {
            char line[96];
            std::snprintf(line, sizeof line, "  %-12s %12.6f\n", name.c_str(), v);
            out << line;
            csv += latent + "," + name + "," + format_number(v) + "\n";
        }
    };
    if (stage == 1) {
        emit("Psi", unit_probes(net, "Psi"), false, "pure-solvent probes");
    } else if (stage == 2) {
        emit("beta", polarity_probes(net, "beta"), true, "FG polarity, probe(one-hot) - probe(zero)");
    } else {
        for (const auto& c : spec.clusters)
            emit(c.latent, polarity_probes(net, c.latent), true, "probe(one-hot) - probe(zero)");
    }
    RunLock lock(rc.out);
    write_atomic(rc.out / ("probe_stage" + std::to_string(stage) + ".csv"), csv);
    return kExitOk;
}

int cmd_reproduce(const RunConfig& rc, std::ostream& out) {
    require_out(rc);
    require_data(rc);
    cmd_validate(rc, out);
    DataTable t = load_dataset(rc, out);
    RunLock lock(rc.out);
    PipelineResult res = pipeline_run(rc, t, out);
    std::vector<double> pred = predict(res.system, t);
    write_atomic(rc.out / "predictions.csv", predictions_csv(t, pred));

    const FitRow* rf = nullptr;
    for (const auto& r : res.report.rows)
        if (r.level == schema::target_column) rf = &r;
    struct Check {
        std::string name;
        double value;
        bool pass;
    };
    const double s1 = res.stages.front().test_r2;
    const double r2 = rf && rf->r2 ? *rf->r2 : std::nan("");
    const double e = rf && rf->rmse ? *rf->rmse : std::nan("");
    std::vector<Check> checks{{"stage-1 network test R2 >= 0.90", s1, s1 >= 0.90},
                              {"Rf equation test R2 >= 0.85", r2, r2 >= 0.85},
                              {"Rf equation test RMSE <= 0.13", e, e <= 0.13}};
    bool all = true;
    for (const auto& c : checks) {
        out << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << fmt(c.value) << ")\n";
        all = all && c.pass;
    }
    return all ? kExitOk : kExitAcceptance;
}

int cmd_synth(const RunConfig& rc, std::ostream& out) {
    if (rc.out.empty()) throw ConfigError("synth needs --out FILE");
    SyntheticOptions so;
    so.seed = rc.seed;
    SyntheticTlc s = make_synthetic_tlc(so);
    write_atomic(rc.out, to_csv(s.table));
    out << "wrote " << s.table.rows() << " rows to " << rc.out.string() << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical symbolic regression for TLC retention factors", "uhisr"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--data", o.data, "TLC dataset CSV");
    app.add_option("--out", o.out, "run directory (synth: output file)");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--config", o.config, "key=value config file");

    auto* validate = app.add_subcommand("validate", "check a dataset against the schema");
    auto* train = app.add_subcommand("train", "train one network stage");
    train->add_option("--stage", o.stage, "stage number (1-3)")->required();
    auto* distill = app.add_subcommand("distill", "symbolic regression for one equation level");
    distill->add_option("--level", o.level, "level name (Rf, Psi, xi, alpha, beta, gamma1..gamma5)")->required();
    auto* pipeline = app.add_subcommand("pipeline", "train all stages and distil every level");
    auto* predict_cmd = app.add_subcommand("predict", "evaluate an equation system on a dataset");
    predict_cmd->add_option("--system", o.system, "equation system file")->required();
    auto* probe = app.add_subcommand("probe", "probe trained sub-models with unit inputs");
    probe->add_option("--stage", o.stage, "stage number (1-3)")->required();
    auto* reproduce = app.add_subcommand("reproduce", "validate, run the pipeline, predict and check thresholds");
    auto* synth = app.add_subcommand("synth", "write a synthetic TLC-shaped dataset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        const RunConfig rc = resolve(o);
        if (validate->parsed()) return cmd_validate(rc, out);
        if (train->parsed()) return cmd_train(rc, o.stage, out);
        if (distill->parsed()) return cmd_distill(rc, o.level, out);
        if (pipeline->parsed()) return cmd_pipeline(rc, out);
        if (predict_cmd->parsed()) return cmd_predict(rc, o.system, out);
        if (probe->parsed()) return cmd_probe(rc, o.stage, out);
        if (reproduce->parsed()) return cmd_reproduce(rc, out);
        if (synth->parsed()) return cmd_synth(rc, out);
    } catch (const MissingArtifact& e) {
        err << "error: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace uhisr
