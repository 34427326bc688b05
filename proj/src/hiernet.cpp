#include "uhisr/hiernet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace uhisr {

// ------------------------------------------------------------------- specs

std::vector<std::string> StageSpec::input_columns() const {
    std::vector<std::string> out;
    for (const auto& c : clusters) out.insert(out.end(), c.features.begin(), c.features.end());
    return out;
}

std::vector<std::string> StageSpec::latent_names() const {
    std::vector<std::string> out;
    for (const auto& c : clusters) out.push_back(c.latent);
    return out;
}

int StageSpec::cluster_index(std::string_view latent) const {
    for (std::size_t i = 0; i < clusters.size(); ++i)
        if (clusters[i].latent == latent) return static_cast<int>(i);
    return -1;
}

void StageSpec::validate(const std::vector<std::string>& available) const {
    if (clusters.size() < 2)
        throw std::invalid_argument("stage " + std::to_string(number) + " needs at least two clusters");
    if (target.empty()) throw std::invalid_argument("stage " + std::to_string(number) + " has no target");
    std::set<std::string> seen, latents;
    for (const auto& c : clusters) {
        if (c.features.empty()) throw std::invalid_argument("cluster '" + c.latent + "' has no features");
        if (!latents.insert(c.latent).second)
            throw std::invalid_argument("latent '" + c.latent + "' appears twice");
        for (const auto& f : c.features) {
            if (std::find(available.begin(), available.end(), f) == available.end())
                throw SchemaError("cluster '" + c.latent + "' uses unknown column '" + f + "'");
            if (!seen.insert(f).second)
                throw std::invalid_argument("column '" + f + "' belongs to more than one cluster");
        }
    }
    if (hidden_width < 1 || hidden_layers < 0) throw std::invalid_argument("invalid hidden layer shape");
}

UhisrPlan UhisrPlan::builtin() {
    std::vector<std::string> solute = schema::solute_columns();
    StageSpec s1{1,
                 {{"Psi", schema::solvent_columns()}, {"xi", solute}},
                 std::string(schema::target_column),
                 Activation::Sigmoid};
    StageSpec s2{2, {{"alpha", schema::distribution_columns()}, {"beta", schema::fg_columns()}}, "xi",
                 Activation::Linear};
    StageSpec s3{3,
                 {{"gamma1", {"CtAmide", "CtCO2H"}},
                  {"gamma2", {"CtNH2", "CtOH", "CtPhenol"}},
                  {"gamma3", {"CtNO2", "CtRCO2R"}},
                  {"gamma4", {"CtF", "CtAldehyde", "CtR2CO", "CtCN", "CtROR"}},
                  {"gamma5", {"CtCl", "CtBr", "CtI", "CtMe"}}},
                 "beta",
                 Activation::Linear};
    return UhisrPlan{{s1, s2, s3}};
}

const StageSpec& UhisrPlan::stage(int number) const {
    for (const auto& s : stages)
        if (s.number == number) return s;
    throw std::invalid_argument("plan has no stage " + std::to_string(number));
}

std::vector<MlpSpec> stage_mlp_specs(const StageSpec& spec) {
    std::vector<int> hidden(static_cast<std::size_t>(spec.hidden_layers), spec.hidden_width);
    std::vector<MlpSpec> out;
    for (const auto& c : spec.clusters)
        out.push_back(MlpSpec::dense(static_cast<int>(c.features.size()), hidden, Activation::Linear));
    out.push_back(MlpSpec::dense(static_cast<int>(spec.clusters.size()), hidden, spec.head_output));
    return out;
}

std::size_t stage_parameter_count(const StageSpec& spec) {
    std::size_t total = 0;
    for (const auto& s : stage_mlp_specs(spec)) total += s.parameter_count();
    return total;
}

// ---------------------------------------------------------------- StageNet

StageNet::StageNet(const StageSpec& spec, Rng& rng) : spec_(spec) {
    auto specs = stage_mlp_specs(spec_);
    std::vector<MlpParams> nets;
    for (const auto& s : specs) nets.push_back(init_mlp(s, rng));
    *this = StageNet(spec, std::move(nets));
}

StageNet::StageNet(const StageSpec& spec, std::vector<MlpParams> nets) : spec_(spec) {
    auto specs = stage_mlp_specs(spec_);
    if (nets.size() != specs.size())
        throw ShapeError("stage " + std::to_string(spec.number) + " expects " + std::to_string(specs.size()) +
                         " networks, got " + std::to_string(nets.size()));
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (!(nets[i].spec.sizes == specs[i].sizes) || !(nets[i].spec.activations == specs[i].activations))
            throw ShapeError("network " + std::to_string(i) + " does not match stage " +
                             std::to_string(spec.number) + " layout");
    head_ = std::move(nets.back());
    nets.pop_back();
    subs_ = std::move(nets);
    Eigen::Index offset = 0;
    for (const auto& c : spec_.clusters) {
        offsets_.push_back(offset);
        offset += static_cast<Eigen::Index>(c.features.size());
    }
    for (const auto& s : subs_) sub_adam_.emplace_back(s);
    head_adam_ = AdamState(head_);
}

Matrix StageNet::block(const Matrix& X, std::size_t i) const {
    const auto width = static_cast<Eigen::Index>(spec_.clusters[i].features.size());
    return X.middleRows(offsets_[i], width);
}

Matrix StageNet::latents(const Matrix& X) const {
    const Eigen::Index expected = offsets_.back() + static_cast<Eigen::Index>(spec_.clusters.back().features.size());
    if (X.rows() != expected)
        throw ShapeError("stage input has " + std::to_string(X.rows()) + " rows, expected " +
                         std::to_string(expected));
    Matrix Z(static_cast<Eigen::Index>(subs_.size()), X.cols());
    for (std::size_t i = 0; i < subs_.size(); ++i) Z.row(static_cast<Eigen::Index>(i)) = forward(subs_[i], block(X, i));
    return Z;
}

Matrix StageNet::predict(const Matrix& X) const { return forward(head_, latents(X)); }

double StageNet::fit_batch(const Matrix& X, const Matrix& y, const AdamConfig& cfg) {
    std::vector<ForwardCache> caches(subs_.size());
    Matrix Z(static_cast<Eigen::Index>(subs_.size()), X.cols());
    for (std::size_t i = 0; i < subs_.size(); ++i)
        Z.row(static_cast<Eigen::Index>(i)) = forward(subs_[i], block(X, i), caches[i]);
    ForwardCache head_cache;
    Matrix pred = forward(head_, Z, head_cache);
    Matrix grad;
    const double loss = mse(pred, y, &grad);
    Matrix dZ;
    Gradients head_grad = backward(head_, head_cache, grad, &dZ);
    for (std::size_t i = 0; i < subs_.size(); ++i) {
        Gradients g = backward(subs_[i], caches[i], dZ.row(static_cast<Eigen::Index>(i)));
        adam_step(subs_[i], g, sub_adam_[i], cfg);
    }
    adam_step(head_, head_grad, head_adam_, cfg);
    return loss;
}

double StageNet::probe(std::string_view latent, const Vector& input) const {
    const int i = spec_.cluster_index(latent);
    if (i < 0) throw std::invalid_argument("stage has no latent '" + std::string(latent) + "'");
    if (input.size() != static_cast<Eigen::Index>(spec_.clusters[static_cast<std::size_t>(i)].features.size()))
        throw ShapeError("probe input length does not match cluster '" + std::string(latent) + "'");
    return forward_one(subs_[static_cast<std::size_t>(i)], input)(0);
}

std::vector<MlpParams> StageNet::params() const {
    std::vector<MlpParams> out = subs_;
    out.push_back(head_);
    return out;
}

std::size_t StageNet::parameter_count() const {
    std::size_t total = head_.spec.parameter_count();
    for (const auto& s : subs_) total += s.spec.parameter_count();
    return total;
}

// ------------------------------------------------------------------ stages

Matrix stage_input(const StageSpec& spec, const DataTable& table, std::span<const std::size_t> rows) {
    const auto cols = spec.input_columns();
    const std::size_t n = rows.empty() ? table.rows() : rows.size();
    Matrix X(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (!table.has(cols[j])) throw SchemaError("table has no column '" + cols[j] + "'");
        const auto& c = table.column(cols[j]);
        for (std::size_t k = 0; k < n; ++k)
            X(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = c[rows.empty() ? k : rows[k]];
    }
    return X;
}

Matrix row_vector(const std::vector<double>& values, std::span<const std::size_t> rows) {
    const std::size_t n = rows.empty() ? values.size() : rows.size();
    Matrix y(1, static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) y(0, static_cast<Eigen::Index>(k)) = values[rows.empty() ? k : rows[k]];
    return y;
}

DataTable extract_latents(const StageNet& net, const DataTable& table) {
    Matrix Z = net.latents(stage_input(net.spec(), table));
    std::vector<std::vector<double>> cols;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        std::vector<double> c(static_cast<std::size_t>(Z.cols()));
        for (Eigen::Index k = 0; k < Z.cols(); ++k) c[static_cast<std::size_t>(k)] = Z(i, k);
        cols.push_back(std::move(c));
    }
    return DataTable(net.spec().latent_names(), std::move(cols), table.ids());
}

StageResult train_stage(const StageSpec& spec, const DataTable& table, const SplitIndices& split,
                        const TrainConfig& cfg) {
    if (!table.has(spec.target)) {
        if (spec.number > 1)
            throw MissingArtifact("missing upstream latent '" + spec.target + "' for stage " +
                                  std::to_string(spec.number));
        throw SchemaError("table has no target column '" + spec.target + "'");
    }
    spec.validate(table.names());
    Rng init = make_stream(cfg.seed, hash_name("init"));
    StageNet net(spec, init);

    const auto& target = table.column(spec.target);
    Matrix Xtr = stage_input(spec, table, split.train);
    Matrix ytr = row_vector(target, split.train);
    Matrix Xva = stage_input(spec, table, split.valid);
    Matrix yva = row_vector(target, split.valid);
    TrainHistory history = train_model(net, Xtr, ytr, Xva, yva, cfg);

    Matrix pred = net.predict(stage_input(spec, table, split.test));
    std::vector<double> yt, yp;
    for (std::size_t k = 0; k < split.test.size(); ++k) {
        yt.push_back(target[split.test[k]]);
        yp.push_back(pred(0, static_cast<Eigen::Index>(k)));
    }
    double r2 = std::nan("");
    try {
        r2 = r_squared(yt, yp);
    } catch (const std::domain_error&) {
    }
    DataTable latents = extract_latents(net, table);
    return StageResult{std::move(net), std::move(history), std::move(latents), r2, rmse(yt, yp)};
}

std::vector<std::pair<std::string, double>> unit_probes(const StageNet& net, std::string_view latent) {
    const int i = net.spec().cluster_index(latent);
    if (i < 0) throw std::invalid_argument("stage has no latent '" + std::string(latent) + "'");
    const auto& features = net.spec().clusters[static_cast<std::size_t>(i)].features;
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t k = 0; k < features.size(); ++k) {
        Vector e = Vector::Zero(static_cast<Eigen::Index>(features.size()));
        e(static_cast<Eigen::Index>(k)) = 1.0;
        out.emplace_back(features[k], net.probe(latent, e));
    }
    return out;
}

std::vector<std::pair<std::string, double>> polarity_probes(const StageNet& net, std::string_view latent) {
    auto out = unit_probes(net, latent);
    const int i = net.spec().cluster_index(latent);
    const auto width = static_cast<Eigen::Index>(net.spec().clusters[static_cast<std::size_t>(i)].features.size());
    const double base = net.probe(latent, Vector::Zero(width));
    for (auto& [name, v] : out) v -= base;
    return out;
}

// ------------------------------------------------------------ distillation

const std::vector<LevelSpec>& pipeline_levels() {
    static const std::vector<LevelSpec> levels = [] {
        const UhisrPlan plan = UhisrPlan::builtin();
        std::vector<LevelSpec> out;
        for (const auto& c : plan.stage(3).clusters) out.push_back({c.latent, c.features, 3, false});
        out.push_back({"beta", plan.stage(3).latent_names(), 3, false});
        out.push_back({"alpha", schema::distribution_columns(), 2, false});
        out.push_back({"xi", {"alpha", "beta"}, 2, false});
        out.push_back({"Psi", schema::solvent_columns(), 1, false});
        out.push_back({std::string(schema::target_column), {"Psi", "xi"}, 1, true});
        return out;
    }();
    return levels;
}

const LevelSpec& pipeline_level(std::string_view name) {
    for (const auto& l : pipeline_levels())
        if (l.name == name) return l;
    throw std::invalid_argument("unknown level '" + std::string(name) + "'");
}

SRConfig level_config(const LevelSpec& level) {
    return level.rf ? SRConfig::rf_level() : SRConfig::index_level();
}

LevelResult distill_level(const LevelSpec& level, const DataTable& data, const SplitIndices& split,
                          const SRConfig& cfg) {
    for (const auto& name : level.inputs)
        if (!data.has(name)) throw MissingArtifact("missing upstream latent '" + name + "' for level " + level.name);
    if (!data.has(level.name)) throw MissingArtifact("missing upstream latent '" + level.name + "'");
    Columns X;
    for (const auto& name : level.inputs) {
        const auto& c = data.column(name);
        std::vector<double> sub;
        sub.reserve(split.train.size());
        for (std::size_t r : split.train) sub.push_back(c[r]);
        X.push_back(std::move(sub));
    }
    std::vector<double> y;
    for (std::size_t r : split.train) y.push_back(data.column(level.name)[r]);

    const auto start = std::chrono::steady_clock::now();
    ParetoFront front = fit(X, y, cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Candidate selected = select_equation(front);
    std::string table = frontier_table(front, VarTable(level.inputs));
    return LevelResult{level, std::move(front), std::move(selected), std::move(table), seconds};
}

Expr to_system_expr(const Expr& level_expr, const LevelSpec& level, const EquationSystem& sys) {
    std::vector<Node> nodes(level_expr.nodes().begin(), level_expr.nodes().end());
    for (auto& n : nodes)
        if (n.op == Op::Variable)
            n.var = static_cast<std::uint32_t>(sys.vars().index_of(level.inputs.at(n.var)));
    return Expr::from_nodes(std::move(nodes));
}

EquationSystem assemble_system(const std::vector<LevelResult>& levels) {
    EquationSystem sys;
    for (const auto& spec : pipeline_levels()) {
        auto it = std::find_if(levels.begin(), levels.end(),
                               [&](const LevelResult& r) { return r.level.name == spec.name; });
        if (it == levels.end()) throw MissingArtifact("no equation for level '" + spec.name + "'");
        sys.add(spec.name, to_system_expr(it->selected.expr, spec, sys), spec.rf);
    }
    return sys;
}

DataTable merge_columns(const DataTable& base, const DataTable& extra) {
    if (base.rows() != extra.rows() && base.cols() > 0)
        throw SchemaError("cannot merge tables with different row counts");
    DataTable out = base;
    for (std::size_t j = 0; j < extra.cols(); ++j) out.set_column(extra.names()[j], extra.column(j));
    return out;
}

PipelineResult run_pipeline(const DataTable& table, const UhisrPlan& plan, const PipelineConfig& cfg) {
    PipelineResult result;
    result.split = split(table, derive_seed(cfg.seed, "split"));
    auto log = [&](const std::string& msg) {
        if (cfg.log) *cfg.log << msg << std::endl;
    };

    DataTable data = table;
    result.latents = DataTable({}, {}, table.ids());
    auto run_levels = [&](int stage) {
        for (const auto& level : pipeline_levels()) {
            if (level.stage != stage) continue;
            SRConfig sr = level_config(level);
            sr.seed = derive_seed(cfg.seed, "sr:" + level.name);
            if (cfg.sr_override) cfg.sr_override(sr, level);
            LevelResult r = distill_level(level, data, result.split, sr);
            log("level " + level.name + ": " + print(r.selected.expr, VarTable(level.inputs)) + "  (" +
                std::to_string(r.seconds) + " s)");
            if (cfg.on_level) cfg.on_level(r);
            result.levels.push_back(std::move(r));
        }
    };

    for (int s = 1; s <= 3; ++s) {
        TrainConfig tc = cfg.train[static_cast<std::size_t>(s - 1)];
        tc.seed = derive_seed(cfg.seed, "stage" + std::to_string(s));
        StageResult r = train_stage(plan.stage(s), data, result.split, tc);
        log("stage " + std::to_string(s) + ": test R2 " + std::to_string(r.test_r2) + ", RMSE " +
            std::to_string(r.test_rmse) + ", best epoch " + std::to_string(r.history.best_epoch + 1));
        data = merge_columns(data, r.latents);
        result.latents = merge_columns(result.latents, r.latents);
        if (cfg.on_stage) cfg.on_stage(r);
        result.stages.push_back(std::move(r));
        run_levels(s);
    }

    std::vector<LevelResult> ordered;
    for (const auto& spec : pipeline_levels())
        for (const auto& r : result.levels)
            if (r.level.name == spec.name) ordered.push_back(r);
    result.levels = std::move(ordered);
    result.system = assemble_system(result.levels);
    result.report = fit_report(result.system, table, &result.latents, result.split.test);
    return result;
}

}  // namespace uhisr
