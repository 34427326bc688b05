#pragma once

#include "uhisr/dataset.hpp"
#include "uhisr/eqsystem.hpp"
#include "uhisr/neural.hpp"
#include "uhisr/symreg.hpp"

#include <array>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace uhisr {

struct ClusterSpec {
    std::string latent;
    std::vector<std::string> features;
};

struct StageSpec {
    int number = 1;
    std::vector<ClusterSpec> clusters;
    std::string target;
    Activation head_output = Activation::Linear;
    int hidden_width = 50;
    int hidden_layers = 2;

    /// Cluster features concatenated in cluster order.
    std::vector<std::string> input_columns() const;
    std::vector<std::string> latent_names() const;
    int cluster_index(std::string_view latent) const;  // -1 when absent
    /// Checks cluster count, disjointness and that every feature is in
    /// `available`.
    void validate(const std::vector<std::string>& available) const;
};

struct UhisrPlan {
    std::vector<StageSpec> stages;

    /// Solvent/solute split, then distribution/FG split, then five FG
    /// sub-clusters.
    static UhisrPlan builtin();
    const StageSpec& stage(int number) const;
};

class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sub-model per cluster feeding a head MLP. Each sub-model reads only its
/// own block of the stacked input.
class StageNet {
public:
    StageNet(const StageSpec& spec, Rng& rng);
    /// `nets` holds the sub-models in cluster order followed by the head.
    StageNet(const StageSpec& spec, std::vector<MlpParams> nets);

    Matrix predict(const Matrix& X) const;
    double fit_batch(const Matrix& X, const Matrix& y, const AdamConfig& cfg);

    /// One row per latent.
    Matrix latents(const Matrix& X) const;
    /// Sub-model output for a cluster-width input vector.
    double probe(std::string_view latent, const Vector& input) const;

    std::vector<MlpParams> params() const;
    const StageSpec& spec() const { return spec_; }
    const MlpParams& sub_model(std::size_t i) const { return subs_.at(i); }
    const MlpParams& head() const { return head_; }
    std::size_t parameter_count() const;

private:
    Matrix block(const Matrix& X, std::size_t i) const;

    StageSpec spec_;
    std::vector<Eigen::Index> offsets_;
    std::vector<MlpParams> subs_;
    MlpParams head_;
    std::vector<AdamState> sub_adam_;
    AdamState head_adam_;
};

std::vector<MlpSpec> stage_mlp_specs(const StageSpec& spec);
std::size_t stage_parameter_count(const StageSpec& spec);

/// Stacked input matrix (input columns x rows); all rows when `rows` is empty.
Matrix stage_input(const StageSpec& spec, const DataTable& table, std::span<const std::size_t> rows = {});
Matrix row_vector(const std::vector<double>& values, std::span<const std::size_t> rows = {});

struct StageResult {
    StageNet net;
    TrainHistory history;
    DataTable latents;  // one column per latent, every table row
    double test_r2 = 0.0;
    double test_rmse = 0.0;
};

/// Trains on the split's train rows against the stage target column,
/// keeps the best validation checkpoint and extracts latents for all rows.
StageResult train_stage(const StageSpec& spec, const DataTable& table, const SplitIndices& split,
                        const TrainConfig& cfg);

DataTable extract_latents(const StageNet& net, const DataTable& table);

/// probe(e_i) - probe(0) for every feature of the latent's cluster.
std::vector<std::pair<std::string, double>> polarity_probes(const StageNet& net, std::string_view latent);
/// probe(e_i) for every feature of the latent's cluster.
std::vector<std::pair<std::string, double>> unit_probes(const StageNet& net, std::string_view latent);

// ------------------------------------------------------------- distillation

struct LevelSpec {
    std::string name;                 // equation name and target column
    std::vector<std::string> inputs;  // raw columns or latents
    int stage = 1;                    // latents needed come from stages <= this
    bool rf = false;                  // top-level Rf equation
};

/// The ten equation slots in system order (gamma1..gamma5, beta, alpha, xi,
/// Psi, Rf).
const std::vector<LevelSpec>& pipeline_levels();
const LevelSpec& pipeline_level(std::string_view name);
SRConfig level_config(const LevelSpec& level);

struct LevelResult {
    LevelSpec level;
    ParetoFront front;
    Candidate selected;
    std::string frontier;  // frontier_table text
    double seconds = 0.0;
};

/// Fits the level on the split's train rows of `data` (raw columns plus
/// latents).
LevelResult distill_level(const LevelSpec& level, const DataTable& data, const SplitIndices& split,
                          const SRConfig& cfg);

/// Maps a level's selected expression onto the system variable table.
Expr to_system_expr(const Expr& level_expr, const LevelSpec& level, const EquationSystem& sys);

EquationSystem assemble_system(const std::vector<LevelResult>& levels);

DataTable merge_columns(const DataTable& base, const DataTable& extra);

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::array<TrainConfig, 3> train{};
    /// Applied to each level's default configuration before fitting.
    std::function<void(SRConfig&, const LevelSpec&)> sr_override;
    std::ostream* log = nullptr;
    /// Called after each stage and level so callers can persist artifacts.
    std::function<void(const StageResult&)> on_stage;
    std::function<void(const LevelResult&)> on_level;
};

struct PipelineResult {
    SplitIndices split;
    std::vector<StageResult> stages;
    DataTable latents;
    std::vector<LevelResult> levels;  // system order
    EquationSystem system;
    FitReport report;                 // test rows
};

PipelineResult run_pipeline(const DataTable& table, const UhisrPlan& plan, const PipelineConfig& cfg);

}  // namespace uhisr
