#pragma once

#include "uhisr/expr.hpp"
#include "uhisr/random.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace uhisr {

/// Feature matrix stored as one vector per variable.
using Columns = std::vector<std::vector<double>>;

enum class Link { Identity, Sigmoid };

std::string_view link_name(Link link);

enum class MutationKind { Point, Subtree, Jitter, Insert, Delete, Fold };
inline constexpr int kMutationKinds = 6;

struct MutationWeights {
    double point = 0.25;
    double subtree = 0.2;
    double jitter = 0.3;
    double insert = 0.1;
    double remove = 0.1;
    double fold = 0.05;

    double weight(MutationKind kind) const;
    double total() const { return point + subtree + jitter + insert + remove + fold; }
};

struct SRConfig {
    int populations = 8;
    int population_size = 50;
    int ncycles_per_iteration = 500;
    int niterations = 200;
    int maxsize = 50;
    int maxdepth = 10;
    std::vector<Op> binary_ops{Op::Add, Op::Sub, Op::Mul, Op::Div};
    std::vector<Op> unary_ops{Op::Square, Op::Cube, Op::Exp};
    ComplexityWeights weights{};
    Link link = Link::Identity;
    std::uint64_t seed = 0;
    MutationWeights mutation{};

    double crossover_probability = 0.3;
    int tournament_size = 5;
    double migration_fraction = 0.1;
    /// Share of each island replaced by copies of frontier members after
    /// every iteration.
    double frontier_migration_fraction = 0.035;
    /// Probability that a child outside the frontier still gets its
    /// constants optimized.
    double optimize_probability = 0.01;
    int optimizer_iterations = 200;
    /// Stop once the frontier's best loss is at or below this value
    /// (negative disables).
    double early_stop_loss = -1.0;
    /// Worker threads for island evolution; results do not depend on it.
    int threads = 1;

    /// Budget for the top-level Rf ~ (Psi, xi) equation.
    static SRConfig rf_level();
    /// Budget for the polarity-index equations.
    static SRConfig index_level();

    void validate() const;
};

struct Candidate {
    Expr expr;
    double loss = 0.0;
    int complexity = 0;
    double score = 0.0;
};

/// Non-dominated (complexity, loss) candidates: strictly increasing
/// complexity and strictly decreasing loss.
class ParetoFront {
public:
    /// Inserts `c` unless an incumbent has complexity <= c and loss <= c.
    /// Non-finite losses are ignored. Returns whether `c` was inserted.
    bool update(const Candidate& c);
    /// True when `update` would insert a candidate with these values.
    bool admits(int complexity, double loss) const;

    const std::vector<Candidate>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    double best_loss() const;

    /// Fills in each member's score: the drop in log-loss per unit of added
    /// complexity relative to the previous member. Scoring starts at the
    /// first variable-free member when there is one (it and everything
    /// simpler score 0), otherwise at the first member.
    void compute_scores();
    /// Members before this index fit worse than a constant.
    std::size_t scoring_start() const;

private:
    std::vector<Candidate> members_;
};

ParetoFront pareto_update(ParetoFront front, const Candidate& c);

/// Highest-scoring member from scoring_start() on; ties go to lower
/// complexity.
Candidate select_equation(const ParetoFront& front);

/// Mean squared error of link(expr) against y. Rows with identical feature
/// values are evaluated once and weighted, which leaves the loss unchanged
/// up to rounding. Non-finite predictions give an infinite loss.
class Objective {
public:
    Objective(const Columns& X, std::span<const double> y, Link link);

    double loss(const Expr& expr);
    std::vector<double> predict(const Expr& expr);

    std::size_t variables() const { return data_->columns.size(); }
    std::size_t rows() const { return data_->rows; }
    std::size_t distinct_rows() const { return data_->group_count; }
    Link link() const { return data_->link; }
    /// Constant that minimises the loss among constant expressions.
    double best_constant() const { return data_->best_constant; }

private:
    struct Data {
        Columns columns;             // one value per distinct row
        std::vector<double> target;  // group mean of y
        std::vector<double> weight;  // group size
        std::vector<const double*> pointers;
        double within_ss = 0.0;
        std::size_t rows = 0;
        std::size_t group_count = 0;
        double best_constant = 0.0;
        Link link = Link::Identity;
    };
    std::shared_ptr<const Data> data_;
    BatchEvaluator evaluator_;
    std::vector<double> buffer_;
};

/// Random tree built by repeatedly expanding a random leaf into an operator
/// node with fresh leaves.
Expr random_tree(int operators, const SRConfig& cfg, std::size_t nvars, Rng& rng);

struct MutationResult {
    Expr expr;
    MutationKind kind;
    bool changed;
};

/// Applies one weighted-random mutation. Results that break maxsize or
/// maxdepth are retried a bounded number of times; the input is returned
/// when every retry fails or the chosen mutation does not apply.
MutationResult mutate_detailed(const Expr& expr, const SRConfig& cfg, std::size_t nvars, Rng& rng);
Expr mutate(const Expr& expr, const SRConfig& cfg, std::size_t nvars, Rng& rng);
Expr mutate_with(MutationKind kind, const Expr& expr, const SRConfig& cfg, std::size_t nvars,
                 Rng& rng);

/// Replaces a random subtree of `a` with a random subtree of `b`.
Expr crossover(const Expr& a, const Expr& b, const SRConfig& cfg, Rng& rng);

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
};

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> start, int max_iterations);

/// Nelder-Mead over the expression's constants; best of a run from the
/// current values and a run from perturbed values. Never returns a worse
/// expression than the input.
Expr optimize_constants(const Expr& expr, Objective& objective, Rng& rng, int max_iterations = 200);
Expr optimize_constants(const Expr& expr, const Columns& X, std::span<const double> y, Link link,
                        std::uint64_t seed = 0);

using IterationCallback = std::function<void(int iteration, const ParetoFront& front)>;

ParetoFront fit(const Columns& X, std::span<const double> y, const SRConfig& cfg,
                const IterationCallback& on_iteration = {});

/// Text table with one member per line: complexity, loss, score, equation.
std::string frontier_table(const ParetoFront& front, const VarTable& vars);

}  // namespace uhisr
