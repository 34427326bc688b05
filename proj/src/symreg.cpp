#include "uhisr/symreg.hpp"

#include "uhisr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace uhisr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxRetries = 10;
}  // namespace

std::string_view link_name(Link link) { return link == Link::Sigmoid ? "sigmoid" : "identity"; }

double MutationWeights::weight(MutationKind kind) const {
    switch (kind) {
    case MutationKind::Point: return point;
    case MutationKind::Subtree: return subtree;
    case MutationKind::Jitter: return jitter;
    case MutationKind::Insert: return insert;
    case MutationKind::Delete: return remove;
    case MutationKind::Fold: return fold;
    }
    return 0.0;
}

SRConfig SRConfig::rf_level() {
    SRConfig c;
    c.ncycles_per_iteration = 50;
    c.unary_ops = {Op::Square};
    c.link = Link::Sigmoid;
    return c;
}

SRConfig SRConfig::index_level() {
    SRConfig c;
    c.ncycles_per_iteration = 500;
    c.unary_ops = {Op::Square, Op::Cube, Op::Exp};
    c.link = Link::Identity;
    return c;
}

void SRConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("SRConfig: ") + what);
    };
    require(populations > 0, "populations must be positive");
    require(population_size >= tournament_size, "population_size must be >= tournament_size");
    require(tournament_size > 0, "tournament_size must be positive");
    require(ncycles_per_iteration > 0, "ncycles_per_iteration must be positive");
    require(niterations > 0, "niterations must be positive");
    require(maxsize > 0, "maxsize must be positive");
    require(maxdepth >= 1, "maxdepth must be >= 1");
    require(!binary_ops.empty() || !unary_ops.empty(), "operator sets must not both be empty");
    for (Op op : binary_ops) require(is_binary(op), "binary_ops holds a non-binary operator");
    for (Op op : unary_ops) require(is_unary(op), "unary_ops holds a non-unary operator");
    require(mutation.total() > 0.0, "mutation weights must not all be zero");
    require(crossover_probability >= 0.0 && crossover_probability <= 1.0,
            "crossover_probability must be in [0,1]");
    require(migration_fraction >= 0.0 && migration_fraction <= 1.0,
            "migration_fraction must be in [0,1]");
    require(threads >= 1, "threads must be >= 1");
}

// -------------------------------------------------------------- ParetoFront

bool ParetoFront::admits(int complexity, double loss) const {
    if (!std::isfinite(loss)) return false;
    for (const auto& m : members_) {
        if (m.complexity > complexity) break;
        if (m.loss <= loss) return false;
    }
    return true;
}

bool ParetoFront::update(const Candidate& c) {
    if (!admits(c.complexity, c.loss)) return false;
    std::erase_if(members_, [&](const Candidate& m) {
        return m.complexity >= c.complexity && m.loss >= c.loss;
    });
    auto pos = std::lower_bound(members_.begin(), members_.end(), c.complexity,
                                [](const Candidate& m, int k) { return m.complexity < k; });
    members_.insert(pos, c);
    return true;
}

double ParetoFront::best_loss() const { return members_.empty() ? kInf : members_.back().loss; }

std::size_t ParetoFront::scoring_start() const {
    for (std::size_t i = 0; i < members_.size(); ++i)
        if (!members_[i].expr.has_variables()) return i;
    return 0;
}

void ParetoFront::compute_scores() {
    const double floor = std::numeric_limits<double>::min();
    const std::size_t start = scoring_start();
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (i <= start) {
            members_[i].score = 0.0;
            continue;
        }
        const auto& prev = members_[i - 1];
        auto& cur = members_[i];
        cur.score = (std::log(std::max(prev.loss, floor)) - std::log(std::max(cur.loss, floor))) /
                    static_cast<double>(cur.complexity - prev.complexity);
    }
}

ParetoFront pareto_update(ParetoFront front, const Candidate& c) {
    front.update(c);
    return front;
}

Candidate select_equation(const ParetoFront& front) {
    if (front.empty()) throw std::invalid_argument("select_equation: empty front");
    ParetoFront scored = front;
    scored.compute_scores();
    const auto& m = scored.members();
    std::size_t best = scored.scoring_start();
    for (std::size_t i = best + 1; i < m.size(); ++i)
        if (m[i].score > m[best].score) best = i;
    return m[best];
}

// ---------------------------------------------------------------- Objective

namespace {

double robust_mean(std::span<const double> v) {
    // Offsetting by the first element keeps the mean of identical values exact.
    const double base = v.front();
    double acc = 0.0;
    for (double x : v) acc += x - base;
    return base + acc / static_cast<double>(v.size());
}

}  // namespace

Objective::Objective(const Columns& X, std::span<const double> y, Link link) {
    if (y.empty()) throw std::invalid_argument("symbolic regression needs at least one row");
    for (const auto& col : X)
        if (col.size() != y.size()) throw std::invalid_argument("X and y row counts differ");
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("target contains non-finite values");

    auto data = std::make_shared<Data>();
    data->link = link;
    data->rows = y.size();
    data->columns.assign(X.size(), {});

    std::map<std::vector<double>, std::size_t> groups;
    std::vector<std::vector<double>> members;
    std::vector<double> key(X.size());
    for (std::size_t r = 0; r < y.size(); ++r) {
        for (std::size_t j = 0; j < X.size(); ++j) key[j] = X[j][r];
        auto [it, inserted] = groups.try_emplace(key, members.size());
        if (inserted) {
            members.emplace_back();
            for (std::size_t j = 0; j < X.size(); ++j) data->columns[j].push_back(key[j]);
        }
        members[it->second].push_back(y[r]);
    }
    data->group_count = members.size();
    for (const auto& ys : members) {
        const double mean = robust_mean(ys);
        data->target.push_back(mean);
        data->weight.push_back(static_cast<double>(ys.size()));
        for (double v : ys) data->within_ss += (v - mean) * (v - mean);
    }
    for (const auto& col : data->columns) data->pointers.push_back(col.data());

    const double m = robust_mean(y);
    data->best_constant = link == Link::Identity ? m : logit(m, 1e-12);
    data_ = std::move(data);
    buffer_.resize(data_->group_count);
}

std::vector<double> Objective::predict(const Expr& expr) {
    std::vector<double> out(data_->group_count);
    evaluator_.evaluate(expr, data_->pointers, data_->group_count, out);
    if (data_->link == Link::Sigmoid)
        for (double& v : out) v = std::isfinite(v) ? sigmoid(v) : v;
    return out;
}

double Objective::loss(const Expr& expr) {
    if (expr.max_variable() >= static_cast<int>(data_->columns.size())) return kInf;
    evaluator_.evaluate(expr, data_->pointers, data_->group_count, buffer_);
    const auto& t = data_->target;
    const auto& w = data_->weight;
    double ss = 0.0;
    if (data_->link == Link::Sigmoid) {
        for (std::size_t g = 0; g < buffer_.size(); ++g) {
            const double v = buffer_[g];
            if (!std::isfinite(v)) return kInf;
            const double d = sigmoid(v) - t[g];
            ss += w[g] * d * d;
        }
    } else {
        for (std::size_t g = 0; g < buffer_.size(); ++g) {
            const double v = buffer_[g];
            if (!std::isfinite(v)) return kInf;
            const double d = v - t[g];
            ss += w[g] * d * d;
        }
    }
    const double loss = (ss + data_->within_ss) / static_cast<double>(data_->rows);
    return std::isfinite(loss) ? loss : kInf;
}

// ----------------------------------------------------------- tree operators

namespace {

Expr random_leaf(std::size_t nvars, Rng& rng) {
    if (nvars > 0 && uniform01(rng) < 0.5)
        return Expr::variable(static_cast<std::uint32_t>(uniform_index(rng, nvars)));
    return Expr::constant(normal01(rng));
}

Op random_operator(const SRConfig& cfg, Rng& rng) {
    const std::size_t nu = cfg.unary_ops.size();
    const std::size_t nb = cfg.binary_ops.size();
    std::size_t k = uniform_index(rng, nu + nb);
    return k < nu ? cfg.unary_ops[k] : cfg.binary_ops[k - nu];
}

Expr operator_with_leaves(Op op, std::size_t nvars, Rng& rng) {
    if (is_unary(op)) return Expr::unary(op, random_leaf(nvars, rng));
    Expr a = random_leaf(nvars, rng);
    Expr b = random_leaf(nvars, rng);
    return Expr::binary(op, a, b);
}

std::vector<std::size_t> positions_where(const Expr& e, auto pred) {
    std::vector<std::size_t> out;
    auto nodes = e.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (pred(nodes[i])) out.push_back(i);
    return out;
}

bool within_bounds(const Expr& e, const SRConfig& cfg) {
    return complexity(e, cfg.weights) <= cfg.maxsize && e.depth() <= cfg.maxdepth;
}

MutationKind draw_kind(const MutationWeights& w, Rng& rng) {
    double u = uniform01(rng) * w.total();
    for (int k = 0; k < kMutationKinds; ++k) {
        auto kind = static_cast<MutationKind>(k);
        u -= w.weight(kind);
        if (u < 0.0) return kind;
    }
    return MutationKind::Fold;
}

// One attempt; nullopt-like (empty flag) when the mutation cannot apply.
bool apply_mutation(MutationKind kind, const Expr& e, const SRConfig& cfg, std::size_t nvars,
                    Rng& rng, Expr& out) {
    switch (kind) {
    case MutationKind::Point: {
        auto pos = positions_where(e, [&](const Node& n) {
            if (n.op == Op::Variable) return nvars > 1;
            if (is_unary(n.op)) return cfg.unary_ops.size() > 1;
            if (is_binary(n.op)) return cfg.binary_ops.size() > 1;
            return false;
        });
        if (pos.empty()) return false;
        std::size_t p = pos[uniform_index(rng, pos.size())];
        std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
        Node& n = nodes[p];
        if (n.op == Op::Variable) {
            auto v = static_cast<std::uint32_t>(uniform_index(rng, nvars - 1));
            n.var = v >= n.var ? v + 1 : v;
        } else {
            const auto& ops = is_unary(n.op) ? cfg.unary_ops : cfg.binary_ops;
            std::vector<Op> others;
            for (Op o : ops)
                if (o != n.op) others.push_back(o);
            n.op = others[uniform_index(rng, others.size())];
        }
        out = Expr::from_nodes(std::move(nodes));
        return true;
    }
    case MutationKind::Subtree: {
        std::size_t p = uniform_index(rng, e.size());
        int ops = static_cast<int>(uniform_index(rng, 4));
        out = e.replace_subtree(p, random_tree(ops, cfg, nvars, rng));
        return true;
    }
    case MutationKind::Jitter: {
        auto pos = positions_where(e, [](const Node& n) { return n.op == Op::Constant; });
        if (pos.empty()) return false;
        std::size_t p = pos[uniform_index(rng, pos.size())];
        std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
        double factor = std::exp(0.3 * normal01(rng));
        if (factor == 1.0) factor = std::nextafter(1.0, 2.0);
        nodes[p].value *= factor;
        if (nodes[p].value == 0.0) nodes[p].value = normal01(rng);
        out = Expr::from_nodes(std::move(nodes));
        return true;
    }
    case MutationKind::Insert: {
        std::size_t p = uniform_index(rng, e.size());
        Expr target = e.subtree(p);
        Op op = random_operator(cfg, rng);
        Expr wrapped;
        if (is_unary(op)) {
            wrapped = Expr::unary(op, target);
        } else if (uniform01(rng) < 0.5) {
            wrapped = Expr::binary(op, target, random_leaf(nvars, rng));
        } else {
            wrapped = Expr::binary(op, random_leaf(nvars, rng), target);
        }
        out = e.replace_subtree(p, wrapped);
        return true;
    }
    case MutationKind::Delete: {
        auto pos = positions_where(e, [](const Node& n) { return arity(n.op) > 0; });
        if (pos.empty()) return false;
        std::size_t p = pos[uniform_index(rng, pos.size())];
        std::size_t child = p + 1;
        if (is_binary(e.nodes()[p].op) && uniform01(rng) < 0.5) child = e.subtree_end(p + 1);
        out = e.replace_subtree(p, e.subtree(child));
        return true;
    }
    case MutationKind::Fold: {
        Expr f = fold_constants(e);
        if (f == e) return false;
        out = std::move(f);
        return true;
    }
    }
    return false;
}

}  // namespace

Expr random_tree(int operators, const SRConfig& cfg, std::size_t nvars, Rng& rng) {
    Expr tree = random_leaf(nvars, rng);
    for (int k = 0; k < operators; ++k) {
        auto leaves = positions_where(tree, [](const Node& n) { return arity(n.op) == 0; });
        std::size_t p = leaves[uniform_index(rng, leaves.size())];
        tree = tree.replace_subtree(p, operator_with_leaves(random_operator(cfg, rng), nvars, rng));
    }
    return tree;
}

Expr mutate_with(MutationKind kind, const Expr& expr, const SRConfig& cfg, std::size_t nvars,
                 Rng& rng) {
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        Expr out;
        if (!apply_mutation(kind, expr, cfg, nvars, rng, out)) return expr;
        if (within_bounds(out, cfg)) return out;
    }
    return expr;
}

MutationResult mutate_detailed(const Expr& expr, const SRConfig& cfg, std::size_t nvars, Rng& rng) {
    MutationKind kind = draw_kind(cfg.mutation, rng);
    Expr out = mutate_with(kind, expr, cfg, nvars, rng);
    bool changed = !(out == expr);
    return {std::move(out), kind, changed};
}

Expr mutate(const Expr& expr, const SRConfig& cfg, std::size_t nvars, Rng& rng) {
    return mutate_detailed(expr, cfg, nvars, rng).expr;
}

Expr crossover(const Expr& a, const Expr& b, const SRConfig& cfg, Rng& rng) {
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        std::size_t pa = uniform_index(rng, a.size());
        std::size_t pb = uniform_index(rng, b.size());
        Expr child = a.replace_subtree(pa, b.subtree(pb));
        if (within_bounds(child, cfg)) return child;
    }
    return a;
}

// -------------------------------------------------------------- Nelder-Mead

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> start, int max_iterations) {
    const std::size_t n = start.size();
    auto safe = [&](const std::vector<double>& x) {
        double v = f(x);
        return std::isfinite(v) ? v : kInf;
    };
    std::vector<std::vector<double>> simplex(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) {
        double step = 0.05 * std::abs(start[i]);
        if (step < 1e-3) step = 1e-3;
        simplex[i + 1][i] += step;
    }
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = safe(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    int it = 0;
    for (; it < max_iterations; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];

        double diameter = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t d = 0; d < n; ++d) {
                diameter = std::max(diameter, std::abs(simplex[i][d] - simplex[best][d]));
                scale = std::max(scale, std::abs(simplex[best][d]));
            }
        if (diameter <= 1e-15 * scale) break;
        if (std::isfinite(values[best]) && values[worst] == values[best] && diameter <= 1e-9 * scale)
            break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        for (std::size_t d = 0; d < n; ++d) trial[d] = centroid[d] + (centroid[d] - simplex[worst][d]);
        const double fr = safe(trial);
        if (fr < values[best]) {
            for (std::size_t d = 0; d < n; ++d)
                trial2[d] = centroid[d] + 2.0 * (centroid[d] - simplex[worst][d]);
            const double fe = safe(trial2);
            if (fe < fr) {
                simplex[worst] = trial2;
                values[worst] = fe;
            } else {
                simplex[worst] = trial;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = trial;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        for (std::size_t d = 0; d < n; ++d)
            trial2[d] = outside ? centroid[d] + 0.5 * (trial[d] - centroid[d])
                                : centroid[d] + 0.5 * (simplex[worst][d] - centroid[d]);
        const double fc = safe(trial2);
        if (fc < std::min(fr, values[worst])) {
            simplex[worst] = trial2;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t d = 0; d < n; ++d)
                simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
            values[i] = safe(simplex[i]);
        }
    }
    std::size_t best = static_cast<std::size_t>(
        std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best], it};
}

Expr optimize_constants(const Expr& expr, Objective& objective, Rng& rng, int max_iterations) {
    std::vector<double> c0 = expr.constants();
    if (c0.empty()) return expr;
    auto f = [&](std::span<const double> c) { return objective.loss(expr.with_constants(c)); };
    double best_value = objective.loss(expr);
    std::vector<double> best = c0;

    auto consider = [&](const NelderMeadResult& r) {
        if (r.value < best_value) {
            best_value = r.value;
            best = r.x;
        }
    };
    consider(nelder_mead(f, c0, max_iterations));
    std::vector<double> perturbed = c0;
    for (double& c : perturbed) c *= 1.0 + 0.5 * normal01(rng);
    consider(nelder_mead(f, perturbed, max_iterations));
    return expr.with_constants(best);
}

Expr optimize_constants(const Expr& expr, const Columns& X, std::span<const double> y, Link link,
                        std::uint64_t seed) {
    Objective objective(X, y, link);
    Rng rng = make_stream(seed, 0xC0DEull);
    return optimize_constants(expr, objective, rng);
}

// --------------------------------------------------------------------- fit

namespace {

struct Member {
    Expr expr;
    double loss = kInf;
    int complexity = 0;
    std::uint64_t birth = 0;
};

bool better(const Member& a, const Member& b) {
    if (a.loss != b.loss) return a.loss < b.loss;
    return a.complexity < b.complexity;
}

class Island {
public:
    Island(const SRConfig& cfg, Objective objective, std::uint64_t stream)
        : cfg_(cfg), objective_(std::move(objective)), rng_(make_stream(cfg.seed, stream)) {
        const std::size_t nvars = objective_.variables();
        for (int i = 0; i < cfg_.population_size; ++i) {
            Expr e;
            do {
                e = random_tree(static_cast<int>(uniform_index(rng_, 4)), cfg_, nvars, rng_);
            } while (!within_bounds(e, cfg_));
            members_.push_back(make_member(std::move(e)));
        }
    }

    // Runs one iteration of regularised evolution. `snapshot` is the global
    // frontier as of the start of the iteration; new entrants are recorded in
    // `found`.
    void evolve(const ParetoFront& snapshot) {
        found_ = ParetoFront{};
        for (const auto& m : members_) record(m);
        const std::size_t nvars = objective_.variables();
        for (int cycle = 0; cycle < cfg_.ncycles_per_iteration; ++cycle) {
            const Member& parent = tournament();
            Expr child;
            if (uniform01(rng_) < cfg_.crossover_probability) {
                const Member& other = tournament();
                child = crossover(parent.expr, other.expr, cfg_, rng_);
            } else {
                child = mutate(parent.expr, cfg_, nvars, rng_);
            }
            Member m = make_member(std::move(child));
            const bool has_constants = std::any_of(m.expr.nodes().begin(), m.expr.nodes().end(),
                                                   [](const Node& n) { return n.op == Op::Constant; });
            if (has_constants && std::isfinite(m.loss)) {
                const bool entrant = snapshot.admits(m.complexity, m.loss) &&
                                     found_.admits(m.complexity, m.loss);
                if (entrant || uniform01(rng_) < cfg_.optimize_probability) {
                    m.expr = optimize_constants(m.expr, objective_, rng_, cfg_.optimizer_iterations);
                    m.loss = objective_.loss(m.expr);
                }
            }
            record(m);
            replace_oldest(std::move(m));
        }
    }

    std::vector<Member> emigrants(std::size_t count) const {
        std::vector<Member> sorted = members_;
        std::stable_sort(sorted.begin(), sorted.end(), better);
        sorted.resize(std::min(count, sorted.size()));
        return sorted;
    }

    void immigrate(const std::vector<Member>& arrivals) {
        auto slots = distinct_slots(arrivals.size());
        for (std::size_t k = 0; k < slots.size(); ++k) {
            Member m = arrivals[k];
            m.birth = next_birth_++;
            members_[slots[k]] = std::move(m);
        }
    }

    void inject_frontier(const ParetoFront& front, std::size_t count) {
        if (front.empty()) return;
        auto slots = distinct_slots(count);
        for (std::size_t slot : slots) {
            const Candidate& c = front.members()[uniform_index(rng_, front.size())];
            members_[slot] = Member{c.expr, c.loss, c.complexity, next_birth_++};
        }
    }

    const ParetoFront& found() const { return found_; }

private:
    Member make_member(Expr e) {
        Member m;
        m.complexity = complexity(e, cfg_.weights);
        m.loss = objective_.loss(e);
        m.expr = std::move(e);
        m.birth = next_birth_++;
        return m;
    }

    void record(const Member& m) {
        if (std::isfinite(m.loss)) found_.update(Candidate{m.expr, m.loss, m.complexity, 0.0});
    }

    const Member& tournament() {
        std::size_t best = uniform_index(rng_, members_.size());
        for (int k = 1; k < cfg_.tournament_size; ++k) {
            std::size_t i = uniform_index(rng_, members_.size());
            if (better(members_[i], members_[best])) best = i;
        }
        return members_[best];
    }

    void replace_oldest(Member m) {
        auto oldest = std::min_element(members_.begin(), members_.end(),
                                       [](const Member& a, const Member& b) { return a.birth < b.birth; });
        *oldest = std::move(m);
    }

    std::vector<std::size_t> distinct_slots(std::size_t count) {
        std::vector<std::size_t> idx(members_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        count = std::min(count, idx.size());
        for (std::size_t k = 0; k < count; ++k) std::swap(idx[k], idx[k + uniform_index(rng_, idx.size() - k)]);
        idx.resize(count);
        return idx;
    }

    const SRConfig& cfg_;
    Objective objective_;
    Rng rng_;
    std::vector<Member> members_;
    ParetoFront found_;
    std::uint64_t next_birth_ = 0;
};

}  // namespace

ParetoFront fit(const Columns& X, std::span<const double> y, const SRConfig& cfg,
                const IterationCallback& on_iteration) {
    cfg.validate();
    if (X.empty()) throw std::invalid_argument("symbolic regression needs at least one feature");
    Objective objective(X, y, cfg.link);

    ParetoFront front;
    {
        Expr c = Expr::constant(objective.best_constant());
        front.update(Candidate{c, objective.loss(c), complexity(c, cfg.weights), 0.0});
    }

    std::vector<Island> islands;
    islands.reserve(static_cast<std::size_t>(cfg.populations));
    for (int i = 0; i < cfg.populations; ++i)
        islands.emplace_back(cfg, objective, static_cast<std::uint64_t>(i));

    const auto migrants = static_cast<std::size_t>(
        std::llround(cfg.migration_fraction * cfg.population_size));
    const auto injected = static_cast<std::size_t>(
        std::llround(cfg.frontier_migration_fraction * cfg.population_size));

    for (int iter = 0; iter < cfg.niterations; ++iter) {
        const ParetoFront snapshot = front;
        if (cfg.threads > 1 && islands.size() > 1) {
            std::vector<std::future<void>> jobs;
            std::size_t next = 0;
            while (next < islands.size()) {
                jobs.clear();
                for (int t = 0; t < cfg.threads && next < islands.size(); ++t, ++next) {
                    Island* island = &islands[next];
                    jobs.push_back(std::async(std::launch::async, [island, &snapshot] { island->evolve(snapshot); }));
                }
                for (auto& j : jobs) j.get();
            }
        } else {
            for (auto& island : islands) island.evolve(snapshot);
        }
        for (const auto& island : islands)
            for (const auto& c : island.found().members()) front.update(c);

        if (migrants > 0 && islands.size() > 1) {
            std::vector<std::vector<Member>> outgoing;
            for (const auto& island : islands) outgoing.push_back(island.emigrants(migrants));
            for (std::size_t i = 0; i < islands.size(); ++i)
                islands[(i + 1) % islands.size()].immigrate(outgoing[i]);
        }
        if (injected > 0)
            for (auto& island : islands) island.inject_frontier(front, injected);

        if (on_iteration) on_iteration(iter, front);
        if (cfg.early_stop_loss >= 0.0 && front.best_loss() <= cfg.early_stop_loss) break;
    }
    front.compute_scores();
    return front;
}

std::string frontier_table(const ParetoFront& front, const VarTable& vars) {
    ParetoFront scored = front;
    scored.compute_scores();
    std::string out = "complexity\tloss\tscore\tequation\n";
    char buf[64];
    for (const auto& c : scored.members()) {
        out += std::to_string(c.complexity);
        std::snprintf(buf, sizeof buf, "\t%.9g\t%.9g\t", c.loss, c.score);
        out += buf;
        out += print(c.expr, vars);
        out += '\n';
    }
    return out;
}

}  // namespace uhisr
