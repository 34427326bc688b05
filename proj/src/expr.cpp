#include "uhisr/expr.hpp"

#include "uhisr/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace uhisr {

int arity(Op op) {
    switch (op) {
    case Op::Constant:
    case Op::Variable:
        return 0;
    case Op::Square:
    case Op::Cube:
    case Op::Exp:
        return 1;
    default:
        return 2;
    }
}

bool is_unary(Op op) { return arity(op) == 1; }
bool is_binary(Op op) { return arity(op) == 2; }

std::string_view op_name(Op op) {
    switch (op) {
    case Op::Constant: return "const";
    case Op::Variable: return "var";
    case Op::Square: return "square";
    case Op::Cube: return "cube";
    case Op::Exp: return "exp";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    }
    return "?";
}

// ---------------------------------------------------------------- VarTable

VarTable::VarTable(std::vector<std::string> names) {
    for (auto& n : names) add(std::move(n));
}

int VarTable::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? -1 : static_cast<int>(it->second);
}

std::size_t VarTable::index_of(std::string_view name) const {
    int i = find(name);
    if (i < 0) throw SchemaError("unknown variable '" + std::string(name) + "'");
    return static_cast<std::size_t>(i);
}

std::size_t VarTable::add(std::string name) {
    if (index_.count(name)) throw SchemaError("duplicate variable name '" + name + "'");
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    return names_.size() - 1;
}

// -------------------------------------------------------------------- Expr

Expr Expr::constant(double value) { return Expr({Node{Op::Constant, 0, value}}); }

Expr Expr::variable(std::uint32_t index) { return Expr({Node{Op::Variable, index, 0.0}}); }

Expr Expr::unary(Op op, const Expr& arg) {
    if (!is_unary(op)) throw std::invalid_argument("not a unary operator");
    std::vector<Node> n;
    n.reserve(arg.size() + 1);
    n.push_back(Node{op, 0, 0.0});
    n.insert(n.end(), arg.nodes_.begin(), arg.nodes_.end());
    return Expr(std::move(n));
}

Expr Expr::binary(Op op, const Expr& lhs, const Expr& rhs) {
    if (!is_binary(op)) throw std::invalid_argument("not a binary operator");
    std::vector<Node> n;
    n.reserve(lhs.size() + rhs.size() + 1);
    n.push_back(Node{op, 0, 0.0});
    n.insert(n.end(), lhs.nodes_.begin(), lhs.nodes_.end());
    n.insert(n.end(), rhs.nodes_.begin(), rhs.nodes_.end());
    return Expr(std::move(n));
}

Expr Expr::from_nodes(std::vector<Node> prefix) {
    // A prefix array is well formed iff the running count of open slots hits
    // zero exactly at the last node.
    long open = 1;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (open <= 0) throw std::invalid_argument("trailing nodes in prefix array");
        open += arity(prefix[i].op) - 1;
    }
    if (prefix.empty() || open != 0) throw std::invalid_argument("incomplete prefix array");
    return Expr(std::move(prefix));
}

std::size_t Expr::subtree_end(std::size_t pos) const {
    long open = 1;
    std::size_t i = pos;
    while (open > 0) {
        open += arity(nodes_[i].op) - 1;
        ++i;
    }
    return i;
}

Expr Expr::subtree(std::size_t pos) const {
    return Expr(std::vector<Node>(nodes_.begin() + static_cast<long>(pos),
                                  nodes_.begin() + static_cast<long>(subtree_end(pos))));
}

Expr Expr::replace_subtree(std::size_t pos, const Expr& replacement) const {
    std::size_t end = subtree_end(pos);
    std::vector<Node> n;
    n.reserve(nodes_.size() - (end - pos) + replacement.size());
    n.insert(n.end(), nodes_.begin(), nodes_.begin() + static_cast<long>(pos));
    n.insert(n.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    n.insert(n.end(), nodes_.begin() + static_cast<long>(end), nodes_.end());
    return Expr(std::move(n));
}

int Expr::depth() const {
    // Walk the prefix array keeping a stack of remaining child slots per level.
    int best = 0;
    std::vector<int> pending;
    for (const auto& node : nodes_) {
        int level = static_cast<int>(pending.size()) + 1;
        best = std::max(best, level);
        if (arity(node.op) > 0) {
            pending.push_back(arity(node.op));
        } else {
            while (!pending.empty() && --pending.back() == 0) pending.pop_back();
        }
    }
    return best;
}

bool Expr::has_variables() const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [](const Node& n) { return n.op == Op::Variable; });
}

int Expr::max_variable() const {
    int m = -1;
    for (const auto& n : nodes_)
        if (n.op == Op::Variable) m = std::max(m, static_cast<int>(n.var));
    return m;
}

std::vector<double> Expr::constants() const {
    std::vector<double> c;
    for (const auto& n : nodes_)
        if (n.op == Op::Constant) c.push_back(n.value);
    return c;
}

Expr Expr::with_constants(std::span<const double> values) const {
    std::vector<Node> n = nodes_;
    std::size_t k = 0;
    for (auto& node : n) {
        if (node.op != Op::Constant) continue;
        if (k >= values.size()) throw std::invalid_argument("too few constants");
        node.value = values[k++];
    }
    if (k != values.size()) throw std::invalid_argument("too many constants");
    return Expr(std::move(n));
}

bool Expr::operator==(const Expr& other) const {
    if (nodes_.size() != other.nodes_.size()) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& a = nodes_[i];
        const Node& b = other.nodes_[i];
        if (a.op != b.op) return false;
        if (a.op == Op::Variable && a.var != b.var) return false;
        if (a.op == Op::Constant && std::memcmp(&a.value, &b.value, sizeof(double)) != 0)
            return false;
    }
    return true;
}

int complexity(const Expr& expr, const ComplexityWeights& weights) {
    int total = 0;
    for (const auto& n : expr.nodes()) {
        switch (n.op) {
        case Op::Constant: total += weights.constant; break;
        case Op::Variable: total += weights.variable; break;
        default: total += weights.op; break;
        }
    }
    return total;
}

// -------------------------------------------------------------- evaluation

namespace {

inline double apply_unary(Op op, double a) {
    switch (op) {
    case Op::Square: return a * a;
    case Op::Cube: return a * a * a;
    default: return std::exp(a);
    }
}

inline double apply_binary(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    default: return a / b;
    }
}

double eval_at(std::span<const Node> nodes, std::size_t& pos, std::span<const double> row) {
    const Node& n = nodes[pos++];
    switch (n.op) {
    case Op::Constant: return n.value;
    case Op::Variable: return row[n.var];
    case Op::Square:
    case Op::Cube:
    case Op::Exp: return apply_unary(n.op, eval_at(nodes, pos, row));
    default: {
        double a = eval_at(nodes, pos, row);
        double b = eval_at(nodes, pos, row);
        return apply_binary(n.op, a, b);
    }
    }
}

}  // namespace

double evaluate(const Expr& expr, std::span<const double> row) {
    if (expr.max_variable() >= static_cast<int>(row.size()))
        throw std::out_of_range("row shorter than referenced variable index");
    std::size_t pos = 0;
    return eval_at(expr.nodes(), pos, row);
}

int BatchEvaluator::acquire(std::size_t rows) {
    if (!free_.empty()) {
        int b = free_.back();
        free_.pop_back();
        buffers_[static_cast<std::size_t>(b)].resize(rows);
        return b;
    }
    buffers_.emplace_back(rows);
    return static_cast<int>(buffers_.size()) - 1;
}

void BatchEvaluator::release(Slot& slot) {
    if (slot.buffer >= 0) free_.push_back(slot.buffer);
    slot.buffer = -1;
}

void BatchEvaluator::evaluate(const Expr& expr, std::span<const double* const> columns,
                              std::size_t rows, std::span<double> out) {
    if (out.size() != rows) throw std::invalid_argument("output size mismatch");
    if (expr.max_variable() >= static_cast<int>(columns.size()))
        throw std::out_of_range("missing column for referenced variable");
    free_.clear();
    for (std::size_t b = 0; b < buffers_.size(); ++b) free_.push_back(static_cast<int>(b));
    stack_.clear();

    auto nodes = expr.nodes();
    // Children of prefix node i appear after it, so a reverse sweep sees every
    // operand before its operator; the left operand ends up on top.
    for (std::size_t k = nodes.size(); k-- > 0;) {
        const Node& n = nodes[k];
        if (n.op == Op::Constant) {
            stack_.push_back(Slot{nullptr, n.value, true, -1});
            continue;
        }
        if (n.op == Op::Variable) {
            stack_.push_back(Slot{columns[n.var], 0.0, false, -1});
            continue;
        }
        if (is_unary(n.op)) {
            Slot a = stack_.back();
            stack_.pop_back();
            if (a.is_scalar) {
                stack_.push_back(Slot{nullptr, apply_unary(n.op, a.scalar), true, -1});
                continue;
            }
            int b = a.buffer >= 0 ? a.buffer : acquire(rows);
            double* dst = buffers_[static_cast<std::size_t>(b)].data();
            const double* src = a.data;
            switch (n.op) {
            case Op::Square:
                for (std::size_t r = 0; r < rows; ++r) dst[r] = src[r] * src[r];
                break;
            case Op::Cube:
                for (std::size_t r = 0; r < rows; ++r) dst[r] = src[r] * src[r] * src[r];
                break;
            default:
                for (std::size_t r = 0; r < rows; ++r) dst[r] = std::exp(src[r]);
                break;
            }
            stack_.push_back(Slot{dst, 0.0, false, b});
            continue;
        }
        Slot lhs = stack_.back();
        stack_.pop_back();
        Slot rhs = stack_.back();
        stack_.pop_back();
        if (lhs.is_scalar && rhs.is_scalar) {
            stack_.push_back(Slot{nullptr, apply_binary(n.op, lhs.scalar, rhs.scalar), true, -1});
            continue;
        }
        int b = lhs.buffer >= 0 ? lhs.buffer : rhs.buffer >= 0 ? rhs.buffer : acquire(rows);
        double* dst = buffers_[static_cast<std::size_t>(b)].data();
        auto run = [&](auto f) {
            if (lhs.is_scalar) {
                const double a = lhs.scalar;
                const double* y = rhs.data;
                for (std::size_t r = 0; r < rows; ++r) dst[r] = f(a, y[r]);
            } else if (rhs.is_scalar) {
                const double* x = lhs.data;
                const double c = rhs.scalar;
                for (std::size_t r = 0; r < rows; ++r) dst[r] = f(x[r], c);
            } else {
                const double* x = lhs.data;
                const double* y = rhs.data;
                for (std::size_t r = 0; r < rows; ++r) dst[r] = f(x[r], y[r]);
            }
        };
        switch (n.op) {
        case Op::Add: run([](double a, double c) { return a + c; }); break;
        case Op::Sub: run([](double a, double c) { return a - c; }); break;
        case Op::Mul: run([](double a, double c) { return a * c; }); break;
        default: run([](double a, double c) { return a / c; }); break;
        }
        if (lhs.buffer >= 0 && lhs.buffer != b) release(lhs);
        if (rhs.buffer >= 0 && rhs.buffer != b) release(rhs);
        stack_.push_back(Slot{dst, 0.0, false, b});
    }

    const Slot& top = stack_.back();
    if (top.is_scalar)
        std::fill(out.begin(), out.end(), top.scalar);
    else
        std::copy(top.data, top.data + rows, out.begin());
}

std::vector<double> BatchEvaluator::evaluate(const Expr& expr,
                                             std::span<const double* const> columns,
                                             std::size_t rows) {
    std::vector<double> out(rows);
    evaluate(expr, columns, rows, out);
    return out;
}

std::vector<double> evaluate_batch(const Expr& expr, const VarTable& vars, const DataTable& table) {
    std::vector<const double*> cols(vars.size(), nullptr);
    std::vector<bool> used(vars.size(), false);
    for (const auto& n : expr.nodes())
        if (n.op == Op::Variable) used.at(n.var) = true;
    for (std::size_t j = 0; j < vars.size(); ++j) {
        if (!used[j]) continue;
        int c = table.find(vars.name(j));
        if (c < 0) throw SchemaError("table has no column '" + vars.name(j) + "'");
        cols[j] = table.column(static_cast<std::size_t>(c)).data();
    }
    BatchEvaluator ev;
    return ev.evaluate(expr, cols, table.rows());
}

// ----------------------------------------------------------------- parsing

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message + " at position " + std::to_string(position)),
      position_(position) {}

UnknownIdentifier::UnknownIdentifier(const std::string& name, std::size_t position)
    : ParseError("unknown identifier '" + name + "'", position), name_(name) {}

namespace {

class Parser {
public:
    Parser(std::string_view text, const VarTable& vars) : text_(text), vars_(vars) {}

    Expr parse_all() {
        Expr e = parse_sum();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, pos_); }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr parse_sum() {
        Expr lhs = parse_product();
        for (;;) {
            if (accept('+'))
                lhs = Expr::binary(Op::Add, lhs, parse_product());
            else if (accept('-'))
                lhs = Expr::binary(Op::Sub, lhs, parse_product());
            else
                return lhs;
        }
    }

    Expr parse_product() {
        Expr lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = Expr::binary(Op::Mul, lhs, parse_unary());
            else if (accept('/'))
                lhs = Expr::binary(Op::Div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    Expr parse_unary() {
        if (accept('-')) {
            Expr operand = parse_unary();
            if (operand.size() == 1 && operand.root().op == Op::Constant)
                return Expr::constant(-operand.root().value);
            return Expr::binary(Op::Mul, Expr::constant(-1.0), operand);
        }
        return parse_primary();
    }

    Expr parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = parse_sum();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                                        text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            } else {
                pos_ = save;
            }
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc() || ptr != text_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return Expr::constant(value);
    }

    Expr parse_name() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            Op op;
            if (name == "square")
                op = Op::Square;
            else if (name == "cube")
                op = Op::Cube;
            else if (name == "exp")
                op = Op::Exp;
            else {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            ++pos_;
            Expr arg = parse_sum();
            if (!accept(')')) fail("expected ')'");
            return Expr::unary(op, arg);
        }
        int index = vars_.find(name);
        if (index < 0) throw UnknownIdentifier(name, start);
        return Expr::variable(static_cast<std::uint32_t>(index));
    }

    std::string_view text_;
    const VarTable& vars_;
    std::size_t pos_ = 0;
};

int precedence(Op op) {
    switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    default: return 3;
    }
}

void print_at(std::span<const Node> nodes, std::size_t& pos, const VarTable& vars,
              PrintStyle style, std::string& out);

void print_child(std::span<const Node> nodes, std::size_t& pos, const VarTable& vars,
                 PrintStyle style, bool parens, std::string& out) {
    if (parens) out += '(';
    print_at(nodes, pos, vars, style, out);
    if (parens) out += ')';
}

void print_at(std::span<const Node> nodes, std::size_t& pos, const VarTable& vars,
              PrintStyle style, std::string& out) {
    const Node& n = nodes[pos++];
    switch (n.op) {
    case Op::Constant: {
        std::string s = format_number(n.value, style);
        if (s.front() == '-')
            out += "(" + s + ")";
        else
            out += s;
        return;
    }
    case Op::Variable:
        out += vars.name(n.var);
        return;
    case Op::Square:
    case Op::Cube:
    case Op::Exp:
        out += op_name(n.op);
        out += '(';
        print_at(nodes, pos, vars, style, out);
        out += ')';
        return;
    default:
        break;
    }
    // Left-associative grammar: a left child needs parentheses only when it
    // binds looser; a right child also when it binds equally.
    const int prec = precedence(n.op);
    const Op lhs_op = nodes[pos].op;
    print_child(nodes, pos, vars, style, precedence(lhs_op) < prec, out);
    out += ' ';
    out += op_name(n.op);
    out += ' ';
    const Op rhs_op = nodes[pos].op;
    print_child(nodes, pos, vars, style, precedence(rhs_op) <= prec, out);
}

}  // namespace

Expr parse(std::string_view text, const VarTable& vars) { return Parser(text, vars).parse_all(); }

std::string format_number(double value, PrintStyle style) {
    if (style == PrintStyle::Display) {
        std::array<char, 40> buf{};
        std::snprintf(buf.data(), buf.size(), "%.9g", value);
        return buf.data();
    }
    std::array<char, 40> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    (void)ec;
    return std::string(buf.data(), ptr);
}

std::string print(const Expr& expr, const VarTable& vars, PrintStyle style) {
    std::string out;
    std::size_t pos = 0;
    auto nodes = expr.nodes();
    if (nodes.size() == 1 && nodes[0].op == Op::Constant) return format_number(nodes[0].value, style);
    print_at(nodes, pos, vars, style, out);
    return out;
}

// ----------------------------------------------------------------- folding

namespace {

Expr fold_at(const Expr& expr, std::size_t pos) {
    const Node& n = expr.nodes()[pos];
    if (arity(n.op) == 0) return expr.subtree(pos);
    if (is_unary(n.op)) {
        Expr a = fold_at(expr, pos + 1);
        if (a.size() == 1 && a.root().op == Op::Constant) {
            double v = apply_unary(n.op, a.root().value);
            if (std::isfinite(v)) return Expr::constant(v);
        }
        return Expr::unary(n.op, a);
    }
    std::size_t rhs_pos = expr.subtree_end(pos + 1);
    Expr a = fold_at(expr, pos + 1);
    Expr b = fold_at(expr, rhs_pos);
    if (a.size() == 1 && b.size() == 1 && a.root().op == Op::Constant &&
        b.root().op == Op::Constant) {
        double v = apply_binary(n.op, a.root().value, b.root().value);
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::binary(n.op, a, b);
}

}  // namespace

Expr fold_constants(const Expr& expr) { return fold_at(expr, 0); }

}  // namespace uhisr
