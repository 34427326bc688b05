#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace uhisr {

class DataTable;

enum class Op : std::uint8_t { Constant, Variable, Square, Cube, Exp, Add, Sub, Mul, Div };

int arity(Op op);
bool is_unary(Op op);
bool is_binary(Op op);
std::string_view op_name(Op op);

/// Ordered, unique variable names; a name's position is its column index.
class VarTable {
public:
    VarTable() = default;
    explicit VarTable(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const { return names_; }

    /// Returns -1 when the name is not declared.
    int find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) >= 0; }

    /// Appends a new name and returns its index. Duplicate names throw.
    std::size_t add(std::string name);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Node {
    Op op = Op::Constant;
    std::uint32_t var = 0;
    double value = 0.0;
};

/// Immutable expression tree stored as a prefix-ordered node array. The
/// subtree rooted at position i occupies the contiguous range
/// [i, subtree_end(i)).
class Expr {
public:
    Expr() : nodes_{Node{}} {}

    static Expr constant(double value);
    static Expr variable(std::uint32_t index);
    static Expr unary(Op op, const Expr& arg);
    static Expr binary(Op op, const Expr& lhs, const Expr& rhs);
    static Expr from_nodes(std::vector<Node> prefix);

    std::span<const Node> nodes() const { return nodes_; }
    const Node& root() const { return nodes_.front(); }
    std::size_t size() const { return nodes_.size(); }
    std::size_t subtree_end(std::size_t pos) const;
    Expr subtree(std::size_t pos) const;
    Expr replace_subtree(std::size_t pos, const Expr& replacement) const;

    int depth() const;
    bool has_variables() const;
    /// Largest variable index referenced, or -1 for variable-free trees.
    int max_variable() const;

    std::vector<double> constants() const;
    Expr with_constants(std::span<const double> values) const;

    bool operator==(const Expr& other) const;

private:
    explicit Expr(std::vector<Node> prefix) : nodes_(std::move(prefix)) {}
    std::vector<Node> nodes_;
};

struct ComplexityWeights {
    int op = 1;
    int variable = 1;
    int constant = 2;
};

int complexity(const Expr& expr, const ComplexityWeights& weights = {});

/// Recursive evaluation on one row. Division by zero, exp overflow and the
/// like produce non-finite values that propagate; nothing is protected.
double evaluate(const Expr& expr, std::span<const double> row);

/// Column-oriented evaluation. `columns[j]` points at the values of variable
/// j for all `rows` rows.
class BatchEvaluator {
public:
    void evaluate(const Expr& expr, std::span<const double* const> columns, std::size_t rows,
                  std::span<double> out);
    std::vector<double> evaluate(const Expr& expr, std::span<const double* const> columns,
                                 std::size_t rows);

private:
    struct Slot {
        const double* data = nullptr;
        double scalar = 0.0;
        bool is_scalar = false;
        int buffer = -1;
    };
    int acquire(std::size_t rows);
    void release(Slot& slot);

    std::vector<std::vector<double>> buffers_;
    std::vector<int> free_;
    std::vector<Slot> stack_;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluates over table columns looked up by name; unknown names throw
/// SchemaError.
std::vector<double> evaluate_batch(const Expr& expr, const VarTable& vars, const DataTable& table);

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class UnknownIdentifier : public ParseError {
public:
    UnknownIdentifier(const std::string& name, std::size_t position);
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

Expr parse(std::string_view text, const VarTable& vars);

enum class PrintStyle {
    Exact,   // shortest decimal that reads back to the same double
    Display  // 9 significant digits
};

std::string print(const Expr& expr, const VarTable& vars, PrintStyle style = PrintStyle::Exact);
std::string format_number(double value, PrintStyle style = PrintStyle::Exact);

/// Replaces every variable-free subtree by a constant holding its value.
/// Subtrees whose value is non-finite are left alone.
Expr fold_constants(const Expr& expr);

}  // namespace uhisr
