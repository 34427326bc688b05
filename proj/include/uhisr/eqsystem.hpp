#pragma once

#include "uhisr/dataset.hpp"
#include "uhisr/expr.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uhisr {

struct Equation {
    std::string name;
    Expr expr;
    bool sigmoid = false;  // name = sigmoid(expr)
};

class SystemError : public std::runtime_error {
public:
    SystemError(const std::string& message, int line = 0);
    int line() const { return line_; }

private:
    int line_;
};

/// Ordered equations over raw columns and previously defined names. The
/// variable table holds the raw columns first, then one entry per equation.
class EquationSystem {
public:
    explicit EquationSystem(std::vector<std::string> raw_columns = schema::feature_columns());

    /// Appends an equation whose expression is indexed against `vars()` as
    /// it stands before the call.
    void add(std::string name, Expr expr, bool sigmoid = false);

    const std::vector<Equation>& equations() const { return equations_; }
    std::size_t size() const { return equations_.size(); }
    const VarTable& vars() const { return vars_; }
    std::size_t raw_count() const { return raw_count_; }
    const Equation* find(std::string_view name) const;
    const Equation& at(std::string_view name) const;

    bool operator==(const EquationSystem& other) const;

private:
    VarTable vars_;
    std::size_t raw_count_;
    std::vector<Equation> equations_;
};

/// One `name = expression` per line; blank lines and `#` comments ignored;
/// `name = sigmoid(expression)` sets the link.
EquationSystem parse_system(std::string_view text,
                            std::vector<std::string> raw_columns = schema::feature_columns());
EquationSystem load_system(const std::filesystem::path& path,
                           std::vector<std::string> raw_columns = schema::feature_columns());
std::string print_system(const EquationSystem& sys, PrintStyle style = PrintStyle::Exact);
std::string print_equation(const EquationSystem& sys, const Equation& eq,
                           PrintStyle style = PrintStyle::Exact);

/// Values of every equation, in order, for one row given by raw column name.
std::vector<std::pair<std::string, double>> evaluate_system(
    const EquationSystem& sys, std::span<const std::pair<std::string, double>> row);
std::vector<std::pair<std::string, double>> evaluate_system(const EquationSystem& sys,
                                                            const DataTable& table, std::size_t row);

/// Every equation evaluated over the table; columns named after equations.
DataTable evaluate_all(const EquationSystem& sys, const DataTable& table);

/// Composed-chain Rf per row.
std::vector<double> predict(const EquationSystem& sys, const DataTable& table);

struct FitRow {
    std::string level;
    std::string equation;
    std::optional<double> r2;
    std::optional<double> rmse;
    int complexity = 0;
    std::size_t nonfinite = 0;  // rows skipped because the prediction was not finite
};

struct FitReport {
    std::vector<FitRow> rows;  // one per equation, then "composed"
};

/// Per-equation metrics need `latents`: each equation is evaluated with its
/// inputs taken from the table and the latent columns, and scored against
/// the latent of the same name (observed Rf for "Rf"). Without latents only
/// the composed-chain row carries metrics. `rows` restricts scoring to a
/// subset (all rows when empty).
FitReport fit_report(const EquationSystem& sys, const DataTable& table,
                     const DataTable* latents = nullptr, std::span<const std::size_t> rows = {});

std::string report_csv(const FitReport& report);

}  // namespace uhisr
