#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uhisr {

/// Column names of the TLC feature schema, in canonical order.
namespace schema {

inline const std::vector<std::string>& solvent_columns() {
    static const std::vector<std::string> cols{"Hex", "EA", "DCM", "MeOH", "Et2O"};
    return cols;
}

inline const std::vector<std::string>& distribution_columns() {
    static const std::vector<std::string> cols{"NBen", "MSD", "DM"};
    return cols;
}

inline const std::vector<std::string>& fg_columns() {
    static const std::vector<std::string> cols{
        "CtPhenol", "CtOH",   "CtAldehyde", "CtCO2H", "CtRCO2R", "CtR2CO", "CtROR", "CtCN",
        "CtNH2",    "CtNO2",  "CtAmide",    "CtMe",   "CtF",     "CtCl",   "CtBr",  "CtI"};
    return cols;
}

/// All 24 input columns: solvents, distribution descriptors, FG counts.
const std::vector<std::string>& feature_columns();

/// Solute columns (distribution descriptors followed by FG counts).
const std::vector<std::string>& solute_columns();

inline constexpr std::string_view target_column = "Rf";
inline constexpr std::string_view id_column = "id";

/// Maps accepted spellings (e.g. "CtR2C=O", "CtAmides", "CtRNH2",
/// "CtMethyl") to canonical names. Unknown names are returned unchanged.
std::string canonical_name(std::string_view name);

}  // namespace schema

class DataError : public std::runtime_error {
public:
    DataError(const std::string& message, long row = -1, std::string column = {});
    long row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    long row_;
    std::string column_;
};

/// Column-major numeric table with an optional string identifier column.
class DataTable {
public:
    DataTable() = default;
    DataTable(std::vector<std::string> names, std::vector<std::vector<double>> columns,
              std::vector<std::string> ids = {});

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    int find(std::string_view name) const;
    bool has(std::string_view name) const { return find(name) >= 0; }
    const std::vector<double>& column(std::string_view name) const;
    const std::vector<double>& column(std::size_t index) const { return columns_.at(index); }
    double at(std::size_t row, std::string_view name) const { return column(name).at(row); }

    /// Adds a column, replacing an existing one with the same name.
    void set_column(const std::string& name, std::vector<double> values);

    const std::vector<std::string>& ids() const { return ids_; }
    bool has_ids() const { return !ids_.empty(); }

    DataTable select_rows(std::span<const std::size_t> rows) const;
    DataTable select_columns(std::span<const std::string> names) const;

    bool operator==(const DataTable& other) const = default;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    std::vector<std::string> ids_;
    std::size_t rows_ = 0;
};

struct LoadOptions {
    bool require_target = true;
    double solvent_sum_tolerance = 1e-6;
};

struct LoadReport {
    std::size_t rows = 0;
    std::size_t distinct_ids = 0;
    std::vector<std::string> warnings;
};

/// Reads and validates a TLC CSV. Every schema column must be present
/// (order-free, aliases accepted); an `id` column is optional.
DataTable load_csv(const std::filesystem::path& path, const LoadOptions& options = {},
                   LoadReport* report = nullptr);
DataTable parse_csv(std::string_view text, const LoadOptions& options = {},
                    LoadReport* report = nullptr);

/// Generic numeric CSV without schema checks (latent tables and the like).
DataTable read_numeric_csv(const std::filesystem::path& path);

/// Writes a header row and LF-terminated rows; numbers use the shortest
/// round-trip decimal form so reading back is value-identical.
std::string to_csv(const DataTable& table);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle then contiguous 80/10/10 slicing; validation and test
/// sizes are round(n/10), train absorbs the remainder.
SplitIndices split(std::size_t rows, std::uint64_t seed);
inline SplitIndices split(const DataTable& table, std::uint64_t seed) {
    return split(table.rows(), seed);
}

double r_squared(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);

double sigmoid(double x);
double logit(double y, double eps = 1e-3);
std::vector<double> logit(std::span<const double> y, double eps = 1e-3);

struct SubstitutionPattern {
    bool ring = true;
    std::vector<int> positions;  // subset of 1..6
};

/// Molecular skeleton descriptor: 0 no ring, 1 mono, 2/3/4 ortho/meta/para,
/// 5/6/7 the 1,2,3 / 1,2,4 / 1,3,5 patterns, 8/9/10 the 1,2,3,4 / 1,2,3,5 /
/// 1,2,4,5 patterns, 11 penta, 12 hexa. A ring with no substituents maps to 1.
int msd_value(const SubstitutionPattern& pattern);

}  // namespace uhisr
