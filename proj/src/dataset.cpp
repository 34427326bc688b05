#include "uhisr/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace uhisr {

namespace schema {

const std::vector<std::string>& feature_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c = solvent_columns();
        c.insert(c.end(), distribution_columns().begin(), distribution_columns().end());
        c.insert(c.end(), fg_columns().begin(), fg_columns().end());
        return c;
    }();
    return cols;
}

const std::vector<std::string>& solute_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> c = distribution_columns();
        c.insert(c.end(), fg_columns().begin(), fg_columns().end());
        return c;
    }();
    return cols;
}

std::string canonical_name(std::string_view name) {
    static const std::unordered_map<std::string, std::string> aliases{
        {"CtR2C=O", "CtR2CO"}, {"CtAmides", "CtAmide"}, {"CtRNH2", "CtNH2"},
        {"CtMethyl", "CtMe"},  {"Et₂O", "Et2O"},        {"RF", "Rf"},
        {"ID", "id"},          {"Id", "id"},
    };
    auto it = aliases.find(std::string(name));
    return it == aliases.end() ? std::string(name) : it->second;
}

}  // namespace schema

DataError::DataError(const std::string& message, long row, std::string column)
    : std::runtime_error(message), row_(row), column_(std::move(column)) {}

// --------------------------------------------------------------- DataTable

DataTable::DataTable(std::vector<std::string> names, std::vector<std::vector<double>> columns,
                     std::vector<std::string> ids)
    : names_(std::move(names)), columns_(std::move(columns)), ids_(std::move(ids)) {
    if (names_.size() != columns_.size()) throw DataError("column name/data count mismatch");
    rows_ = columns_.empty() ? ids_.size() : columns_.front().size();
    for (std::size_t j = 0; j < columns_.size(); ++j)
        if (columns_[j].size() != rows_)
            throw DataError("ragged column '" + names_[j] + "'", -1, names_[j]);
    if (!ids_.empty() && ids_.size() != rows_) throw DataError("identifier column length mismatch");
    std::set<std::string> seen;
    for (const auto& n : names_)
        if (!seen.insert(n).second) throw DataError("duplicate column '" + n + "'", -1, n);
}

int DataTable::find(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j)
        if (names_[j] == name) return static_cast<int>(j);
    return -1;
}

const std::vector<double>& DataTable::column(std::string_view name) const {
    int j = find(name);
    if (j < 0) throw DataError("no column '" + std::string(name) + "'", -1, std::string(name));
    return columns_[static_cast<std::size_t>(j)];
}

void DataTable::set_column(const std::string& name, std::vector<double> values) {
    if (!columns_.empty() || !ids_.empty()) {
        if (values.size() != rows_) throw DataError("column '" + name + "' has wrong length");
    } else {
        rows_ = values.size();
    }
    int j = find(name);
    if (j >= 0) {
        columns_[static_cast<std::size_t>(j)] = std::move(values);
    } else {
        names_.push_back(name);
        columns_.push_back(std::move(values));
    }
}

DataTable DataTable::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::vector<double>> cols(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        cols[j].reserve(rows.size());
        for (auto r : rows) cols[j].push_back(columns_[j].at(r));
    }
    std::vector<std::string> ids;
    if (!ids_.empty())
        for (auto r : rows) ids.push_back(ids_.at(r));
    DataTable t(names_, std::move(cols), std::move(ids));
    t.rows_ = rows.size();
    return t;
}

DataTable DataTable::select_columns(std::span<const std::string> names) const {
    std::vector<std::vector<double>> cols;
    for (const auto& n : names) cols.push_back(column(n));
    DataTable t(std::vector<std::string>(names.begin(), names.end()), std::move(cols), ids_);
    t.rows_ = rows_;
    return t;
}

// --------------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string> read_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = end + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Range {
    double lo;
    double hi;
    bool integer;
};

Range range_for(const std::string& column) {
    const auto& solvents = schema::solvent_columns();
    if (std::find(solvents.begin(), solvents.end(), column) != solvents.end()) return {0.0, 1.0, false};
    if (column == "NBen") return {0.0, INFINITY, true};
    if (column == "MSD") return {0.0, 12.0, true};
    if (column == "DM") return {0.0, INFINITY, false};
    if (column == schema::target_column) return {0.0, 1.0, false};
    return {0.0, INFINITY, true};  // FG counts
}

}  // namespace

DataTable parse_csv(std::string_view text, const LoadOptions& options, LoadReport* report) {
    auto lines = read_lines(text);
    if (lines.empty()) throw DataError("empty CSV (no header row)");
    auto raw_header = split_csv_line(lines.front());

    std::vector<std::string> header;
    int id_col = -1;
    std::set<std::string> seen;
    for (std::size_t j = 0; j < raw_header.size(); ++j) {
        std::string name = schema::canonical_name(trim(raw_header[j]));
        if (!seen.insert(name).second) throw DataError("duplicate column '" + name + "'", 0, name);
        header.push_back(name);
        if (name == schema::id_column) id_col = static_cast<int>(j);
    }

    std::vector<std::string> expected = schema::feature_columns();
    const bool has_target = seen.count(std::string(schema::target_column)) > 0;
    if (options.require_target || has_target) expected.emplace_back(schema::target_column);
    for (const auto& e : expected)
        if (!seen.count(e)) throw DataError("missing column '" + e + "'", 0, e);
    for (const auto& h : header) {
        if (h == schema::id_column) continue;
        if (std::find(expected.begin(), expected.end(), h) == expected.end())
            throw DataError("unknown column '" + h + "'", 0, h);
    }

    std::vector<std::vector<double>> cols(expected.size());
    std::vector<std::string> ids;
    std::vector<int> source(expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k)
        source[k] = static_cast<int>(std::find(header.begin(), header.end(), expected[k]) - header.begin());
    std::vector<Range> ranges;
    for (const auto& e : expected) ranges.push_back(range_for(e));

    LoadReport local;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const long row = static_cast<long>(li);  // 1-based data row == line index
        auto fields = split_csv_line(lines[li]);
        if (fields.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                                std::to_string(header.size()) + " fields, found " +
                                std::to_string(fields.size()),
                            row);
        for (std::size_t k = 0; k < expected.size(); ++k) {
            const std::string& cell = fields[static_cast<std::size_t>(source[k])];
            const std::string& name = expected[k];
            if (trim(cell).empty())
                throw DataError("row " + std::to_string(row) + ", column '" + name + "': missing value",
                                row, name);
            double v = 0.0;
            if (!parse_double(cell, v))
                throw DataError("row " + std::to_string(row) + ", column '" + name +
                                    "': non-numeric value '" + cell + "'",
                                row, name);
            const Range& r = ranges[k];
            if (!std::isfinite(v) || v < r.lo || v > r.hi || (r.integer && v != std::floor(v)))
                throw DataError("row " + std::to_string(row) + ", column '" + name +
                                    "': value " + std::string(trim(cell)) + " out of range",
                                row, name);
            cols[k].push_back(v);
        }
        if (id_col >= 0) ids.push_back(std::string(trim(fields[static_cast<std::size_t>(id_col)])));
        double sum = 0.0;
        for (std::size_t k = 0; k < schema::solvent_columns().size(); ++k) sum += cols[k].back();
        if (std::abs(sum - 1.0) > options.solvent_sum_tolerance)
            local.warnings.push_back("row " + std::to_string(row) + ": solvent fractions sum to " +
                                     std::to_string(sum));
    }

    DataTable table(expected, std::move(cols), std::move(ids));
    local.rows = table.rows();
    if (table.has_ids()) local.distinct_ids = std::set<std::string>(table.ids().begin(), table.ids().end()).size();
    if (report) *report = std::move(local);
    return table;
}

DataTable load_csv(const std::filesystem::path& path, const LoadOptions& options, LoadReport* report) {
    return parse_csv(slurp(path), options, report);
}

DataTable read_numeric_csv(const std::filesystem::path& path) {
    auto lines = read_lines(slurp(path));
    if (lines.empty()) throw DataError("empty CSV '" + path.string() + "'");
    auto header = split_csv_line(lines.front());
    for (auto& h : header) h = std::string(trim(h));
    const auto id_pos = std::find(header.begin(), header.end(), schema::id_column) - header.begin();
    const bool with_ids = static_cast<std::size_t>(id_pos) < header.size();
    std::vector<std::string> names;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (!with_ids || j != static_cast<std::size_t>(id_pos)) names.push_back(header[j]);
    std::vector<std::vector<double>> cols(names.size());
    std::vector<std::string> ids;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        auto fields = split_csv_line(lines[li]);
        if (fields.size() != header.size())
            throw DataError(path.string() + ": row " + std::to_string(li) + " has wrong field count",
                            static_cast<long>(li));
        std::size_t k = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (with_ids && j == static_cast<std::size_t>(id_pos)) {
                ids.emplace_back(fields[j]);
                continue;
            }
            double v = 0.0;
            if (!parse_double(fields[j], v))
                throw DataError(path.string() + ": row " + std::to_string(li) + ", column '" +
                                    header[j] + "': non-numeric value",
                                static_cast<long>(li), header[j]);
            cols[k++].push_back(v);
        }
    }
    return DataTable(std::move(names), std::move(cols), std::move(ids));
}

std::string to_csv(const DataTable& table) {
    auto num = [](double v) {
        std::array<char, 40> buf{};
        auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
        (void)ec;
        return std::string(buf.data(), ptr);
    };
    std::string out;
    bool first = true;
    if (table.has_ids()) {
        out += schema::id_column;
        first = false;
    }
    for (const auto& n : table.names()) {
        if (!first) out += ',';
        out += n;
        first = false;
    }
    out += '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        first = true;
        if (table.has_ids()) {
            const std::string& id = table.ids()[r];
            if (id.find_first_of(",\"") != std::string::npos) {
                std::string q = "\"";
                for (char c : id) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
                out += q + "\"";
            } else {
                out += id;
            }
            first = false;
        }
        for (std::size_t j = 0; j < table.cols(); ++j) {
            if (!first) out += ',';
            out += num(table.column(j)[r]);
            first = false;
        }
        out += '\n';
    }
    return out;
}

// ------------------------------------------------------------------- split

SplitIndices split(std::size_t rows, std::uint64_t seed) {
    if (rows < 10) throw DataError("need at least 10 rows to split, got " + std::to_string(rows));
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto tenth = static_cast<std::size_t>(std::llround(static_cast<double>(rows) / 10.0));
    SplitIndices s;
    s.seed = seed;
    const std::size_t n_train = rows - 2 * tenth;
    s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    s.valid.assign(order.begin() + static_cast<long>(n_train),
                   order.begin() + static_cast<long>(n_train + tenth));
    s.test.assign(order.begin() + static_cast<long>(n_train + tenth), order.end());
    return s;
}

// ----------------------------------------------------------------- metrics

double rmse(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("rmse: length mismatch");
    if (y.empty()) throw std::invalid_argument("rmse: empty input");
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

double r_squared(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("r_squared: length mismatch");
    if (y.empty()) throw std::invalid_argument("r_squared: empty input");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0) throw std::domain_error("r_squared: target is constant");
    return 1.0 - ss_res / ss_tot;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double y, double eps) {
    double c = std::clamp(y, eps, 1.0 - eps);
    return std::log(c / (1.0 - c));
}

std::vector<double> logit(std::span<const double> y, double eps) {
    std::vector<double> out;
    out.reserve(y.size());
    for (double v : y) out.push_back(logit(v, eps));
    return out;
}

// --------------------------------------------------------------------- MSD

namespace {

using Mask = unsigned;  // bit k set <=> position k+1 substituted

Mask rotate(Mask m, int k) { return ((m << k) | (m >> (6 - k))) & 0x3Fu; }

Mask reflect(Mask m) {
    Mask r = 0;
    for (int i = 0; i < 6; ++i)
        if (m & (1u << i)) r |= 1u << ((6 - i) % 6);
    return r;
}

Mask canonical(Mask m) {
    Mask best = m;
    for (int k = 0; k < 6; ++k) {
        best = std::min(best, rotate(m, k));
        best = std::min(best, rotate(reflect(m), k));
    }
    return best;
}

Mask mask_of(std::initializer_list<int> positions) {
    Mask m = 0;
    for (int p : positions) m |= 1u << (p - 1);
    return m;
}

}  // namespace

int msd_value(const SubstitutionPattern& pattern) {
    if (!pattern.ring) return 0;
    Mask m = 0;
    for (int p : pattern.positions) {
        if (p < 1 || p > 6) throw std::invalid_argument("ring position out of 1..6");
        if (m & (1u << (p - 1))) throw std::invalid_argument("duplicate ring position");
        m |= 1u << (p - 1);
    }
    static const std::map<Mask, int> codes{
        {canonical(mask_of({1})), 1},          {canonical(mask_of({1, 2})), 2},
        {canonical(mask_of({1, 3})), 3},       {canonical(mask_of({1, 4})), 4},
        {canonical(mask_of({1, 2, 3})), 5},    {canonical(mask_of({1, 2, 4})), 6},
        {canonical(mask_of({1, 3, 5})), 7},    {canonical(mask_of({1, 2, 3, 4})), 8},
        {canonical(mask_of({1, 2, 3, 5})), 9}, {canonical(mask_of({1, 2, 4, 5})), 10},
        {canonical(mask_of({1, 2, 3, 4, 5})), 11}, {canonical(mask_of({1, 2, 3, 4, 5, 6})), 12},
    };
    if (m == 0) return 1;  // bare ring: treated as the mono class
    return codes.at(canonical(m));
}

}  // namespace uhisr
