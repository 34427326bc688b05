#include "uhisr/eqsystem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace uhisr {

SystemError::SystemError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

EquationSystem::EquationSystem(std::vector<std::string> raw_columns)
    : vars_(std::move(raw_columns)), raw_count_(vars_.size()) {}

void EquationSystem::add(std::string name, Expr expr, bool sigmoid) {
    if (vars_.contains(name)) {
        if (vars_.index_of(name) < raw_count_)
            throw SystemError("equation name '" + name + "' shadows a raw column");
        throw SystemError("duplicate equation '" + name + "'");
    }
    if (expr.max_variable() >= static_cast<int>(vars_.size()))
        throw SystemError("equation '" + name + "' references an undefined variable");
    vars_.add(name);
    equations_.push_back({std::move(name), std::move(expr), sigmoid});
}

const Equation* EquationSystem::find(std::string_view name) const {
    for (const auto& e : equations_)
        if (e.name == name) return &e;
    return nullptr;
}

const Equation& EquationSystem::at(std::string_view name) const {
    if (const Equation* e = find(name)) return *e;
    throw SystemError("system has no equation '" + std::string(name) + "'");
}

bool EquationSystem::operator==(const EquationSystem& other) const {
    if (vars_.names() != other.vars_.names() || raw_count_ != other.raw_count_) return false;
    for (std::size_t i = 0; i < equations_.size(); ++i) {
        const auto& a = equations_[i];
        const auto& b = other.equations_[i];
        if (a.name != b.name || a.sigmoid != b.sigmoid || !(a.expr == b.expr)) return false;
    }
    return true;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool valid_name(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

// Splits "sigmoid( ... )" when the outer parentheses enclose the whole rest.
bool strip_sigmoid(std::string_view& body) {
    constexpr std::string_view head = "sigmoid";
    if (!body.starts_with(head)) return false;
    std::string_view rest = trim(body.substr(head.size()));
    if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')') return false;
    int depth = 0;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (rest[i] == '(') ++depth;
        if (rest[i] == ')') --depth;
        if (depth == 0 && i + 1 < rest.size()) return false;
    }
    body = rest.substr(1, rest.size() - 2);
    return true;
}

struct Line {
    int number;
    std::string name;
    std::string body;
};

}  // namespace

EquationSystem parse_system(std::string_view text, std::vector<std::string> raw_columns) {
    std::vector<Line> lines;
    int number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++number;
        start = end + 1;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw SystemError("expected 'name = expression'", number);
        std::string_view name = trim(line.substr(0, eq));
        if (!valid_name(name)) throw SystemError("invalid equation name '" + std::string(name) + "'", number);
        lines.push_back({number, std::string(name), std::string(trim(line.substr(eq + 1)))});
        if (end == text.size()) break;
    }

    EquationSystem sys(std::move(raw_columns));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const Line& l = lines[i];
        std::string_view body = l.body;
        const bool sigmoid = strip_sigmoid(body);
        Expr expr;
        try {
            expr = parse(body, sys.vars());
        } catch (const UnknownIdentifier& e) {
            const bool later = std::any_of(lines.begin() + static_cast<long>(i), lines.end(),
                                           [&](const Line& o) { return o.name == e.name(); });
            if (later)
                throw SystemError("'" + e.name() + "' is used before it is defined (cycle or bad order)",
                                  l.number);
            throw SystemError(e.what(), l.number);
        } catch (const ParseError& e) {
            throw SystemError(e.what(), l.number);
        }
        try {
            sys.add(l.name, std::move(expr), sigmoid);
        } catch (const SystemError& e) {
            throw SystemError(e.what(), l.number);
        }
    }
    return sys;
}

EquationSystem load_system(const std::filesystem::path& path, std::vector<std::string> raw_columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SystemError("cannot open equation file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str(), std::move(raw_columns));
}

std::string print_equation(const EquationSystem& sys, const Equation& eq, PrintStyle style) {
    std::string body = print(eq.expr, sys.vars(), style);
    return eq.name + " = " + (eq.sigmoid ? "sigmoid(" + body + ")" : body);
}

std::string print_system(const EquationSystem& sys, PrintStyle style) {
    std::string out;
    for (const auto& eq : sys.equations()) out += print_equation(sys, eq, style) + "\n";
    return out;
}

namespace {

double apply_link(const Equation& eq, double v) { return eq.sigmoid && std::isfinite(v) ? sigmoid(v) : v; }

}  // namespace

std::vector<std::pair<std::string, double>> evaluate_system(
    const EquationSystem& sys, std::span<const std::pair<std::string, double>> row) {
    const auto& vars = sys.vars();
    std::vector<double> values(vars.size(), 0.0);
    std::vector<bool> have(vars.size(), false);
    for (const auto& [name, v] : row) {
        int j = vars.find(name);
        if (j >= 0 && static_cast<std::size_t>(j) < sys.raw_count()) {
            values[static_cast<std::size_t>(j)] = v;
            have[static_cast<std::size_t>(j)] = true;
        }
    }
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const Equation& eq = sys.equations()[i];
        for (const auto& n : eq.expr.nodes())
            if (n.op == Op::Variable && !have[n.var])
                throw SchemaError("row has no value for '" + vars.name(n.var) + "'");
        const double v = apply_link(eq, evaluate(eq.expr, values));
        values[sys.raw_count() + i] = v;
        have[sys.raw_count() + i] = true;
        out.emplace_back(eq.name, v);
    }
    return out;
}

std::vector<std::pair<std::string, double>> evaluate_system(const EquationSystem& sys,
                                                            const DataTable& table, std::size_t row) {
    std::vector<std::pair<std::string, double>> values;
    for (std::size_t j = 0; j < sys.raw_count(); ++j) {
        const std::string& name = sys.vars().name(j);
        if (table.has(name)) values.emplace_back(name, table.at(row, name));
    }
    return evaluate_system(sys, values);
}

namespace {

// Evaluates every equation over all rows. Later equations read names found
// in `inputs` from there instead of from the chain.
std::vector<std::vector<double>> evaluate_columns(const EquationSystem& sys, const DataTable& table,
                                                  const DataTable* inputs) {
    const auto& vars = sys.vars();
    const std::size_t n = table.rows();
    std::vector<const double*> cols(vars.size(), nullptr);
    for (std::size_t j = 0; j < sys.raw_count(); ++j) {
        int c = table.find(vars.name(j));
        if (c >= 0) cols[j] = table.column(static_cast<std::size_t>(c)).data();
    }
    std::vector<std::vector<double>> results(sys.size());
    BatchEvaluator ev;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const Equation& eq = sys.equations()[i];
        for (const auto& node : eq.expr.nodes())
            if (node.op == Op::Variable && cols[node.var] == nullptr)
                throw SchemaError("table has no column '" + vars.name(node.var) + "'");
        results[i].resize(n);
        ev.evaluate(eq.expr, cols, n, results[i]);
        for (double& v : results[i]) v = apply_link(eq, v);
        const std::size_t slot = sys.raw_count() + i;
        if (inputs && inputs->has(eq.name)) {
            if (inputs->rows() != n) throw SchemaError("latent table row count differs from data");
            cols[slot] = inputs->column(eq.name).data();
        } else {
            cols[slot] = results[i].data();
        }
    }
    return results;
}

FitRow score(std::string level, std::string equation, int complexity, const std::vector<double>& y,
             const std::vector<double>& yhat, std::span<const std::size_t> rows) {
    FitRow r{std::move(level), std::move(equation), std::nullopt, std::nullopt, complexity, 0};
    std::vector<double> a, b;
    auto take = [&](std::size_t i) {
        if (!std::isfinite(yhat[i])) {
            ++r.nonfinite;
            return;
        }
        a.push_back(y[i]);
        b.push_back(yhat[i]);
    };
    if (rows.empty())
        for (std::size_t i = 0; i < y.size(); ++i) take(i);
    else
        for (std::size_t i : rows) take(i);
    if (a.empty()) return r;
    r.rmse = rmse(a, b);
    try {
        r.r2 = r_squared(a, b);
    } catch (const std::domain_error&) {
    }
    return r;
}

}  // namespace

DataTable evaluate_all(const EquationSystem& sys, const DataTable& table) {
    auto cols = evaluate_columns(sys, table, nullptr);
    std::vector<std::string> names;
    for (const auto& eq : sys.equations()) names.push_back(eq.name);
    return DataTable(std::move(names), std::move(cols), table.ids());
}

std::vector<double> predict(const EquationSystem& sys, const DataTable& table) {
    auto cols = evaluate_columns(sys, table, nullptr);
    for (std::size_t i = 0; i < sys.size(); ++i)
        if (sys.equations()[i].name == schema::target_column) return cols[i];
    throw SystemError("system has no Rf equation");
}

FitReport fit_report(const EquationSystem& sys, const DataTable& table, const DataTable* latents,
                     std::span<const std::size_t> rows) {
    FitReport report;
    const bool observed = table.has(schema::target_column);
    if (latents) {
        auto direct = evaluate_columns(sys, table, latents);
        for (std::size_t i = 0; i < sys.size(); ++i) {
            const Equation& eq = sys.equations()[i];
            const std::string text = print(eq.expr, sys.vars());
            const std::string shown = eq.sigmoid ? "sigmoid(" + text + ")" : text;
            const int c = complexity(eq.expr);
            const DataTable* source = nullptr;
            if (eq.name == schema::target_column && observed) source = &table;
            else if (latents->has(eq.name)) source = latents;
            // Inputs must all be available as raw or latent columns.
            bool inputs_ok = true;
            for (const auto& node : eq.expr.nodes())
                if (node.op == Op::Variable && node.var >= sys.raw_count() &&
                    !latents->has(sys.vars().name(node.var)))
                    inputs_ok = false;
            if (source && inputs_ok)
                report.rows.push_back(score(eq.name, shown, c, source->column(eq.name), direct[i], rows));
            else
                report.rows.push_back(FitRow{eq.name, shown, std::nullopt, std::nullopt, c, 0});
        }
    } else {
        for (const auto& eq : sys.equations()) {
            const std::string text = print(eq.expr, sys.vars());
            report.rows.push_back(FitRow{eq.name, eq.sigmoid ? "sigmoid(" + text + ")" : text,
                                         std::nullopt, std::nullopt, complexity(eq.expr), 0});
        }
    }
    int total = 0;
    for (const auto& eq : sys.equations()) total += complexity(eq.expr);
    if (observed && sys.find(schema::target_column)) {
        report.rows.push_back(score("composed", "chain", total, table.column(schema::target_column),
                                    predict(sys, table), rows));
    } else {
        report.rows.push_back(FitRow{"composed", "chain", std::nullopt, std::nullopt, total, 0});
    }
    return report;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string metric(const std::optional<double>& v) {
    return v ? format_number(*v, PrintStyle::Display) : "NA";
}

}  // namespace

std::string report_csv(const FitReport& report) {
    std::string out = "level,equation,r2,rmse,complexity\n";
    for (const auto& r : report.rows)
        out += csv_field(r.level) + "," + csv_field(r.equation) + "," + metric(r.r2) + "," +
               metric(r.rmse) + "," + std::to_string(r.complexity) + "\n";
    return out;
}

}  // namespace uhisr
