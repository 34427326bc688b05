// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when a gated criterion fails. `acceptance --tlc` runs only the
// measured-data pipeline check and exits 77 when UHISR_TLC_DATA is unset.

#include "gradcheck.hpp"
#include "uhisr/cli.hpp"
#include "uhisr/dataset.hpp"
#include "uhisr/eqsystem.hpp"
#include "uhisr/hiernet.hpp"
#include "uhisr/persist.hpp"
#include "uhisr/symreg.hpp"
#include "uhisr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace uhisr;
namespace fs = std::filesystem;

namespace {

const fs::path kData = UHISR_DATA_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
    bool gated = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double rel_err(double got, double want) {
    if (got == want) return 0.0;
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// ------------------------------------------------------------ reference

// The reference system written out by hand, independent of the parser.
std::map<std::string, double> reference_by_hand(const std::map<std::string, double>& r) {
    auto sq = [](double x) { return x * x; };
    auto cb = [](double x) { return x * x * x; };
    const double amide = r.at("CtAmide"), acid = r.at("CtCO2H"), nh2 = r.at("CtNH2"),
                 oh = r.at("CtOH"), phenol = r.at("CtPhenol"), no2 = r.at("CtNO2"),
                 ester = r.at("CtRCO2R"), ald = r.at("CtAldehyde"), ketone = r.at("CtR2CO"),
                 f = r.at("CtF"), cn = r.at("CtCN"), ether = r.at("CtROR"), cl = r.at("CtCl"),
                 br = r.at("CtBr"), iod = r.at("CtI"), me = r.at("CtMe");
    std::map<std::string, double> v;
    v["gamma1"] = -3.09 * amide - 3.91 * acid + 1.87;
    v["gamma2"] = -nh2 + 2 * oh - 1.76 * phenol * (1.76 - nh2) + sq(-sq(nh2) + oh - phenol + 0.912);
    v["gamma3"] = no2 * (-sq(ester) - 3.65) + 0.762;
    v["gamma4"] = cb(ald) - sq(ald) * sq(ketone - f) - 3 * ald + sq(ketone) + 2 * ketone + 4 * cn -
                  2 * f + std::exp(f - sq(ether - 2 * f)) - 0.746;
    v["gamma5"] = sq(cl + 2 * iod) + sq(br / (br - 0.305) + me);
    const double g1 = v["gamma1"], g2 = v["gamma2"], g3 = v["gamma3"], g4 = v["gamma4"], g5 = v["gamma5"];
    v["beta"] = -0.218 * g1 / std::pow(g2, 6) + 0.413 * g2 + 0.435 * g4 - 0.435 * g5 +
                0.0223 * sq(g3 + g4) + 0.493;
    const double nben = r.at("NBen"), msd = r.at("MSD"), dm = r.at("DM");
    v["alpha"] = -2 * nben * (dm + 0.412) - 1.33 * nben * (dm + 0.412) / (msd - 0.0467) - 0.743;
    const double a = v["alpha"], b = v["beta"];
    v["xi"] = -0.232 * b - 0.232 * (std::exp(a) - 0.0531) * (-2 * a + 2 * b + 4.71);
    v["Psi"] = -r.at("Hex") + 1.59 * r.at("EA") - 0.411 * r.at("DCM") + 11.1 * r.at("MeOH") +
               sq(r.at("Et2O")) + 0.142;
    v["Rf"] = 1.0 / (1.0 + std::exp(-(3.48 * v["Psi"] + 3.08 * v["xi"] + 1.86)));
    return v;
}

std::map<std::string, double> make_row(std::map<std::string, double> set) {
    std::map<std::string, double> row;
    for (const auto& c : schema::feature_columns()) row[c] = 0.0;
    for (const auto& [k, v] : set) row[k] = v;
    return row;
}

Outcome reference_system_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    EquationSystem sys = load_system(kData / "reference_system.eq");
    const std::vector<std::map<std::string, double>> rows{
        make_row({{"Hex", 1.0}}),
        make_row({{"Hex", 0.5}, {"EA", 0.5}, {"NBen", 1}, {"MSD", 1}, {"DM", 1.2}, {"CtOH", 1}}),
        make_row({{"DCM", 0.95}, {"MeOH", 0.05}, {"NBen", 2}, {"MSD", 4}, {"DM", 0.3}, {"CtNO2", 1},
                  {"CtRCO2R", 2}, {"CtCl", 1}, {"CtNH2", 1}}),
        make_row({{"Hex", 0.75}, {"Et2O", 0.25}, {"NBen", 1}, {"MSD", 3}, {"DM", 2.1}, {"CtAmide", 1},
                  {"CtNH2", 2}, {"CtAldehyde", 1}, {"CtF", 1}, {"CtOH", 1}}),
        make_row({{"EA", 1.0}, {"CtBr", 1}, {"CtMe", 2}, {"CtI", 1}, {"CtROR", 1}, {"CtCN", 1},
                  {"CtPhenol", 1}, {"CtR2CO", 1}, {"CtCO2H", 1}}),
    };
    double worst = 0.0;
    std::size_t compared = 0;
    for (const auto& row : rows) {
        std::vector<std::pair<std::string, double>> in(row.begin(), row.end());
        const auto got = evaluate_system(sys, in);
        const auto want = reference_by_hand(row);
        for (const auto& [name, value] : got) {
            worst = std::max(worst, rel_err(value, want.at(name)));
            ++compared;
        }
    }
    // Values derived by hand substitution.
    const auto pure_hex = evaluate_system(sys, std::vector<std::pair<std::string, double>>(
                                                   rows[0].begin(), rows[0].end()));
    auto value = [&](const std::string& n) {
        for (const auto& [k, v] : pure_hex)
            if (k == n) return v;
        return std::nan("");
    };
    worst = std::max(worst, rel_err(value("gamma1"), 1.87));
    worst = std::max(worst, rel_err(value("Psi"), -0.858));
    std::vector<double> zero_latents(sys.vars().size(), 0.0);
    const double rf0 = 1.0 / (1.0 + std::exp(-evaluate(sys.at("Rf").expr, zero_latents)));
    worst = std::max(worst, rel_err(rf0, 0.8652969480479719));
    compared += 3;
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 1.0,
            std::to_string(compared) + " values, max rel err " + fmt("%.3g", worst) + ", " +
                fmt("%.3f", secs) + " s"};
}

// ------------------------------------------------------------- fixtures

std::vector<std::string> fixture_names() {
    std::vector<std::string> names = schema::feature_columns();
    for (const auto& l : pipeline_levels())
        if (std::find(names.begin(), names.end(), l.name) == names.end()) names.push_back(l.name);
    return names;
}

std::vector<fs::path> fixture_files() {
    std::vector<fs::path> files{kData / "reference_system.eq", kData / "discover.eq"};
    std::vector<fs::path> cands;
    for (const auto& e : fs::directory_iterator(kData / "candidates"))
        if (e.path().extension() == ".eq") cands.push_back(e.path());
    std::sort(cands.begin(), cands.end());
    files.insert(files.end(), cands.begin(), cands.end());
    return files;
}

Outcome fixture_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto all = fixture_names();
    Rng rng = make_stream(2, 0);
    std::size_t total = 0, ok = 0;
    std::string first_failure;
    for (const auto& file : fixture_files()) {
        std::istringstream in(read_file(file));
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (line.find_first_not_of(" \t") == std::string::npos || hash == line.find_first_not_of(" \t"))
                continue;
            ++total;
            const std::string where = file.filename().string() + ":" + std::to_string(number);
            try {
                const std::string name = line.substr(0, line.find('='));
                const std::string trimmed = name.substr(0, name.find_last_not_of(" ") + 1);
                std::vector<std::string> raw;
                for (const auto& n : all)
                    if (n != trimmed) raw.push_back(n);
                EquationSystem a = parse_system(line, raw);
                const std::string printed = print_system(a);
                EquationSystem b = parse_system(printed, raw);
                bool same = a == b && print_system(b) == printed;
                const Expr& ea = a.equations().front().expr;
                const Expr& eb = b.equations().front().expr;
                for (int k = 0; k < 20 && same; ++k) {
                    std::vector<double> row(a.vars().size());
                    for (double& v : row) v = static_cast<double>(uniform_index(rng, 4)) * 0.5;
                    const double va = evaluate(ea, row);
                    const double vb = evaluate(eb, row);
                    same = (std::isnan(va) && std::isnan(vb)) || va == vb;
                }
                if (same) ++ok;
                else if (first_failure.empty()) first_failure = where;
            } catch (const std::exception& e) {
                if (first_failure.empty()) first_failure = where + " (" + e.what() + ")";
            }
        }
    }
    const double secs = seconds_since(t0);
    std::string detail = std::to_string(ok) + "/" + std::to_string(total) + " equations, " + fmt("%.3f", secs) + " s";
    if (!first_failure.empty()) detail += ", first failure " + first_failure;
    return {total > 0 && ok == total && secs < 5.0, detail};
}

// ---------------------------------------------------------- SR recovery

struct Affine {
    bool linear = false;
    double a = 0, b = 0, c = 0;
};

Affine affine_fit(const Expr& e) {
    auto f = [&](double x, double y) {
        const double row[] = {x, y};
        return evaluate(e, row);
    };
    Affine r;
    r.c = f(0, 0);
    r.a = f(1, 0) - r.c;
    r.b = f(0, 1) - r.c;
    Rng rng = make_stream(3, 0);
    r.linear = std::isfinite(r.a) && std::isfinite(r.b) && std::isfinite(r.c);
    for (int k = 0; k < 50 && r.linear; ++k) {
        const double x = uniform01(rng) * 6 - 3, y = uniform01(rng) * 6 - 3;
        const double want = r.a * x + r.b * y + r.c;
        r.linear = std::abs(f(x, y) - want) <= 1e-9 * (1.0 + std::abs(want));
    }
    return r;
}

Outcome sigmoid_linear_recovery() {
    int hits = 0;
    double slowest = 0.0;
    std::string log;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = make_stream(seed, hash_name("recovery-linear"));
        Columns X(2, std::vector<double>(500));
        std::vector<double> y(500);
        for (std::size_t i = 0; i < 500; ++i) {
            X[0][i] = uniform01(rng) * 6 - 3;
            X[1][i] = uniform01(rng) * 6 - 3;
            y[i] = sigmoid(3.48 * X[0][i] + 3.08 * X[1][i] + 1.86);
        }
        SRConfig cfg = SRConfig::rf_level();
        cfg.seed = seed;
        const auto t0 = std::chrono::steady_clock::now();
        Candidate sel = select_equation(fit(X, y, cfg));
        const double secs = seconds_since(t0);
        slowest = std::max(slowest, secs);
        const Affine af = affine_fit(sel.expr);
        const bool hit = af.linear && secs <= 300.0 && std::abs(af.a - 3.48) <= 0.05 &&
                         std::abs(af.b - 3.08) <= 0.05 && std::abs(af.c - 1.86) <= 0.05;
        hits += hit;
        log += hit ? "+" : "-";
    }
    return {hits >= 7, std::to_string(hits) + "/10 seeds linear within 0.05 [" + log + "], slowest " +
                           fmt("%.1f", slowest) + " s"};
}

// A noise-free target from a small random expression over two variables.
std::pair<Expr, std::vector<double>> exact_target(std::uint64_t seed, const Columns& X) {
    Rng rng = make_stream(seed, hash_name("recovery-exact"));
    SRConfig cfg;
    for (;;) {
        const int ops = 1 + static_cast<int>(uniform_index(rng, 3));
        Expr e = random_tree(ops, cfg, 2, rng);
        if (e.size() > 7 || !e.has_variables()) continue;
        std::vector<double> y(X[0].size());
        bool finite = true;
        for (std::size_t i = 0; i < y.size() && finite; ++i) {
            const double row[] = {X[0][i], X[1][i]};
            y[i] = evaluate(e, row);
            finite = std::isfinite(y[i]) && std::abs(y[i]) < 1e6;
        }
        if (!finite) continue;
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        if (*hi - *lo < 1e-3) continue;
        return {e, y};
    }
}

Outcome exact_recovery() {
    int hits = 0;
    std::string log;
    double total = 0.0;
    const VarTable v({"x0", "x1"});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = make_stream(seed, hash_name("recovery-data"));
        Columns X(2, std::vector<double>(100));
        for (auto& col : X)
            for (double& x : col) x = uniform01(rng) * 4 - 2;
        auto [target, y] = exact_target(seed, X);
        SRConfig cfg;
        cfg.seed = seed;
        cfg.early_stop_loss = 1e-13;
        const auto t0 = std::chrono::steady_clock::now();
        ParetoFront front = fit(X, y, cfg);
        total += seconds_since(t0);
        const bool hit = front.best_loss() < 1e-12;
        hits += hit;
        log += hit ? "+" : "-";
        if (!hit) std::cerr << "  exact recovery missed seed " << seed << ": " << print(target, v) << "\n";
    }
    return {hits >= 8, std::to_string(hits) + "/10 seeds below 1e-12 [" + log + "], " + fmt("%.1f", total) + " s"};
}

// ---------------------------------------------------------------- neural

Outcome gradient_check() {
    Rng rng = make_stream(5, 0);
    double worst = 0.0;
    std::size_t coords = 0;
    for (int k = 0; k < 20; ++k) {
        MlpParams p = testgen::random_network(rng);
        Matrix X = testgen::random_matrix(rng, p.spec.inputs(), 4);
        Matrix R = testgen::random_matrix(rng, 1, 4);
        auto r = testgen::check_gradients(p, X, R, 1e-6);
        worst = std::max(worst, r.max_rel_error);
        coords += r.coordinates;
    }
    return {worst <= 1e-5, "20 networks, " + std::to_string(coords) + " coordinates, max rel err " + fmt("%.3g", worst)};
}

Outcome receptive_field_isolation() {
    UhisrPlan plan = UhisrPlan::builtin();
    Rng rng = make_stream(6, 0);
    std::size_t checks = 0, violations = 0, latents = 0;
    bool sensitive = true;
    for (const auto& spec : plan.stages) {
        StageNet net(spec, rng);
        const auto n = static_cast<Eigen::Index>(spec.input_columns().size());
        for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
            ++latents;
            Eigen::Index begin = 0;
            for (std::size_t k = 0; k < c; ++k) begin += static_cast<Eigen::Index>(spec.clusters[k].features.size());
            const auto width = static_cast<Eigen::Index>(spec.clusters[c].features.size());
            for (int trial = 0; trial < 100; ++trial) {
                Matrix X(n, 1);
                for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = 3.0 * normal01(rng);
                Matrix Y = X;
                for (Eigen::Index i = 0; i < n; ++i)
                    if (i < begin || i >= begin + width) Y(i, 0) = 3.0 * normal01(rng);
                const double before = net.latents(X)(static_cast<Eigen::Index>(c), 0);
                const double after = net.latents(Y)(static_cast<Eigen::Index>(c), 0);
                ++checks;
                violations += before != after;
            }
            // Sanity: the latent does react to its own features.
            Matrix Z = Matrix::Zero(n, 1);
            Matrix W = Z;
            W(begin, 0) = 5.0;
            sensitive = sensitive && net.latents(Z)(static_cast<Eigen::Index>(c), 0) !=
                                         net.latents(W)(static_cast<Eigen::Index>(c), 0);
        }
    }
    return {violations == 0 && sensitive, std::to_string(latents) + " latents, " + std::to_string(checks) +
                                              " perturbations, " + std::to_string(violations) + " changed"};
}

// ------------------------------------------------------------ pipeline

struct TlcCheck {
    double stage_r2 = 0, rf_r2 = 0, rf_rmse = 0, seconds = 0;
    std::string equation;
};

TlcCheck tlc_check(const DataTable& table, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const SplitIndices sp = split(table, derive_seed(seed, "split"));
    TrainConfig tc;
    tc.seed = derive_seed(seed, "stage1");
    StageResult s1 = train_stage(UhisrPlan::builtin().stage(1), table, sp, tc);
    DataTable data = merge_columns(table, s1.latents);
    const LevelSpec& level = pipeline_level("Rf");
    SRConfig cfg = level_config(level);
    cfg.seed = derive_seed(seed, "sr:Rf");
    LevelResult lr = distill_level(level, data, sp, cfg);

    std::vector<double> y, yhat;
    const auto& psi = data.column("Psi");
    const auto& xi = data.column("xi");
    const auto& rf = data.column("Rf");
    for (std::size_t r : sp.test) {
        const double row[] = {psi[r], xi[r]};
        y.push_back(rf[r]);
        yhat.push_back(sigmoid(evaluate(lr.selected.expr, row)));
    }
    TlcCheck out;
    out.stage_r2 = s1.test_r2;
    out.rf_r2 = r_squared(y, yhat);
    out.rf_rmse = rmse(y, yhat);
    out.seconds = seconds_since(t0);
    out.equation = "Rf = sigmoid(" + print(lr.selected.expr, VarTable(level.inputs), PrintStyle::Display) + ")";
    return out;
}

Outcome tlc_outcome(const DataTable& table, const std::string& label) {
    TlcCheck c = tlc_check(table, 0);
    std::cerr << "  " << label << " selected " << c.equation << "\n";
    const bool pass = c.stage_r2 >= 0.90 && c.rf_r2 >= 0.85 && c.rf_rmse <= 0.13 && c.seconds <= 3600;
    return {pass, label + ": stage-1 test R2 " + fmt("%.4f", c.stage_r2) + ", Rf equation test R2 " +
                      fmt("%.4f", c.rf_r2) + " RMSE " + fmt("%.4f", c.rf_rmse) + ", " + fmt("%.0f", c.seconds) + " s"};
}

Outcome tlc_pipeline_synthetic() {
    SyntheticOptions so;
    so.seed = 0;
    return tlc_outcome(make_synthetic_tlc(so).table, "synthetic surrogate");
}

// --------------------------------------------------------------- probes

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1) / 2;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - mean) * (rb[i] - mean);
        saa += (ra[i] - mean) * (ra[i] - mean);
        sbb += (rb[i] - mean) * (rb[i] - mean);
    }
    return sab / std::sqrt(saa * sbb);
}

// FG polarity values that define the expected ordering.
const std::map<std::string, double>& reference_polarity() {
    static const std::map<std::string, double> p{
        {"CtAmide", 3.36},   {"CtCO2H", 2.90},   {"CtNH2", 2.81},  {"CtOH", 2.21},
        {"CtPhenol", 2.05},  {"CtAldehyde", 0.46}, {"CtNO2", -0.05}, {"CtR2CO", -0.31},
        {"CtRCO2R", -0.72},  {"CtF", -1.25},     {"CtROR", -1.59}, {"CtMe", -1.74},
        {"CtBr", -2.04},     {"CtCN", -2.20},    {"CtCl", -2.22},  {"CtI", -2.94}};
    return p;
}

Outcome polarity_ordering() {
    SyntheticOptions so;
    DataTable table = make_synthetic_tlc(so).table;
    int fg_hits = 0, psi_hits = 0;
    std::string rhos;
    const std::vector<std::string> psi_order{"Hex", "DCM", "Et2O", "EA", "MeOH"};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SplitIndices sp = split(table, derive_seed(seed, "split"));
        TrainConfig t1;
        t1.seed = derive_seed(seed, "stage1");
        StageResult s1 = train_stage(UhisrPlan::builtin().stage(1), table, sp, t1);
        DataTable data = merge_columns(table, s1.latents);
        TrainConfig t2;
        t2.seed = derive_seed(seed, "stage2");
        StageResult s2 = train_stage(UhisrPlan::builtin().stage(2), data, sp, t2);

        std::vector<double> probe, ref;
        for (const auto& [name, v] : polarity_probes(s2.net, "beta")) {
            probe.push_back(v);
            ref.push_back(reference_polarity().at(name));
        }
        // Latents are identified only up to a monotone map, so the sign of
        // the rank correlation carries no meaning.
        const double rho = std::abs(spearman(probe, ref));
        fg_hits += rho >= 0.8;
        rhos += (rhos.empty() ? "" : " ") + fmt("%.3f", rho);

        std::map<std::string, double> solvent;
        for (const auto& [name, v] : unit_probes(s1.net, "Psi")) solvent[name] = v;
        bool up = true, down = true;
        for (std::size_t i = 1; i < psi_order.size(); ++i) {
            up = up && solvent[psi_order[i - 1]] < solvent[psi_order[i]];
            down = down && solvent[psi_order[i - 1]] > solvent[psi_order[i]];
        }
        psi_hits += up || down;
    }
    return {fg_hits >= 3 && psi_hits >= 3,
            "FG |rho| per seed " + rhos + " (" + std::to_string(fg_hits) + "/5 >= 0.8); solvent order in " +
                std::to_string(psi_hits) + "/5 seeds",
            false};
}

// ------------------------------------------------------- metrics / MSD

long double ld_mean(const std::vector<double>& y) {
    long double s = 0;
    for (double v : y) s += v;
    return s / static_cast<long double>(y.size());
}

Outcome metrics_and_msd() {
    Rng rng = make_stream(9, 0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t n = 2 + uniform_index(rng, 199);
        std::vector<double> y(n), yhat(n);
        const double scale = std::pow(10.0, static_cast<double>(uniform_index(rng, 5)) - 2.0);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = scale * normal01(rng);
            yhat[i] = y[i] + scale * 0.3 * normal01(rng);
        }
        const long double m = ld_mean(y);
        long double sse = 0, sst = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sse += (static_cast<long double>(y[i]) - yhat[i]) * (static_cast<long double>(y[i]) - yhat[i]);
            sst += (y[i] - m) * (y[i] - m);
        }
        const double r2 = static_cast<double>(1.0L - sse / sst);
        const double e = static_cast<double>(std::sqrt(sse / static_cast<long double>(n)));
        worst = std::max(worst, std::abs(r_squared(y, yhat) - r2) / std::max(1.0, std::abs(r2)));
        worst = std::max(worst, std::abs(rmse(y, yhat) - e) / std::max(1.0, std::abs(e)));
    }

    // Independent MSD classification: substituent count plus the multiset
    // of cyclic gaps between neighbouring substituents.
    auto oracle = [](unsigned mask) {
        std::vector<int> pos;
        for (int i = 0; i < 6; ++i)
            if (mask & (1u << i)) pos.push_back(i);
        const std::size_t k = pos.size();
        if (k <= 1) return 1;
        if (k >= 5) return static_cast<int>(k) + 6;
        std::vector<int> gaps;
        for (std::size_t i = 0; i < k; ++i) gaps.push_back((pos[(i + 1) % k] - pos[i] + 6) % 6);
        std::sort(gaps.begin(), gaps.end());
        const std::map<std::vector<int>, int> table{
            {{1, 5}, 2}, {{2, 4}, 3}, {{3, 3}, 4},
            {{1, 1, 4}, 5}, {{1, 2, 3}, 6}, {{2, 2, 2}, 7},
            {{1, 1, 1, 3}, 8}, {{1, 1, 2, 2}, 9}, {{1, 2, 1, 2}, 10}};
        if (k == 4) {
            // Sorted gaps cannot tell 1,2,3,5 from 1,2,4,5; use adjacency.
            if (gaps == std::vector<int>{1, 1, 1, 3}) return 8;
            std::vector<int> cyc;
            for (std::size_t i = 0; i < k; ++i) cyc.push_back((pos[(i + 1) % k] - pos[i] + 6) % 6);
            for (std::size_t i = 0; i < k; ++i)
                if (cyc[i] == 2 && cyc[(i + 1) % k] == 2) return 9;
            return 10;
        }
        return table.at(gaps);
    };
    auto positions = [](unsigned mask) {
        std::vector<int> p;
        for (int i = 0; i < 6; ++i)
            if (mask & (1u << i)) p.push_back(i + 1);
        return p;
    };
    int mismatches = 0, asymmetric = 0;
    std::set<int> classes{msd_value({false, {}})};
    for (unsigned mask = 0; mask < 64; ++mask) {
        const int code = msd_value({true, positions(mask)});
        classes.insert(code);
        mismatches += code != oracle(mask);
        for (int rot = 0; rot < 6; ++rot)
            for (int flip = 0; flip < 2; ++flip) {
                unsigned img = 0;
                for (int i = 0; i < 6; ++i)
                    if (mask & (1u << i)) img |= 1u << ((flip ? (6 - i) : i) + rot) % 6;
                asymmetric += msd_value({true, positions(img)}) != code;
            }
    }
    const bool pass = worst <= 1e-12 && mismatches == 0 && asymmetric == 0 && classes.size() == 13;
    return {pass, "metrics max err " + fmt("%.3g", worst) + "; MSD: " + std::to_string(mismatches) +
                      " oracle mismatches, " + std::to_string(asymmetric) + " symmetry violations, " +
                      std::to_string(classes.size()) + " classes"};
}

// ---------------------------------------------------------- determinism

Outcome reproduce_determinism() {
    const fs::path dir = fs::temp_directory_path() / "uhisr_acceptance_reproduce";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SyntheticOptions so;
    so.seed = 4;
    write_atomic(dir / "tlc.csv", to_csv(make_synthetic_tlc(so).table));
    write_atomic(dir / "quick.cfg",
                 "epochs = 40\nsr.niterations = 4\nsr.ncycles = 60\nsr.populations = 4\nsr.threads = 2\n");
    auto run = [&](const std::string& out) {
        const std::string data = (dir / "tlc.csv").string(), cfg = (dir / "quick.cfg").string(),
                          o = (dir / out).string();
        const char* argv[] = {"uhisr", "--data", data.c_str(), "--out", o.c_str(), "--config", cfg.c_str(),
                              "--seed", "11", "reproduce"};
        std::ostringstream sink;
        return run_cli(10, argv, sink, sink);
    };
    const int a = run("a"), b = run("b");
    bool same = true;
    for (const char* f : {"equations.txt", "report.csv"})
        same = same && read_file(dir / "a" / f) == read_file(dir / "b" / f);
    const bool ran = (a == kExitOk || a == kExitAcceptance) && (b == kExitOk || b == kExitAcceptance);
    fs::remove_all(dir);
    return {ran && same, std::string("exit codes ") + std::to_string(a) + "/" + std::to_string(b) +
                             (same ? ", equations.txt and report.csv identical" : ", outputs differ")};
}

struct Criterion {
    int number;
    std::string name;
    std::function<Outcome()> run;
};

int report(const std::vector<Criterion>& criteria) {
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const char* tag = o.pass ? "PASS" : (o.gated ? "FAIL" : "FAIL (reported, not gated)");
        std::cout << tag << " [" << c.number << "] " << c.name << ": " << o.detail << std::endl;
        if (!o.pass && o.gated) ++failed;
    }
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && args[0] == "--tlc") {
        const char* path = std::getenv("UHISR_TLC_DATA");
        if (!path || !*path) {
            std::cout << "SKIP [7] measured TLC pipeline: UHISR_TLC_DATA is not set" << std::endl;
            return 77;
        }
        return report({{7, "TLC pipeline on measured data",
                        [path] { return tlc_outcome(load_csv(path), "measured data"); }}});
    }

    std::vector<Criterion> all{
        {1, "reference system vs hand substitution", reference_system_oracle},
        {2, "fixture parse/print/evaluate suite", fixture_suite},
        {3, "sigmoid linear recovery", sigmoid_linear_recovery},
        {4, "exact structure recovery", exact_recovery},
        {5, "gradient check", gradient_check},
        {6, "receptive-field isolation", receptive_field_isolation},
        {7, "TLC pipeline", tlc_pipeline_synthetic},
        {8, "FG polarity and solvent ordering", polarity_ordering},
        {9, "metric and MSD exactness", metrics_and_msd},
        {10, "reproduce determinism", reproduce_determinism},
    };
    // Optional criterion numbers restrict the run.
    std::set<int> only;
    for (const auto& a : args) only.insert(std::stoi(a));
    if (!only.empty())
        std::erase_if(all, [&](const Criterion& c) { return !only.count(c.number); });
    return report(all);
}
