#include "uhisr/synthetic.hpp"

#include "uhisr/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace uhisr {

const std::vector<std::array<double, 5>>& synthetic_solvent_systems() {
    static const std::vector<std::array<double, 5>> systems = [] {
        std::vector<std::array<double, 5>> s;
        for (double ea : {0.0, 0.1, 0.2, 0.33, 0.5, 1.0}) s.push_back({1.0 - ea, ea, 0.0, 0.0, 0.0});
        for (double et : {0.1, 0.25, 0.5, 1.0}) s.push_back({1.0 - et, 0.0, 0.0, 0.0, et});
        for (double me : {0.0, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1})
            s.push_back({0.0, 0.0, 1.0 - me, me, 0.0});
        return s;
    }();
    return systems;
}

const std::vector<std::pair<std::string, double>>& synthetic_fg_polarity() {
    static const std::vector<std::pair<std::string, double>> p{
        {"CtAmide", 3.36}, {"CtCO2H", 2.90},  {"CtNH2", 2.81},   {"CtOH", 2.21},
        {"CtPhenol", 2.05}, {"CtAldehyde", 0.46}, {"CtNO2", -0.05}, {"CtR2CO", -0.31},
        {"CtRCO2R", -0.72}, {"CtF", -1.25},  {"CtROR", -1.59},  {"CtMe", -1.74},
        {"CtBr", -2.04},   {"CtCN", -2.20},   {"CtCl", -2.22},   {"CtI", -2.94}};
    return p;
}

double synthetic_psi(const std::array<double, 5>& s) {
    const auto [hex, ea, dcm, meoh, et2o] = s;
    return -hex + 1.59 * ea - 0.411 * dcm + 11.1 * meoh + et2o * et2o + 0.142;
}

double synthetic_alpha(double nben, double msd, double dm) {
    return -nben * (dm + 0.4) / (1.0 + 0.15 * msd);
}

double synthetic_xi(double alpha, double beta) { return -0.15 * beta + 0.5 * alpha - 0.5; }

double synthetic_rf(double psi, double xi) { return sigmoid(3.48 * psi + 3.08 * xi + 1.86); }

namespace {

// Mean counts per FG column, in schema order.
constexpr std::array<double, 16> kFgMeans{0.15, 0.04, 0.19, 0.03, 0.10, 0.35, 0.17, 0.06,
                                          0.08, 0.06, 0.02, 0.20, 0.25, 0.11, 0.15, 0.12};

struct Compound {
    double nben = 0, msd = 0, dm = 0;
    std::array<double, 16> fg{};
    double alpha = 0, beta = 0;
};

Compound draw_compound(Rng& rng) {
    Compound c;
    const double u = uniform01(rng);
    c.nben = u < 0.10 ? 0 : u < 0.80 ? 1 : u < 0.97 ? 2 : 3;
    c.msd = c.nben == 0 ? 0 : static_cast<double>(1 + uniform_index(rng, 12));
    c.dm = std::round(std::abs(1.34 + 0.74 * normal01(rng)) * 1000.0) / 1000.0;
    const auto& fg = schema::fg_columns();
    for (std::size_t i = 0; i < fg.size(); ++i) {
        std::poisson_distribution<int> pois(kFgMeans[i]);
        c.fg[i] = std::min(pois(rng), 4);
    }
    for (const auto& [name, polarity] : synthetic_fg_polarity()) {
        auto it = std::find(fg.begin(), fg.end(), name);
        c.beta += polarity * c.fg[static_cast<std::size_t>(it - fg.begin())];
    }
    c.alpha = synthetic_alpha(c.nben, c.msd, c.dm);
    return c;
}

}  // namespace

SyntheticTlc make_synthetic_tlc(const SyntheticOptions& options) {
    if (options.compounds == 0 || options.rows < options.compounds)
        throw std::invalid_argument("synthetic data needs rows >= compounds > 0");
    Rng rng = make_stream(options.seed, hash_name("synthetic-tlc"));
    const auto& systems = synthetic_solvent_systems();
    // Family weights roughly follow the mean solvent fractions of the
    // measured data: Hex/EA, Hex/Et2O, MeOH/DCM.
    const std::array<double, 3> family_weight{0.42, 0.15, 0.43};
    const std::array<std::pair<std::size_t, std::size_t>, 3> family_range{
        std::pair{0u, 6u}, std::pair{6u, 10u}, std::pair{10u, 17u}};

    std::vector<std::string> names = schema::feature_columns();
    names.emplace_back(schema::target_column);
    std::vector<std::vector<double>> cols(names.size());
    std::vector<std::string> ids;
    SyntheticTruth truth;

    const std::size_t base = options.rows / options.compounds;
    const std::size_t extra = options.rows % options.compounds;
    for (std::size_t k = 0; k < options.compounds; ++k) {
        const Compound c = draw_compound(rng);
        const double xi = synthetic_xi(c.alpha, c.beta);
        char id[32];
        std::snprintf(id, sizeof id, "S%04zu", k + 1);
        const std::size_t count = base + (k < extra ? 1 : 0);
        for (std::size_t r = 0; r < count; ++r) {
            double u = uniform01(rng);
            std::size_t fam = u < family_weight[0] ? 0 : u < family_weight[0] + family_weight[1] ? 1 : 2;
            auto [lo, hi] = family_range[fam];
            const auto& s = systems[lo + uniform_index(rng, hi - lo)];
            const double psi = synthetic_psi(s);
            double rf = synthetic_rf(psi, xi) + options.noise * normal01(rng);
            rf = std::clamp(rf, 0.0, 1.0);

            std::size_t j = 0;
            for (double v : s) cols[j++].push_back(v);
            cols[j++].push_back(c.nben);
            cols[j++].push_back(c.msd);
            cols[j++].push_back(c.dm);
            for (double v : c.fg) cols[j++].push_back(v);
            cols[j++].push_back(rf);
            ids.emplace_back(id);
            truth.psi.push_back(psi);
            truth.xi.push_back(xi);
            truth.alpha.push_back(c.alpha);
            truth.beta.push_back(c.beta);
        }
    }
    return {DataTable(std::move(names), std::move(cols), std::move(ids)), std::move(truth)};
}

}  // namespace uhisr
