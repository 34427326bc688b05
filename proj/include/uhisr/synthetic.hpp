#pragma once

#include "uhisr/dataset.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace uhisr {

/// Generator for TLC-shaped data with known polarity indices. Used where
/// the measured dataset is not available and for recovery tests.
struct SyntheticOptions {
    std::size_t compounds = 387;
    std::size_t rows = 4944;
    double noise = 0.02;
    std::uint64_t seed = 0;
};

/// Per-row values of the generator's indices.
struct SyntheticTruth {
    std::vector<double> psi, xi, alpha, beta;
};

struct SyntheticTlc {
    DataTable table;  // schema columns + Rf + ids
    SyntheticTruth truth;
};

SyntheticTlc make_synthetic_tlc(const SyntheticOptions& options = {});

/// Eluent compositions (Hex, EA, DCM, MeOH, Et2O) drawn from the three
/// binary systems Hex/EA, Hex/Et2O and MeOH/DCM.
const std::vector<std::array<double, 5>>& synthetic_solvent_systems();

/// Per-group polarity used by the generator, keyed by FG column name.
const std::vector<std::pair<std::string, double>>& synthetic_fg_polarity();

double synthetic_psi(const std::array<double, 5>& solvent);
double synthetic_alpha(double nben, double msd, double dm);
double synthetic_xi(double alpha, double beta);
double synthetic_rf(double psi, double xi);

}  // namespace uhisr
