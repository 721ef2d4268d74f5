#pragma once

// Synthetic narrowband mmWave downlink: half-wavelength uniform linear array,
// DFT beam codebook, free-space line-of-sight path plus Rician-style scatter
// paths, pilot sweeps, annulus-bounded user mobility, and the exhaustive beam
// search that produces ground-truth labels.

#include <complex>
#include <cstdint>
#include <vector>

#include "liquidbeam/errors.hpp"
#include "liquidbeam/rng.hpp"

namespace lbt {

using cdouble = std::complex<double>;
using cvec = std::vector<cdouble>;

inline constexpr double kSpeedOfLight = 299792458.0;

struct SceneConfig {
    int n_antennas = 64;
    int n_beams = 64;
    double carrier_hz = 28e9;
    double bandwidth_hz = 50e6;
    double noise_figure_db = 9.0;
    double tx_power_dbm = 10.0;
    int n_paths = 3;  // line of sight + (n_paths - 1) scatter paths
    double ue_speed = 5.0;
    double slot_seconds = 0.160;
    int n_slots = 10;
    double r_inner = 20.0;
    double r_outer = 200.0;
    std::uint64_t seed = 1;

    void validate() const;
    double wavelength() const { return kSpeedOfLight / carrier_hz; }
    // P / sigma^2 in linear (mW over mW) units.
    double snr_linear() const;
};

struct Codebook {
    int n_antennas = 0;
    int n_beams = 0;
    std::vector<cvec> words;  // words[q][k], unit Euclidean norm each
};

struct UEState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // radians
    double speed = 0.0;    // m/s
};

// One scatter path: departure azimuth and complex gain relative to the unit
// line-of-sight gain.
struct ScatterPath {
    double azimuth = 0.0;
    cdouble gain;
};

struct PathSet {
    std::vector<ScatterPath> scatter;
};

// Unit-norm steering vector of a half-wavelength ULA; entry k has phase
// pi * k * sin(theta).
cvec array_response(double theta, int n_antennas);

// Codeword q entry k has phase 2*pi*k*q / n_beams, modulus 1/sqrt(n_antennas).
Codebook dft_codebook(int n_antennas, int n_beams);

double noise_power_dbm(double bandwidth_hz, double noise_figure_db);
double dbm_to_mw(double dbm);

// Scatter-path draw for one slot: uniform azimuths, complex Gaussian gains
// 10 dB below the line of sight.
PathSet draw_scatter_paths(const SceneConfig& cfg, Rng& rng);

// Channel at the UE position for a fixed path draw. Line of sight at the
// geometric azimuth with free-space amplitude sqrt(N_t / rho),
// rho = (4 pi d / lambda)^2, and propagation phase exp(-j 2 pi d / lambda).
cvec channel_at(const UEState& ue, const PathSet& paths, const SceneConfig& cfg);

// Convenience: draw paths and compose in one call.
cvec generate_channel(const UEState& ue, const SceneConfig& cfg, Rng& rng);

// y_q = sqrt(P) <h, v_q> + n_q with unit pilot symbol and circularly
// symmetric complex Gaussian noise of variance sigma2 (both in mW).
cvec pilot_sweep(const cvec& h, const Codebook& book, double tx_power_dbm, double sigma2_dbm,
                 Rng& rng);

// log2(1 + snr * |h^H v|^2), bits/s/Hz.
double spectral_efficiency(const cvec& h, const cvec& v, double snr_linear);

struct BeamChoice {
    int index = 0;
    double se = 0.0;
};

// Exhaustive search over the codebook; ties break toward the lowest index.
BeamChoice optimal_beam(const cvec& h, const Codebook& book, double snr_linear);

// Area-uniform spawn inside the annulus with a uniform heading.
UEState spawn_ue(const SceneConfig& cfg, Rng& rng);

void redraw_heading(UEState& ue, Rng& rng);

// Constant-velocity advance with reflection at the annulus boundaries.
UEState advance_ue(UEState ue, double dt, const SceneConfig& cfg);

// One whole-slot move: redraw the heading, then advance dt.
UEState step_ue(UEState ue, double dt, const SceneConfig& cfg, Rng& rng);

}  // namespace lbt
