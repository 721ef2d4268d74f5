#include "liquidbeam/channel.hpp"

#include <cmath>

namespace lbt {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kScatterPowerLinear = 0.1;  // -10 dB relative to line of sight
}  // namespace

void SceneConfig::validate() const {
    if (n_antennas < 1 || n_beams < 1) throw config_error("scene: antenna/beam counts must be >= 1");
    if (n_paths < 1) throw config_error("scene: n_paths must be >= 1");
    if (slot_seconds <= 0.0) throw config_error("scene: slot length must be positive");
    if (bandwidth_hz <= 0.0) throw config_error("scene: bandwidth must be positive");
    if (carrier_hz <= 0.0) throw config_error("scene: carrier frequency must be positive");
    if (n_slots < 1) throw config_error("scene: n_slots must be >= 1");
    if (!(r_inner > 0.0) || !(r_inner < r_outer))
        throw config_error("scene: annulus radii must satisfy 0 < inner < outer");
    if (ue_speed < 0.0) throw config_error("scene: UE speed must be non-negative");
}

double SceneConfig::snr_linear() const {
    return dbm_to_mw(tx_power_dbm) / dbm_to_mw(noise_power_dbm(bandwidth_hz, noise_figure_db));
}

cvec array_response(double theta, int n_antennas) {
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_antennas));
    const double spatial_freq = kPi * std::sin(theta);
    cvec a(static_cast<std::size_t>(n_antennas));
    for (int k = 0; k < n_antennas; ++k)
        a[static_cast<std::size_t>(k)] = std::polar(norm, spatial_freq * k);
    return a;
}

Codebook dft_codebook(int n_antennas, int n_beams) {
    if (n_antennas < 1 || n_beams < 1) throw config_error("codebook: counts must be >= 1");
    Codebook book;
    book.n_antennas = n_antennas;
    book.n_beams = n_beams;
    book.words.resize(static_cast<std::size_t>(n_beams));
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_antennas));
    for (int q = 0; q < n_beams; ++q) {
        cvec& w = book.words[static_cast<std::size_t>(q)];
        w.resize(static_cast<std::size_t>(n_antennas));
        for (int k = 0; k < n_antennas; ++k)
            w[static_cast<std::size_t>(k)] =
                std::polar(norm, 2.0 * kPi * static_cast<double>(k) * q / n_beams);
    }
    return book;
}

double noise_power_dbm(double bandwidth_hz, double noise_figure_db) {
    if (bandwidth_hz <= 0.0) throw config_error("noise_power: bandwidth must be positive");
    return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

PathSet draw_scatter_paths(const SceneConfig& cfg, Rng& rng) {
    PathSet paths;
    paths.scatter.resize(static_cast<std::size_t>(cfg.n_paths - 1));
    const double sigma = std::sqrt(kScatterPowerLinear / 2.0);
    for (ScatterPath& p : paths.scatter) {
        p.azimuth = rng.uniform(-kPi, kPi);
        p.gain = cdouble(sigma * rng.normal(), sigma * rng.normal());
    }
    return paths;
}

cvec channel_at(const UEState& ue, const PathSet& paths, const SceneConfig& cfg) {
    const double d = std::hypot(ue.x, ue.y);
    if (d < 1e-9) throw geometry_error("channel: UE at zero distance from the array");
    const double lambda = cfg.wavelength();
    const double amp = std::sqrt(static_cast<double>(cfg.n_antennas)) / (4.0 * kPi * d / lambda);
    const double theta_los = std::atan2(ue.y, ue.x);
    const cdouble los_gain = std::polar(1.0, -2.0 * kPi * d / lambda);

    cvec h = array_response(theta_los, cfg.n_antennas);
    for (cdouble& v : h) v *= amp * los_gain;
    for (const ScatterPath& p : paths.scatter) {
        const cvec a = array_response(p.azimuth, cfg.n_antennas);
        for (std::size_t k = 0; k < h.size(); ++k) h[k] += amp * p.gain * a[k];
    }
    return h;
}

cvec generate_channel(const UEState& ue, const SceneConfig& cfg, Rng& rng) {
    const PathSet paths = draw_scatter_paths(cfg, rng);
    return channel_at(ue, paths, cfg);
}

cvec pilot_sweep(const cvec& h, const Codebook& book, double tx_power_dbm, double sigma2_dbm,
                 Rng& rng) {
    if (static_cast<int>(h.size()) != book.n_antennas)
        throw dim_error("pilot_sweep: channel length does not match codebook antennas");
    const double amp = std::sqrt(dbm_to_mw(tx_power_dbm));
    const double noise_sigma = std::sqrt(dbm_to_mw(sigma2_dbm) / 2.0);
    cvec y(static_cast<std::size_t>(book.n_beams));
    for (int q = 0; q < book.n_beams; ++q) {
        const cvec& v = book.words[static_cast<std::size_t>(q)];
        cdouble acc(0.0, 0.0);
        for (std::size_t k = 0; k < h.size(); ++k) acc += std::conj(h[k]) * v[k];
        y[static_cast<std::size_t>(q)] =
            amp * acc + cdouble(noise_sigma * rng.normal(), noise_sigma * rng.normal());
    }
    return y;
}

double spectral_efficiency(const cvec& h, const cvec& v, double snr_linear) {
    if (h.size() != v.size()) throw dim_error("spectral_efficiency: vector length mismatch");
    if (snr_linear < 0.0) throw config_error("spectral_efficiency: SNR must be non-negative");
    cdouble acc(0.0, 0.0);
    for (std::size_t k = 0; k < h.size(); ++k) acc += std::conj(h[k]) * v[k];
    return std::log2(1.0 + snr_linear * std::norm(acc));
}

BeamChoice optimal_beam(const cvec& h, const Codebook& book, double snr_linear) {
    BeamChoice best{0, spectral_efficiency(h, book.words[0], snr_linear)};
    for (int q = 1; q < book.n_beams; ++q) {
        const double se = spectral_efficiency(h, book.words[static_cast<std::size_t>(q)], snr_linear);
        if (se > best.se) best = {q, se};
    }
    return best;
}

UEState spawn_ue(const SceneConfig& cfg, Rng& rng) {
    UEState ue;
    const double r =
        std::sqrt(rng.uniform(cfg.r_inner * cfg.r_inner, cfg.r_outer * cfg.r_outer));
    const double phi = rng.uniform(-kPi, kPi);
    ue.x = r * std::cos(phi);
    ue.y = r * std::sin(phi);
    ue.heading = rng.uniform(-kPi, kPi);
    ue.speed = cfg.ue_speed;
    return ue;
}

void redraw_heading(UEState& ue, Rng& rng) { ue.heading = rng.uniform(-kPi, kPi); }

UEState advance_ue(UEState ue, double dt, const SceneConfig& cfg) {
    if (dt <= 0.0) throw config_error("advance_ue: dt must be positive");
    ue.x += ue.speed * dt * std::cos(ue.heading);
    ue.y += ue.speed * dt * std::sin(ue.heading);
    const double r = std::hypot(ue.x, ue.y);
    const bool outside = r > cfg.r_outer;
    const bool inside = r < cfg.r_inner;
    if (outside || inside) {
        // fold the radius back across the boundary and flip the radial
        // velocity component
        const double bound = outside ? cfg.r_outer : cfg.r_inner;
        const double folded = 2.0 * bound - r;
        const double phi = std::atan2(ue.y, ue.x);
        ue.x = folded * std::cos(phi);
        ue.y = folded * std::sin(phi);
        const double ux = std::cos(phi), uy = std::sin(phi);
        double vx = std::cos(ue.heading), vy = std::sin(ue.heading);
        const double radial = vx * ux + vy * uy;
        vx -= 2.0 * radial * ux;
        vy -= 2.0 * radial * uy;
        ue.heading = std::atan2(vy, vx);
    }
    return ue;
}

UEState step_ue(UEState ue, double dt, const SceneConfig& cfg, Rng& rng) {
    redraw_heading(ue, rng);
    return advance_ue(ue, dt, cfg);
}

}  // namespace lbt
