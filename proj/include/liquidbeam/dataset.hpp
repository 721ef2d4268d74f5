#pragma once

// Episode generation and the on-disk dataset container. One episode is one
// UE trajectory: a pilot sweep at the start of every slot and, for every
// instant of the prediction grid, the exhaustive-search beam label, its
// spectral efficiency, and the channel snapshot the evaluation re-scores
// predicted beams against.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "liquidbeam/channel.hpp"

namespace lbt {

using cfloat = std::complex<float>;

struct InstantLabel {
    std::uint32_t q_star = 0;
    float r_star = 0.0f;         // spectral efficiency of the optimal beam
    std::vector<cfloat> chan;    // channel snapshot, length n_antennas
};

struct SlotRecord {
    float ue_x = 0.0f, ue_y = 0.0f, heading = 0.0f, speed = 0.0f;  // slot-start state
    std::vector<cfloat> pilot;          // length n_beams
    std::vector<InstantLabel> labels;   // one per grid instant
};

struct Episode {
    std::uint64_t seed = 0;
    std::vector<SlotRecord> slots;
};

struct Dataset {
    SceneConfig scene;
    std::vector<double> tbar_grid;
    std::vector<Episode> episodes;

    int n_slots() const { return scene.n_slots; }
    int q() const { return scene.n_beams; }
};

// Documented record sizes (bytes); file size = header + n_episodes * episode.
std::size_t dataset_header_bytes(const Dataset& ds);
std::size_t episode_record_bytes(const SceneConfig& scene, std::size_t grid_points);

// Deterministic trajectory simulation for one episode seed. Scatter paths
// are drawn once per slot and held fixed within it, so only UE motion moves
// the channel between the grid instants of a slot. Labels are computed from
// the float32-rounded channel snapshots so they reproduce exactly on load.
Episode generate_episode(const SceneConfig& cfg, const Codebook& book,
                         const std::vector<double>& tbar_grid, std::uint64_t episode_seed);

// Episodes indexed [first_index, first_index + count) under the master seed;
// per-episode seeds make the result independent of generation order and
// worker count.
Dataset generate_dataset(const SceneConfig& cfg, const std::vector<double>& tbar_grid, int count,
                         std::uint64_t master_seed, int first_index, int threads = 1);

// Train/validation pair on disjoint episode-index ranges of one seed stream.
std::pair<Dataset, Dataset> generate_train_val(const SceneConfig& cfg,
                                               const std::vector<double>& tbar_grid, int n_train,
                                               int n_val, std::uint64_t master_seed,
                                               int threads = 1);

void write_dataset(const std::string& path, const Dataset& ds);

// Verifies magic/version, then spot-checks roughly 1% of the stored labels:
// the recorded spectral efficiency must match a recomputation from the stored
// channel, and no other codeword may beat the recorded beam.
Dataset read_dataset(const std::string& path);

}  // namespace lbt
