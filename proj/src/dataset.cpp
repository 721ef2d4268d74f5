#include "liquidbeam/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

namespace lbt {

namespace {

// Little-endian scalar I/O. The writer collects into a byte buffer per
// episode so short writes can only happen at file granularity.
struct ByteWriter {
    std::vector<unsigned char> buf;

    void u32(std::uint32_t v) {
        buf.push_back(static_cast<unsigned char>(v));
        buf.push_back(static_cast<unsigned char>(v >> 8));
        buf.push_back(static_cast<unsigned char>(v >> 16));
        buf.push_back(static_cast<unsigned char>(v >> 24));
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void f32(float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u32(u);
    }
    void f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        u64(u);
    }
    void complex(cfloat v) {
        f32(v.real());
        f32(v.imag());
    }
};

struct ByteReader {
    const unsigned char* p;
    std::size_t remaining;
    std::size_t offset = 0;
    const std::string& path;

    void need(std::size_t n) {
        if (remaining < n)
            throw io_error("truncated dataset " + path + " at byte offset " +
                           std::to_string(offset));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
        p += 4;
        remaining -= 4;
        offset += 4;
        return v;
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }
    float f32() {
        const std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    double f64() {
        const std::uint64_t u = u64();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    cfloat complex() {
        const float re = f32();
        return cfloat(re, f32());
    }
};

constexpr std::uint32_t kDatasetVersion = 1;

void write_scene(ByteWriter& w, const SceneConfig& s) {
    w.u32(static_cast<std::uint32_t>(s.n_antennas));
    w.u32(static_cast<std::uint32_t>(s.n_beams));
    w.f64(s.carrier_hz);
    w.f64(s.bandwidth_hz);
    w.f64(s.noise_figure_db);
    w.f64(s.tx_power_dbm);
    w.u32(static_cast<std::uint32_t>(s.n_paths));
    w.f64(s.ue_speed);
    w.f64(s.slot_seconds);
    w.u32(static_cast<std::uint32_t>(s.n_slots));
    w.f64(s.r_inner);
    w.f64(s.r_outer);
    w.u64(s.seed);
}

SceneConfig read_scene(ByteReader& r) {
    SceneConfig s;
    s.n_antennas = static_cast<int>(r.u32());
    s.n_beams = static_cast<int>(r.u32());
    s.carrier_hz = r.f64();
    s.bandwidth_hz = r.f64();
    s.noise_figure_db = r.f64();
    s.tx_power_dbm = r.f64();
    s.n_paths = static_cast<int>(r.u32());
    s.ue_speed = r.f64();
    s.slot_seconds = r.f64();
    s.n_slots = static_cast<int>(r.u32());
    s.r_inner = r.f64();
    s.r_outer = r.f64();
    s.seed = r.u64();
    return s;
}

cvec widen(const std::vector<cfloat>& h) {
    cvec out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        out[i] = cdouble(static_cast<double>(h[i].real()), static_cast<double>(h[i].imag()));
    return out;
}

}  // namespace

std::size_t dataset_header_bytes(const Dataset& ds) {
    return 4 + 4 + 88 + 4 + 4 + 4 + 4 + 4 * ds.tbar_grid.size();
}

std::size_t episode_record_bytes(const SceneConfig& scene, std::size_t grid_points) {
    const std::size_t per_label = 4 + 4 + 8 * static_cast<std::size_t>(scene.n_antennas);
    const std::size_t per_slot =
        16 + 8 * static_cast<std::size_t>(scene.n_beams) + grid_points * per_label;
    return 8 + static_cast<std::size_t>(scene.n_slots) * per_slot;
}

Episode generate_episode(const SceneConfig& cfg, const Codebook& book,
                         const std::vector<double>& tbar_grid, std::uint64_t episode_seed) {
    cfg.validate();
    if (book.n_antennas != cfg.n_antennas || book.n_beams != cfg.n_beams)
        throw config_error("generate_episode: codebook does not match the scene");
    for (std::size_t i = 0; i < tbar_grid.size(); ++i) {
        if (!(tbar_grid[i] > 0.0 && tbar_grid[i] < 1.0))
            throw config_error("generate_episode: grid instants must lie strictly inside (0,1)");
        if (i > 0 && tbar_grid[i] <= tbar_grid[i - 1])
            throw config_error("generate_episode: grid instants must be strictly increasing");
    }

    Rng rng(episode_seed);
    const double sigma2_dbm = noise_power_dbm(cfg.bandwidth_hz, cfg.noise_figure_db);
    const double snr = cfg.snr_linear();
    const double T = cfg.slot_seconds;

    Episode ep;
    ep.seed = episode_seed;
    ep.slots.resize(static_cast<std::size_t>(cfg.n_slots));

    UEState ue = spawn_ue(cfg, rng);
    for (int s = 0; s < cfg.n_slots; ++s) {
        SlotRecord& slot = ep.slots[static_cast<std::size_t>(s)];
        redraw_heading(ue, rng);
        slot.ue_x = static_cast<float>(ue.x);
        slot.ue_y = static_cast<float>(ue.y);
        slot.heading = static_cast<float>(ue.heading);
        slot.speed = static_cast<float>(ue.speed);

        // One scatter draw per slot; intra-slot change comes from motion only.
        const PathSet paths = draw_scatter_paths(cfg, rng);
        const cvec h0 = channel_at(ue, paths, cfg);
        const cvec y = pilot_sweep(h0, book, cfg.tx_power_dbm, sigma2_dbm, rng);
        slot.pilot.resize(y.size());
        for (std::size_t q = 0; q < y.size(); ++q)
            slot.pilot[q] = cfloat(static_cast<float>(y[q].real()), static_cast<float>(y[q].imag()));

        slot.labels.resize(tbar_grid.size());
        UEState cur = ue;
        double prev_t = 0.0;
        for (std::size_t gi = 0; gi < tbar_grid.size(); ++gi) {
            cur = advance_ue(cur, (tbar_grid[gi] - prev_t) * T, cfg);
            prev_t = tbar_grid[gi];
            const cvec h = channel_at(cur, paths, cfg);
            InstantLabel& lab = slot.labels[gi];
            lab.chan.resize(h.size());
            for (std::size_t k = 0; k < h.size(); ++k)
                lab.chan[k] =
                    cfloat(static_cast<float>(h[k].real()), static_cast<float>(h[k].imag()));
            // label from the rounded snapshot so a reader can reproduce it bit
            // for bit from what is stored
            const BeamChoice best = optimal_beam(widen(lab.chan), book, snr);
            lab.q_star = static_cast<std::uint32_t>(best.index);
            lab.r_star = static_cast<float>(best.se);
        }
        ue = advance_ue(cur, (1.0 - prev_t) * T, cfg);
    }
    return ep;
}

Dataset generate_dataset(const SceneConfig& cfg, const std::vector<double>& tbar_grid, int count,
                         std::uint64_t master_seed, int first_index, int threads) {
    cfg.validate();
    if (count < 1) throw config_error("generate_dataset: episode count must be >= 1");
    const Codebook book = dft_codebook(cfg.n_antennas, cfg.n_beams);

    Dataset ds;
    ds.scene = cfg;
    ds.scene.seed = master_seed;
    ds.tbar_grid = tbar_grid;
    ds.episodes.resize(static_cast<std::size_t>(count));

    auto worker = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const std::uint64_t seed =
                Rng::mix(master_seed, static_cast<std::uint64_t>(first_index + i));
            ds.episodes[static_cast<std::size_t>(i)] =
                generate_episode(cfg, book, tbar_grid, seed);
        }
    };
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        worker(0, count);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (count + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(count, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (std::thread& th : pool) th.join();
    }
    return ds;
}

std::pair<Dataset, Dataset> generate_train_val(const SceneConfig& cfg,
                                               const std::vector<double>& tbar_grid, int n_train,
                                               int n_val, std::uint64_t master_seed, int threads) {
    Dataset train = generate_dataset(cfg, tbar_grid, n_train, master_seed, 0, threads);
    Dataset val = generate_dataset(cfg, tbar_grid, n_val, master_seed, n_train, threads);
    return {std::move(train), std::move(val)};
}

void write_dataset(const std::string& path, const Dataset& ds) {
    ByteWriter header;
    header.buf.insert(header.buf.end(), {'L', 'B', 'D', 'S'});
    header.u32(kDatasetVersion);
    write_scene(header, ds.scene);
    header.u32(static_cast<std::uint32_t>(ds.episodes.size()));
    header.u32(static_cast<std::uint32_t>(ds.scene.n_slots));
    header.u32(static_cast<std::uint32_t>(ds.scene.n_beams));
    header.u32(static_cast<std::uint32_t>(ds.tbar_grid.size()));
    for (double t : ds.tbar_grid) header.f32(static_cast<float>(t));

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char*>(header.buf.data()),
             static_cast<std::streamsize>(header.buf.size()));

    for (const Episode& ep : ds.episodes) {
        ByteWriter w;
        w.u64(ep.seed);
        for (const SlotRecord& slot : ep.slots) {
            w.f32(slot.ue_x);
            w.f32(slot.ue_y);
            w.f32(slot.heading);
            w.f32(slot.speed);
            for (cfloat v : slot.pilot) w.complex(v);
            for (const InstantLabel& lab : slot.labels) {
                w.u32(lab.q_star);
                w.f32(lab.r_star);
                for (cfloat v : lab.chan) w.complex(v);
            }
        }
        os.write(reinterpret_cast<const char*>(w.buf.data()),
                 static_cast<std::streamsize>(w.buf.size()));
    }
    if (!os) throw io_error("write failure on " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open dataset " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "LBDS", 4) != 0)
        throw format_error("bad dataset magic in " + path);
    ByteReader r{bytes.data() + 4, bytes.size() - 4, 4, path};
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion)
        throw format_error("unsupported dataset version " + std::to_string(version) + " in " +
                           path);

    Dataset ds;
    ds.scene = read_scene(r);
    ds.scene.validate();
    const std::uint32_t n_episodes = r.u32();
    const std::uint32_t n_slots = r.u32();
    const std::uint32_t q = r.u32();
    if (n_slots != static_cast<std::uint32_t>(ds.scene.n_slots) ||
        q != static_cast<std::uint32_t>(ds.scene.n_beams))
        throw format_error("dataset header disagrees with its scene echo in " + path);
    const std::uint32_t grid_n = r.u32();
    if (grid_n == 0 || grid_n > 64) throw format_error("implausible instant grid in " + path);
    ds.tbar_grid.resize(grid_n);
    for (std::uint32_t i = 0; i < grid_n; ++i) ds.tbar_grid[i] = static_cast<double>(r.f32());

    ds.episodes.resize(n_episodes);
    for (Episode& ep : ds.episodes) {
        ep.seed = r.u64();
        ep.slots.resize(n_slots);
        for (SlotRecord& slot : ep.slots) {
            slot.ue_x = r.f32();
            slot.ue_y = r.f32();
            slot.heading = r.f32();
            slot.speed = r.f32();
            slot.pilot.resize(q);
            for (cfloat& v : slot.pilot) v = r.complex();
            slot.labels.resize(grid_n);
            for (InstantLabel& lab : slot.labels) {
                lab.q_star = r.u32();
                if (lab.q_star >= q)
                    throw format_error("label beam index out of range in " + path);
                lab.r_star = r.f32();
                lab.chan.resize(static_cast<std::size_t>(ds.scene.n_antennas));
                for (cfloat& v : lab.chan) v = r.complex();
            }
        }
    }
    if (r.remaining != 0)
        throw format_error("trailing bytes after the last episode in " + path);

    // spot-check roughly 1% of labels: stored optimum must be reproducible
    const Codebook book = dft_codebook(ds.scene.n_antennas, ds.scene.n_beams);
    const double snr = ds.scene.snr_linear();
    constexpr std::size_t stride = 100;
    std::size_t index = 0;
    for (const Episode& ep : ds.episodes)
        for (const SlotRecord& slot : ep.slots)
            for (const InstantLabel& lab : slot.labels) {
                if (index++ % stride != 0) continue;
                const cvec h = widen(lab.chan);
                const BeamChoice best = optimal_beam(h, book, snr);
                const double tol = 1e-6 * std::max(1.0, static_cast<double>(lab.r_star));
                if (best.index != static_cast<int>(lab.q_star) ||
                    std::abs(best.se - static_cast<double>(lab.r_star)) > tol)
                    throw data_error("dataset " + path +
                                     " failed the label spot-check; file does not match its "
                                     "scene parameters");
            }
    return ds;
}

}  // namespace lbt
