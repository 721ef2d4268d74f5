#include "liquidbeam/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace lbt {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::function<void(const std::string&)> g_log_sink;
std::mutex g_log_mutex;

double parse_double_value(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw parse_error("value '" + v + "' for " + key + " is not a number");
    }
    while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) ++pos;
    if (pos != v.size())
        throw parse_error("value '" + v + "' for " + key + " is not a number");
    return out;
}

int parse_int_value(const std::string& v, const std::string& key) {
    const double d = parse_double_value(v, key);
    const int i = static_cast<int>(std::llround(d));
    if (std::abs(d - i) > 1e-9)
        throw parse_error("value '" + v + "' for " + key + " is not an integer");
    return i;
}

std::uint64_t parse_u64_value(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw parse_error("");
        return out;
    } catch (const std::exception&) {
        throw parse_error("value '" + v + "' for " + key + " is not an unsigned integer");
    }
}

bool parse_bool_value(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw parse_error("value '" + v + "' for " + key + " is not a boolean");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double_value(item, key));
    if (out.empty()) throw parse_error("empty list for " + key);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Canonical keys plus the short aliases accepted in config files and on the
// command line.
const std::vector<std::string>& canonical_keys() {
    static const std::vector<std::string> keys = {
        "scene.n_antennas",  "scene.n_beams",      "scene.carrier_hz",
        "scene.bandwidth_hz", "scene.noise_figure_db", "scene.tx_power_dbm",
        "scene.n_paths",     "scene.ue_speed",     "scene.slot_seconds",
        "scene.n_slots",     "scene.r_inner",      "scene.r_outer",
        "data.seed",         "data.n_train",       "data.n_val",
        "data.threads",      "data.train",         "data.val",
        "model.kind",        "train.epochs",       "train.batch_size",
        "train.learning_rate", "train.seed",       "train.out_dir",
        "tbar.grid",         "sweep.noise_factors", "sweep.retrain",
        "sweep.ckpt_lnn",    "sweep.ckpt_lstm",    "sweep.ckpt_ode_lstm",
    };
    return keys;
}

std::string resolve_alias(const std::string& key) {
    if (key == "Q") return "scene.n_beams";
    if (key == "N_t") return "scene.n_antennas";
    if (key == "epochs") return "train.epochs";
    if (key == "batch_size") return "train.batch_size";
    if (key == "lr") return "train.learning_rate";
    if (key == "model") return "model.kind";
    if (key == "seed") return "train.seed";
    if (key == "out_dir") return "train.out_dir";
    return key;
}

double noise_scale_mw(const SceneConfig& scene) {
    return dbm_to_mw(noise_power_dbm(scene.bandwidth_hz, scene.noise_figure_db));
}

// Pilot sweeps enter the network referenced to the noise floor: dividing by
// sigma makes the noise component unit variance, so batch statistics stay in
// a sane range across the 20 dB of path-loss spread and across noise sweeps.
float input_scale(const SceneConfig& scene) {
    return static_cast<float>(1.0 / std::sqrt(noise_scale_mw(scene)));
}

std::vector<TensorF> build_slot_inputs(const Dataset& ds, const std::vector<int>& episode_ids) {
    const int B = static_cast<int>(episode_ids.size());
    const int q = ds.q();
    const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(q))));
    const float scale = input_scale(ds.scene);
    std::vector<TensorF> out;
    out.reserve(static_cast<std::size_t>(ds.n_slots()));
    for (int s = 0; s < ds.n_slots(); ++s) {
        TensorF x({B, 2, grid, grid});
        for (int b = 0; b < B; ++b) {
            const SlotRecord& slot =
                ds.episodes[static_cast<std::size_t>(episode_ids[static_cast<std::size_t>(b)])]
                    .slots[static_cast<std::size_t>(s)];
            float* dst = x.data() + static_cast<std::int64_t>(b) * 2 * q;
            for (int j = 0; j < q; ++j) {
                dst[j] = slot.pilot[static_cast<std::size_t>(j)].real() * scale;
                dst[q + j] = slot.pilot[static_cast<std::size_t>(j)].imag() * scale;
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

// labels[instant][slot][batch] = optimal beam index
std::vector<std::vector<std::vector<int>>> build_labels(const Dataset& ds,
                                                        const std::vector<int>& episode_ids) {
    const std::size_t G = ds.tbar_grid.size();
    std::vector<std::vector<std::vector<int>>> labels(
        G, std::vector<std::vector<int>>(static_cast<std::size_t>(ds.n_slots())));
    for (std::size_t gi = 0; gi < G; ++gi)
        for (int s = 0; s < ds.n_slots(); ++s) {
            std::vector<int>& row = labels[gi][static_cast<std::size_t>(s)];
            row.reserve(episode_ids.size());
            for (int id : episode_ids)
                row.push_back(static_cast<int>(ds.episodes[static_cast<std::size_t>(id)]
                                                   .slots[static_cast<std::size_t>(s)]
                                                   .labels[gi]
                                                   .q_star));
        }
    return labels;
}

cvec widen(const std::vector<cfloat>& h) {
    cvec out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        out[i] = cdouble(static_cast<double>(h[i].real()), static_cast<double>(h[i].imag()));
    return out;
}

}  // namespace

void RunConfig::validate() const {
    scene.validate();
    if (epochs < 1) throw config_error("config: epochs must be >= 1");
    if (batch_size < 1) throw config_error("config: batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw config_error("config: learning rate must be positive");
    if (n_train < 1 || n_val < 1) throw config_error("config: dataset sizes must be >= 1");
    if (tbar_grid.empty()) throw config_error("config: instant grid must be non-empty");
}

RunConfig default_config() { return RunConfig{}; }

void apply_preset(RunConfig& cfg, const std::string& name) {
    if (name == "paper") {
        cfg = RunConfig{};
    } else if (name == "desk") {
        cfg = RunConfig{};
        cfg.scene.n_antennas = 16;
        cfg.scene.n_beams = 16;
        cfg.scene.n_slots = 5;
        cfg.n_train = 2048;
        cfg.n_val = 512;
        cfg.epochs = 30;
    } else if (name == "tiny") {
        cfg = RunConfig{};
        cfg.scene.n_antennas = 16;
        cfg.scene.n_beams = 16;
        cfg.scene.n_slots = 3;
        cfg.n_train = 64;
        cfg.n_val = 16;
        cfg.epochs = 2;
        cfg.tbar_grid = {0.1, 0.5, 0.9};
    } else if (name == "overfit") {
        cfg = RunConfig{};
        cfg.scene.n_antennas = 16;
        cfg.scene.n_beams = 16;
        cfg.scene.n_slots = 5;
        cfg.n_train = 1;
        cfg.n_val = 1;
        cfg.epochs = 500;
        cfg.batch_size = 1;
        cfg.learning_rate = 3e-3;
    } else {
        throw config_error("unknown preset '" + name + "' (paper | desk | tiny | overfit)");
    }
}

void set_config_key(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
    const std::string key = resolve_alias(trim(raw_key));
    const std::string v = trim(value);
    if (key == "scene.n_antennas") cfg.scene.n_antennas = parse_int_value(v, key);
    else if (key == "scene.n_beams") cfg.scene.n_beams = parse_int_value(v, key);
    else if (key == "scene.carrier_hz") cfg.scene.carrier_hz = parse_double_value(v, key);
    else if (key == "scene.bandwidth_hz") cfg.scene.bandwidth_hz = parse_double_value(v, key);
    else if (key == "scene.noise_figure_db") cfg.scene.noise_figure_db = parse_double_value(v, key);
    else if (key == "scene.tx_power_dbm") cfg.scene.tx_power_dbm = parse_double_value(v, key);
    else if (key == "scene.n_paths") cfg.scene.n_paths = parse_int_value(v, key);
    else if (key == "scene.ue_speed") cfg.scene.ue_speed = parse_double_value(v, key);
    else if (key == "scene.slot_seconds") cfg.scene.slot_seconds = parse_double_value(v, key);
    else if (key == "scene.n_slots") cfg.scene.n_slots = parse_int_value(v, key);
    else if (key == "scene.r_inner") cfg.scene.r_inner = parse_double_value(v, key);
    else if (key == "scene.r_outer") cfg.scene.r_outer = parse_double_value(v, key);
    else if (key == "data.seed") cfg.scene.seed = parse_u64_value(v, key);
    else if (key == "data.n_train") cfg.n_train = parse_int_value(v, key);
    else if (key == "data.n_val") cfg.n_val = parse_int_value(v, key);
    else if (key == "data.threads") cfg.data_threads = parse_int_value(v, key);
    else if (key == "data.train") cfg.train_path = v;
    else if (key == "data.val") cfg.val_path = v;
    else if (key == "model.kind") cfg.kind = model_kind_from_string(v);
    else if (key == "train.epochs") cfg.epochs = parse_int_value(v, key);
    else if (key == "train.batch_size") cfg.batch_size = parse_int_value(v, key);
    else if (key == "train.learning_rate") cfg.learning_rate = parse_double_value(v, key);
    else if (key == "train.seed") cfg.train_seed = parse_u64_value(v, key);
    else if (key == "train.out_dir") cfg.out_dir = v;
    else if (key == "tbar.grid") cfg.tbar_grid = parse_double_list(v, key);
    else if (key == "sweep.noise_factors") cfg.noise_factors = parse_double_list(v, key);
    else if (key == "sweep.retrain") cfg.sweep_retrain = parse_bool_value(v, key);
    else if (key == "sweep.ckpt_lnn") cfg.ckpt_lnn = v;
    else if (key == "sweep.ckpt_lstm") cfg.ckpt_lstm = v;
    else if (key == "sweep.ckpt_ode_lstm") cfg.ckpt_ode_lstm = v;
    else {
        std::string msg = "unknown config key '" + raw_key + "'; valid keys:";
        for (const std::string& k : canonical_keys()) msg += " " + k;
        throw parse_error(msg);
    }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw parse_error(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + stripped + "'");
        try {
            set_config_key(cfg, stripped.substr(0, eq), stripped.substr(eq + 1));
        } catch (const parse_error& e) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::vector<std::string> config_keys() { return canonical_keys(); }

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "scene.n_antennas = " << cfg.scene.n_antennas << "\n";
    os << "scene.n_beams = " << cfg.scene.n_beams << "\n";
    os << "scene.carrier_hz = " << format_float(cfg.scene.carrier_hz) << "\n";
    os << "scene.bandwidth_hz = " << format_float(cfg.scene.bandwidth_hz) << "\n";
    os << "scene.noise_figure_db = " << format_float(cfg.scene.noise_figure_db) << "\n";
    os << "scene.tx_power_dbm = " << format_float(cfg.scene.tx_power_dbm) << "\n";
    os << "scene.n_paths = " << cfg.scene.n_paths << "\n";
    os << "scene.ue_speed = " << format_float(cfg.scene.ue_speed) << "\n";
    os << "scene.slot_seconds = " << format_float(cfg.scene.slot_seconds) << "\n";
    os << "scene.n_slots = " << cfg.scene.n_slots << "\n";
    os << "scene.r_inner = " << format_float(cfg.scene.r_inner) << "\n";
    os << "scene.r_outer = " << format_float(cfg.scene.r_outer) << "\n";
    os << "data.seed = " << cfg.scene.seed << "\n";
    os << "data.n_train = " << cfg.n_train << "\n";
    os << "data.n_val = " << cfg.n_val << "\n";
    os << "data.threads = " << cfg.data_threads << "\n";
    os << "data.train = " << cfg.train_path << "\n";
    os << "data.val = " << cfg.val_path << "\n";
    os << "model.kind = " << to_string(cfg.kind) << "\n";
    os << "train.epochs = " << cfg.epochs << "\n";
    os << "train.batch_size = " << cfg.batch_size << "\n";
    os << "train.learning_rate = " << format_float(cfg.learning_rate) << "\n";
    os << "train.seed = " << cfg.train_seed << "\n";
    os << "train.out_dir = " << cfg.out_dir << "\n";
    os << "tbar.grid = ";
    for (std::size_t i = 0; i < cfg.tbar_grid.size(); ++i)
        os << (i ? "," : "") << format_float(cfg.tbar_grid[i]);
    os << "\n";
    os << "sweep.noise_factors = ";
    for (std::size_t i = 0; i < cfg.noise_factors.size(); ++i)
        os << (i ? "," : "") << format_float(cfg.noise_factors[i]);
    os << "\n";
    os << "sweep.retrain = " << (cfg.sweep_retrain ? "true" : "false") << "\n";
    if (!cfg.ckpt_lnn.empty()) os << "sweep.ckpt_lnn = " << cfg.ckpt_lnn << "\n";
    if (!cfg.ckpt_lstm.empty()) os << "sweep.ckpt_lstm = " << cfg.ckpt_lstm << "\n";
    if (!cfg.ckpt_ode_lstm.empty()) os << "sweep.ckpt_ode_lstm = " << cfg.ckpt_ode_lstm << "\n";
    return os.str();
}

void set_log_sink(std::function<void(const std::string&)> sink) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    g_log_sink = std::move(sink);
}

void log_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    if (g_log_sink) g_log_sink(line);
}

void generate_data_files(const RunConfig& cfg, const std::string& train_path,
                         const std::string& val_path) {
    cfg.validate();
    auto [train_ds, val_ds] = generate_train_val(cfg.scene, cfg.tbar_grid, cfg.n_train, cfg.n_val,
                                                 cfg.scene.seed, cfg.data_threads);
    write_dataset(train_path, train_ds);
    write_dataset(val_path, val_ds);
    log_line("wrote " + std::to_string(train_ds.episodes.size()) + " train episodes to " +
             train_path + ", " + std::to_string(val_ds.episodes.size()) + " val episodes to " +
             val_path);
}

std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

TrainResult train(const RunConfig& cfg) {
    cfg.validate();
    const Dataset ds = read_dataset(cfg.train_path);
    if (ds.scene.n_beams != cfg.scene.n_beams || ds.scene.n_antennas != cfg.scene.n_antennas)
        throw config_error("train: dataset scene (Q=" + std::to_string(ds.scene.n_beams) +
                           ", N_t=" + std::to_string(ds.scene.n_antennas) +
                           ") does not match the configured scene (Q=" +
                           std::to_string(cfg.scene.n_beams) +
                           ", N_t=" + std::to_string(cfg.scene.n_antennas) + ")");
    fs::create_directories(cfg.out_dir);

    TrackerModelF model = TrackerModelF::build(cfg.kind, ds.q(), cfg.train_seed);
    Adam<float> opt(model.trainable_tensors(), static_cast<float>(cfg.learning_rate));
    Rng shuffle_rng(Rng::mix(cfg.train_seed, 0x5AFEu));

    const int n = static_cast<int>(ds.episodes.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    result.loss_csv_path = (fs::path(cfg.out_dir) / "loss.csv").string();
    {
        std::ofstream cf(fs::path(cfg.out_dir) / "config.txt");
        cf << dump_config(cfg);
    }

    std::ostringstream csv;
    csv << "epoch,loss\n";
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        double loss_weighted = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int end = std::min(n, start + cfg.batch_size);
            const std::vector<int> ids(order.begin() + start, order.begin() + end);
            const std::vector<TensorF> inputs = build_slot_inputs(ds, ids);
            const auto labels = build_labels(ds, ids);

            Graph<float> g;
            auto bound = model.bind(g);
            std::vector<Graph<float>::Id> feats;
            feats.reserve(inputs.size());
            for (const TensorF& x : inputs)
                feats.push_back(model.features(g, bound, g.input(x), /*train=*/true));
            const auto loss = model.episode_loss(g, feats, labels, ds.tbar_grid, bound);
            const double loss_value = static_cast<double>(g.value(loss)[0]);
            opt.zero_grad();
            g.backward(loss);
            opt.step();
            loss_weighted += loss_value * (end - start);
        }
        const double epoch_loss = loss_weighted / n / ds.n_slots();
        result.epoch_loss.push_back(epoch_loss);
        csv << epoch << "," << format_float(epoch_loss) << "\n";
        {
            std::ofstream lf(result.loss_csv_path, std::ios::trunc);
            lf << csv.str();
        }
        model.save(result.checkpoint_path);
        log_line("[" + to_string(cfg.kind) + " seed " + std::to_string(cfg.train_seed) +
                 "] epoch " + std::to_string(epoch) + "/" + std::to_string(cfg.epochs) +
                 " loss " + format_float(epoch_loss));
    }
    return result;
}

PredictionTable predict_all(TrackerModelF& model, const Dataset& ds, int batch_size) {
    if (model.q_beams() != ds.q())
        throw config_error("predict: model beam count does not match the dataset");
    const int n = static_cast<int>(ds.episodes.size());
    const std::size_t G = ds.tbar_grid.size();
    PredictionTable table(static_cast<std::size_t>(n),
                          std::vector<std::vector<int>>(
                              static_cast<std::size_t>(ds.n_slots()), std::vector<int>(G, 0)));
    for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(n, start + batch_size);
        std::vector<int> ids(static_cast<std::size_t>(end - start));
        std::iota(ids.begin(), ids.end(), start);
        const std::vector<TensorF> inputs = build_slot_inputs(ds, ids);

        Graph<float> g;
        auto bound = model.bind(g);
        std::vector<Graph<float>::Id> feats;
        for (const TensorF& x : inputs)
            feats.push_back(model.features(g, bound, g.input(x), /*train=*/false));
        for (std::size_t gi = 0; gi < G; ++gi) {
            auto state = model.initial_state(g, end - start);
            for (int s = 0; s < ds.n_slots(); ++s) {
                const auto so = model.step(g, bound, feats[static_cast<std::size_t>(s)], state,
                                           ds.tbar_grid[gi]);
                state = so.state;
                const TensorF& logit = g.value(model.logits(g, bound, so.output_h));
                for (int b = 0; b < end - start; ++b) {
                    const float* row = logit.data() + static_cast<std::int64_t>(b) * ds.q();
                    int best = 0;
                    for (int qi = 1; qi < ds.q(); ++qi)
                        if (row[qi] > row[best]) best = qi;
                    table[static_cast<std::size_t>(start + b)][static_cast<std::size_t>(s)][gi] =
                        best;
                }
            }
        }
    }
    return table;
}

EvalReport score_predictions(const Dataset& ds, const PredictionTable& predictions) {
    if (predictions.size() != ds.episodes.size())
        throw data_error("score: prediction table does not cover the dataset");
    const std::size_t G = ds.tbar_grid.size();
    const Codebook book = dft_codebook(ds.scene.n_antennas, ds.scene.n_beams);
    const double snr = ds.scene.snr_linear();

    EvalReport report;
    report.tbar_grid = ds.tbar_grid;
    report.n_slots = ds.n_slots();
    report.mean_sen.assign(static_cast<std::size_t>(ds.n_slots()), std::vector<double>(G, 0.0));

    for (std::size_t e = 0; e < ds.episodes.size(); ++e)
        for (int s = 0; s < ds.n_slots(); ++s)
            for (std::size_t gi = 0; gi < G; ++gi) {
                const InstantLabel& lab =
                    ds.episodes[e].slots[static_cast<std::size_t>(s)].labels[gi];
                const int pred = predictions[e][static_cast<std::size_t>(s)][gi];
                if (pred < 0 || pred >= ds.q())
                    throw data_error("score: prediction index out of range");
                double sen = 1.0;
                if (pred != static_cast<int>(lab.q_star)) {
                    const cvec h = widen(lab.chan);
                    const double r_opt = spectral_efficiency(
                        h, book.words[static_cast<std::size_t>(lab.q_star)], snr);
                    const double r_hat =
                        spectral_efficiency(h, book.words[static_cast<std::size_t>(pred)], snr);
                    sen = r_hat / r_opt;
                }
                report.mean_sen[static_cast<std::size_t>(s)][gi] += sen;
            }

    const double inv_n = 1.0 / static_cast<double>(ds.episodes.size());
    report.by_slot.assign(static_cast<std::size_t>(ds.n_slots()), 0.0);
    report.by_tbar.assign(G, 0.0);
    for (int s = 0; s < ds.n_slots(); ++s)
        for (std::size_t gi = 0; gi < G; ++gi) {
            double& cell = report.mean_sen[static_cast<std::size_t>(s)][gi];
            cell *= inv_n;
            report.by_slot[static_cast<std::size_t>(s)] += cell / static_cast<double>(G);
            report.by_tbar[gi] += cell / ds.n_slots();
            report.overall += cell / (static_cast<double>(G) * ds.n_slots());
        }
    return report;
}

EvalReport evaluate(TrackerModelF& model, const Dataset& ds, int batch_size) {
    return score_predictions(ds, predict_all(model, ds, batch_size));
}

EvalReport evaluate_checkpoint(const std::string& ckpt_path, const std::string& dataset_path) {
    TrackerModelF model = TrackerModelF::load(ckpt_path);
    const Dataset ds = read_dataset(dataset_path);
    return evaluate(model, ds);
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open " + path + " for writing");
    os << "slot";
    for (double t : report.tbar_grid) os << ",tbar_" << format_float(t);
    os << ",mean\n";
    for (int s = 0; s < report.n_slots; ++s) {
        os << (s + 1);
        for (std::size_t gi = 0; gi < report.tbar_grid.size(); ++gi)
            os << "," << format_float(report.mean_sen[static_cast<std::size_t>(s)][gi]);
        os << "," << format_float(report.by_slot[static_cast<std::size_t>(s)]) << "\n";
    }
    os << "all";
    for (std::size_t gi = 0; gi < report.tbar_grid.size(); ++gi)
        os << "," << format_float(report.by_tbar[gi]);
    os << "," << format_float(report.overall) << "\n";
}

namespace {

struct KindCkpt {
    ModelKind kind;
    const std::string* path;
};

void require_checkpoints(const RunConfig& cfg, std::vector<KindCkpt>& out) {
    out = {{ModelKind::lnn, &cfg.ckpt_lnn},
           {ModelKind::lstm, &cfg.ckpt_lstm},
           {ModelKind::ode_lstm, &cfg.ckpt_ode_lstm}};
    for (const KindCkpt& kc : out) {
        if (kc.path->empty())
            throw config_error("sweep: missing checkpoint path for model kind " +
                               to_string(kc.kind));
        if (!fs::exists(*kc.path))
            throw io_error("sweep: checkpoint file not found: " + *kc.path);
    }
}

}  // namespace

void sweep(const RunConfig& cfg, const std::string& axis, const std::string& out_csv) {
    cfg.validate();
    std::ofstream os;
    auto open_csv = [&os, &out_csv]() {
        os.open(out_csv, std::ios::trunc);
        if (!os) throw io_error("cannot open " + out_csv + " for writing");
    };

    if (axis == "training_instant" || axis == "prediction_instant") {
        std::vector<KindCkpt> kinds;
        require_checkpoints(cfg, kinds);
        std::vector<EvalReport> reports;
        reports.reserve(kinds.size());
        for (const KindCkpt& kc : kinds) {
            log_line("sweep: evaluating " + to_string(kc.kind) + " from " + *kc.path);
            reports.push_back(evaluate_checkpoint(*kc.path, cfg.val_path));
        }
        open_csv();
        if (axis == "training_instant") {
            os << "slot,lnn,lstm,ode_lstm\n";
            for (int s = 0; s < reports[0].n_slots; ++s) {
                os << (s + 1);
                for (const EvalReport& r : reports)
                    os << "," << format_float(r.by_slot[static_cast<std::size_t>(s)]);
                os << "\n";
            }
        } else {
            os << "tbar,lnn,lstm,ode_lstm\n";
            for (std::size_t gi = 0; gi < reports[0].tbar_grid.size(); ++gi) {
                os << format_float(reports[0].tbar_grid[gi]);
                for (const EvalReport& r : reports) os << "," << format_float(r.by_tbar[gi]);
                os << "\n";
            }
        }
        return;
    }

    if (axis != "noise_factor")
        throw config_error("sweep: unknown axis '" + axis +
                           "' (training_instant | prediction_instant | noise_factor)");

    std::vector<double> grid = cfg.noise_factors;
    std::sort(grid.begin(), grid.end());
    std::vector<KindCkpt> fixed_ckpts;
    if (!cfg.sweep_retrain) require_checkpoints(cfg, fixed_ckpts);

    std::vector<std::vector<double>> rows;
    for (double nf : grid) {
        RunConfig point = cfg;
        point.scene.noise_figure_db = nf;
        const fs::path dir = fs::path(cfg.out_dir) / ("nf_" + format_float(nf));
        fs::create_directories(dir);
        point.train_path = (dir / "train.bin").string();
        point.val_path = (dir / "val.bin").string();
        log_line("sweep: generating data at noise figure " + format_float(nf) + " dB");
        generate_data_files(point, point.train_path, point.val_path);

        std::vector<double> row{nf};
        for (ModelKind kind : {ModelKind::lnn, ModelKind::lstm, ModelKind::ode_lstm}) {
            if (cfg.sweep_retrain) {
                RunConfig run = point;
                run.kind = kind;
                run.out_dir = (dir / to_string(kind)).string();
                const TrainResult tr = train(run);
                row.push_back(evaluate_checkpoint(tr.checkpoint_path, point.val_path).overall);
            } else {
                const std::string* path =
                    kind == ModelKind::lnn ? &cfg.ckpt_lnn
                    : kind == ModelKind::lstm ? &cfg.ckpt_lstm : &cfg.ckpt_ode_lstm;
                row.push_back(evaluate_checkpoint(*path, point.val_path).overall);
            }
        }
        rows.push_back(std::move(row));
    }
    open_csv();
    os << "noise_factor,lnn,lstm,ode_lstm\n";
    for (const std::vector<double>& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_float(row[i]);
        os << "\n";
    }
}

int nearest_codeword_index(double theta, int n_beams) {
    const double target = kPi * std::sin(theta);
    int best = 0;
    double best_dist = 1e300;
    for (int q = 0; q < n_beams; ++q) {
        double diff = std::fmod(target - 2.0 * kPi * q / n_beams, 2.0 * kPi);
        if (diff > kPi) diff -= 2.0 * kPi;
        if (diff < -kPi) diff += 2.0 * kPi;
        if (std::abs(diff) < best_dist) {
            best_dist = std::abs(diff);
            best = q;
        }
    }
    return best;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw data_error("spearman: need two equal-length series");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::sort(idx.begin(), idx.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n, 0.0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x);
    const std::vector<double> ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i] / n;
        my += ry[i] / n;
    }
    double num = 0, dx = 0, dy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if (dx == 0.0 || dy == 0.0) return 0.0;
    return num / std::sqrt(dx * dy);
}

}  // namespace lbt
