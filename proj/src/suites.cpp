#include <algorithm>
#include <cmath>

#include "liquidbeam/harness.hpp"

namespace lbt {

namespace {

TensorD rand_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    TensorD t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
    return t;
}

TensorD grad_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    TensorD t = rand_tensor(std::move(shape), rng, scale);
    t.set_requires_grad(true);
    return t;
}

using BuildFn = std::function<Graph<double>::Id(Graph<double>&)>;

// Runs backward once to collect tape gradients, then compares them against
// central finite differences of the rebuilt forward pass.
double check_case(const BuildFn& build, const std::vector<NamedParam<double>>& params,
                  int samples = 8) {
    for (const NamedParam<double>& p : params) p.tensor->zero_grad();
    {
        Graph<double> g;
        g.backward(build(g));
    }
    FdOptions opt;
    opt.samples_per_block = samples;
    auto loss = [&build]() {
        Graph<double> g;
        return static_cast<double>(g.value(build(g))[0]);
    };
    return fd_max_rel_err<double>(loss, params, opt);
}

}  // namespace

std::vector<CheckEntry> gradient_suite() {
    std::vector<CheckEntry> out;
    auto push = [&out](const std::string& name, double tol, double err) {
        out.push_back({name, err, tol, err <= tol});
        log_line("gradcheck " + name + ": max rel err " + format_float(err) + " (tol " +
                 format_float(tol) + ")");
    };
    Rng rng(0xC0FFEE);

    {  // linear through a nonlinearity
        TensorD x = grad_tensor({3, 5}, rng);
        TensorD w = grad_tensor({4, 5}, rng);
        TensorD b = grad_tensor({4}, rng);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.tanh(g.linear(g.param(x), g.param(w), g.param(b))));
        };
        push("linear", 1e-4, check_case(build, {{"x", &x}, {"w", &w}, {"b", &b}}));
    }
    {  // conv2d, stride 1 reference configuration
        TensorD x = grad_tensor({2, 3, 5, 5}, rng);
        TensorD k = grad_tensor({4, 3, 3, 3}, rng, 0.5);
        TensorD b = grad_tensor({4}, rng);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.tanh(g.conv2d(g.param(x), g.param(k), g.param(b), 1, 1)));
        };
        push("conv2d_s1p1", 1e-4, check_case(build, {{"x", &x}, {"k", &k}, {"b", &b}}));
    }
    {  // conv2d in the extractor's stride-3 geometry on an 8x8 grid
        TensorD x = grad_tensor({2, 2, 8, 8}, rng);
        TensorD k = grad_tensor({6, 2, 3, 3}, rng, 0.5);
        TensorD b = grad_tensor({6}, rng);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.tanh(g.conv2d(g.param(x), g.param(k), g.param(b), 3, 1)));
        };
        push("conv2d_s3p1", 1e-4, check_case(build, {{"x", &x}, {"k", &k}, {"b", &b}}));
    }
    {  // batchnorm2d, train mode
        TensorD x = grad_tensor({4, 3, 2, 2}, rng);
        TensorD gamma = grad_tensor({3}, rng, 0.5);
        for (int c = 0; c < 3; ++c) gamma[c] += 1.0;
        TensorD beta = grad_tensor({3}, rng, 0.2);
        BatchNormState<double> state;
        state.init(3);
        auto build = [&](Graph<double>& g) {
            return g.sum(
                g.tanh(g.batchnorm2d(g.param(x), g.param(gamma), g.param(beta), state, true)));
        };
        push("batchnorm2d_train", 1e-3,
             check_case(build, {{"x", &x}, {"gamma", &gamma}, {"beta", &beta}}));
    }
    {  // batchnorm2d, eval mode (affine through running stats)
        TensorD x = grad_tensor({2, 3, 2, 2}, rng);
        TensorD gamma = grad_tensor({3}, rng, 0.5);
        TensorD beta = grad_tensor({3}, rng, 0.2);
        BatchNormState<double> state;
        state.init(3);
        for (int c = 0; c < 3; ++c) {
            state.running_mean[static_cast<std::size_t>(c)] = 0.3 * c;
            state.running_var[static_cast<std::size_t>(c)] = 1.0 + 0.2 * c;
        }
        auto build = [&](Graph<double>& g) {
            return g.sum(
                g.tanh(g.batchnorm2d(g.param(x), g.param(gamma), g.param(beta), state, false)));
        };
        push("batchnorm2d_eval", 1e-4,
             check_case(build, {{"x", &x}, {"gamma", &gamma}, {"beta", &beta}}));
    }
    for (Activation kind : {Activation::relu, Activation::tanh, Activation::sigmoid}) {
        TensorD x = grad_tensor({2, 9}, rng);
        auto build = [&](Graph<double>& g) { return g.sum(g.activation(g.param(x), kind)); };
        const char* name = kind == Activation::relu ? "relu"
                           : kind == Activation::tanh ? "tanh" : "sigmoid";
        push(name, 1e-4, check_case(build, {{"x", &x}}));
    }
    {  // global average pooling
        TensorD x = grad_tensor({2, 3, 4, 4}, rng);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.tanh(g.avgpool_global(g.param(x))));
        };
        push("avgpool_global", 1e-4, check_case(build, {{"x", &x}}));
    }
    {  // concat along the feature axis
        TensorD a = grad_tensor({3, 4}, rng);
        TensorD b = grad_tensor({3, 2}, rng);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.tanh(g.concat({g.param(a), g.param(b)}, 1)));
        };
        push("concat", 1e-4, check_case(build, {{"a", &a}, {"b", &b}}));
    }
    {  // fused softmax cross entropy
        TensorD logits = grad_tensor({4, 6}, rng, 2.0);
        const std::vector<int> targets = {1, 0, 5, 3};
        auto build = [&](Graph<double>& g) {
            return g.softmax_cross_entropy(g.param(logits), targets);
        };
        push("softmax_cross_entropy", 1e-4, check_case(build, {{"logits", &logits}}));
    }
    {  // standalone softmax
        TensorD x = grad_tensor({3, 5}, rng);
        TensorD w = grad_tensor({3, 5}, rng);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.mul(g.softmax(g.param(x)), g.param(w)));
        };
        push("softmax", 1e-4, check_case(build, {{"x", &x}, {"w", &w}}));
    }
    {  // elementwise add / mul / affine chain
        TensorD a = grad_tensor({2, 6}, rng);
        TensorD b = grad_tensor({2, 6}, rng);
        auto build = [&](Graph<double>& g) {
            const auto s = g.add(g.param(a), g.affine(g.param(b), 0.7, -0.2));
            return g.sum(g.tanh(g.mul(s, g.param(a))));
        };
        push("elementwise", 1e-4, check_case(build, {{"a", &a}, {"b", &b}}));
    }
    {  // closed-form cell in isolation
        CfcCell<double> cell;
        Rng cr(42);
        cell.init(12, 6, 10, cr);
        TensorD feat = grad_tensor({3, 12}, rng);
        TensorD h_prev = grad_tensor({3, 6}, rng, 0.5);
        auto build = [&](Graph<double>& g) {
            return g.sum(g.mul(cell.forward(g, g.param(feat), g.param(h_prev), 0.6),
                               g.input(TensorD::full({3, 6}, 0.7))));
        };
        std::vector<NamedParam<double>> params = {{"feat", &feat}, {"h_prev", &h_prev}};
        cell.collect_params("cfc", params);
        push("cfc_cell", 1e-4, check_case(build, params));
    }

    // full models at a small configuration: 16 beams, 2 slots, 3 instants
    const std::vector<double> grid = {0.2, 0.5, 0.8};
    Rng drng(0xDA7A);
    const int batch = 2, slots = 2, q = 16;
    std::vector<TensorD> inputs;
    for (int s = 0; s < slots; ++s) inputs.push_back(rand_tensor({batch, 2, 4, 4}, drng));
    std::vector<std::vector<std::vector<int>>> labels(
        grid.size(), std::vector<std::vector<int>>(slots));
    for (auto& per_slot : labels)
        for (auto& row : per_slot) {
            row.resize(batch);
            for (int b = 0; b < batch; ++b) row[static_cast<std::size_t>(b)] = drng.uniform_int(0, q);
        }
    for (ModelKind kind : {ModelKind::lnn, ModelKind::lstm, ModelKind::ode_lstm}) {
        TrackerModelD model = TrackerModelD::build(kind, q, 99);
        auto build = [&](Graph<double>& g) {
            auto bound = model.bind(g);
            std::vector<Graph<double>::Id> feats;
            for (const TensorD& x : inputs)
                feats.push_back(model.features(g, bound, g.input(x), /*train=*/true));
            return model.episode_loss(g, feats, labels, grid, bound);
        };
        push("model_" + to_string(kind), 1e-3, check_case(build, model.named_params(), 4));
    }
    return out;
}

namespace {

void push_check(std::vector<CheckEntry>& out, const std::string& name, double value,
                double threshold, bool pass) {
    out.push_back({name, value, threshold, pass});
    log_line(std::string("selftest ") + name + ": " + (pass ? "ok" : "FAIL") + " (value " +
             format_float(value) + ")");
}

}  // namespace

std::vector<CheckEntry> selftest_suite() {
    std::vector<CheckEntry> out;
    constexpr double kPi = 3.14159265358979323846;

    {  // codebook structure over a few sizes
        double worst_mod = 0.0, worst_norm = 0.0, worst_gram = 0.0, worst_phase = 0.0;
        for (auto [nt, q] : {std::pair{8, 8}, {16, 16}, {64, 64}, {8, 16}}) {
            const Codebook book = dft_codebook(nt, q);
            for (int qq = 0; qq < q; ++qq) {
                double norm = 0.0;
                for (int k = 0; k < nt; ++k) {
                    const cdouble v = book.words[static_cast<std::size_t>(qq)][static_cast<std::size_t>(k)];
                    worst_mod = std::max(worst_mod,
                                         std::abs(std::abs(v) * std::sqrt(double(nt)) - 1.0));
                    norm += std::norm(v);
                    double want = std::fmod(2.0 * kPi * k * qq / q, 2.0 * kPi);
                    double got = std::arg(v);
                    if (got < 0) got += 2.0 * kPi;
                    double diff = std::abs(got - want);
                    diff = std::min(diff, 2.0 * kPi - diff);
                    worst_phase = std::max(worst_phase, diff);
                }
                worst_norm = std::max(worst_norm, std::abs(std::sqrt(norm) - 1.0));
            }
            if (nt == q) {
                for (int a = 0; a < q; ++a)
                    for (int b = a + 1; b < q; ++b) {
                        cdouble ip(0, 0);
                        for (int k = 0; k < nt; ++k)
                            ip += std::conj(book.words[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)]) *
                                  book.words[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)];
                        worst_gram = std::max(worst_gram, std::abs(ip));
                    }
            }
        }
        push_check(out, "codebook_modulus", worst_mod, 1e-12, worst_mod < 1e-12);
        push_check(out, "codebook_norm", worst_norm, 1e-12, worst_norm < 1e-12);
        push_check(out, "codebook_orthogonality", worst_gram, 1e-6, worst_gram < 1e-6);
        push_check(out, "codebook_phase", worst_phase, 1e-9, worst_phase < 1e-9);
    }
    {  // steering vector normalization
        Rng rng(11);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const cvec a = array_response(rng.uniform(-kPi, kPi), 1 + rng.uniform_int(0, 64));
            double norm = 0.0;
            for (const cdouble& v : a) norm += std::norm(v);
            worst = std::max(worst, std::abs(std::sqrt(norm) - 1.0));
        }
        push_check(out, "steering_norm", worst, 1e-12, worst < 1e-12);
    }
    {  // exhaustive search recovers the geometrically nearest codeword (single path)
        SceneConfig cfg;
        cfg.n_antennas = 64;
        cfg.n_beams = 64;
        cfg.n_paths = 1;
        Rng rng(2024);
        int mismatches = 0;
        const Codebook book = dft_codebook(cfg.n_antennas, cfg.n_beams);
        for (int i = 0; i < 200; ++i) {
            const UEState ue = spawn_ue(cfg, rng);
            const cvec h = generate_channel(ue, cfg, rng);
            const int found = optimal_beam(h, book, cfg.snr_linear()).index;
            const int want = nearest_codeword_index(std::atan2(ue.y, ue.x), cfg.n_beams);
            if (found != want) ++mismatches;
        }
        push_check(out, "oracle_nearest_codeword", mismatches, 0, mismatches == 0);
    }
    {  // noiseless pilot argmax agrees with the exhaustive search
        SceneConfig cfg;
        cfg.n_antennas = 64;
        cfg.n_beams = 64;
        Rng rng(77);
        const Codebook book = dft_codebook(cfg.n_antennas, cfg.n_beams);
        int mismatches = 0;
        for (int i = 0; i < 200; ++i) {
            const UEState ue = spawn_ue(cfg, rng);
            const cvec h = generate_channel(ue, cfg, rng);
            const cvec y = pilot_sweep(h, book, cfg.tx_power_dbm, -400.0, rng);
            int best = 0;
            for (int q = 1; q < cfg.n_beams; ++q)
                if (std::abs(y[static_cast<std::size_t>(q)]) > std::abs(y[static_cast<std::size_t>(best)]))
                    best = q;
            if (best != optimal_beam(h, book, cfg.snr_linear()).index) ++mismatches;
        }
        push_check(out, "pilot_argmax_matches_search", mismatches, 0, mismatches == 0);
    }
    {  // closed-form cell: half gate at zero instant, independent of the gate head
        Rng rng(5);
        CfcCell<float> cell;
        cell.init(8, 4, 6, rng);
        TensorF feat({2, 8});
        TensorF h0({2, 4});
        for (std::int64_t i = 0; i < feat.numel(); ++i) feat[i] = static_cast<float>(rng.normal());
        Graph<float> g;
        const auto out1 = g.value(cell.forward(g, g.input(feat), g.input(h0), 0.0));
        for (std::int64_t i = 0; i < cell.head_f.w.numel(); ++i)
            cell.head_f.w[i] += 3.0f;  // must not matter at tbar = 0
        Graph<float> g2;
        const auto out2 = g2.value(cell.forward(g2, g2.input(feat), g2.input(h0), 0.0));
        double diff = 0.0;
        for (std::int64_t i = 0; i < out1.numel(); ++i)
            diff = std::max(diff, std::abs(static_cast<double>(out1[i]) - out2[i]));
        push_check(out, "cfc_half_gate_at_zero", diff, 0.0, diff == 0.0);
    }
    {  // gate saturation hands the output to the h branch
        Rng rng(6);
        CfcCell<double> cell;
        cell.init(8, 4, 6, rng);
        for (std::int64_t i = 0; i < cell.head_f.w.numel(); ++i) cell.head_f.w[i] = 0.0;
        for (std::int64_t i = 0; i < cell.head_f.b.numel(); ++i) cell.head_f.b[i] = 20.0;
        TensorD feat({2, 8});
        TensorD h0({2, 4});
        for (std::int64_t i = 0; i < feat.numel(); ++i) feat[i] = rng.normal();
        Graph<double> g;
        const auto joint = g.concat({g.input(feat), g.input(h0)}, 1);
        const auto bound = cell.bind(g);
        const auto z = g.tanh(g.linear(joint, bound.backbone_w, bound.backbone_b));
        const auto h_branch = g.value(g.tanh(g.linear(z, bound.h_w, bound.h_b)));
        Graph<double> g2;
        const auto full = g2.value(cell.forward(g2, g2.input(feat), g2.input(h0), 1.0));
        double diff = 0.0;
        for (std::int64_t i = 0; i < full.numel(); ++i)
            diff = std::max(diff, std::abs(full[i] - h_branch[i]));
        push_check(out, "cfc_saturation", diff, 1e-8, diff < 1e-8);
    }
    {  // hidden state bound, instant sensitivity, continuity, gate sum
        Rng rng(7);
        CfcCell<float> cell;
        cell.init(16, 8, 12, rng);
        TensorF feat({4, 16});
        TensorF h0({4, 8});
        for (std::int64_t i = 0; i < feat.numel(); ++i) feat[i] = static_cast<float>(2.0 * rng.normal());
        for (std::int64_t i = 0; i < h0.numel(); ++i) h0[i] = static_cast<float>(0.5 * rng.normal());
        auto run = [&](double tbar) {
            Graph<float> g;
            return g.value(cell.forward(g, g.input(feat), g.input(h0), tbar));
        };
        const auto a = run(0.3), b = run(0.7);
        double bound_violation = 0.0, sensitivity = 0.0;
        for (std::int64_t i = 0; i < a.numel(); ++i) {
            bound_violation = std::max(bound_violation, std::abs(static_cast<double>(a[i])));
            sensitivity = std::max(sensitivity, std::abs(static_cast<double>(a[i]) - b[i]));
        }
        push_check(out, "cfc_output_bound", bound_violation, 1.0, bound_violation < 1.0);
        push_check(out, "cfc_instant_sensitivity", sensitivity, 1e-6, sensitivity > 1e-6);

        // continuity: |x(t+d) - x(t)| <= K d with K from the gate-head scale
        double f_mag = 0.0;
        {
            Graph<float> g;
            const auto joint = g.concat({g.input(feat), g.input(h0)}, 1);
            const auto bd = cell.bind(g);
            const auto z = g.tanh(g.linear(joint, bd.backbone_w, bd.backbone_b));
            const auto f_logit = g.value(g.linear(z, bd.f_w, bd.f_b));
            for (std::int64_t i = 0; i < f_logit.numel(); ++i)
                f_mag = std::max(f_mag, std::abs(static_cast<double>(f_logit[i])));
        }
        const double delta = 1e-4;
        const auto c = run(0.5), d = run(0.5 + delta);
        double step = 0.0;
        for (std::int64_t i = 0; i < c.numel(); ++i)
            step = std::max(step, std::abs(static_cast<double>(c[i]) - d[i]));
        const double lipschitz = f_mag / 2.0 + 1e-6;
        push_check(out, "cfc_continuity", step / delta, lipschitz, step <= lipschitz * delta + 1e-9);
    }
    {  // reference ODE: fixed point under constant input and Euler consistency
        Rng rng(8);
        LtcReference ref = LtcReference::make(6, 3, rng);
        std::vector<double> input = {0.4, -0.3, 0.9};
        std::vector<double> x(6, 0.0);
        for (int i = 0; i < 20000; ++i) x = ref.step(x, input, 0.05);
        const std::vector<double> f = ref.synapse(x, input);
        double residual = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            residual = std::max(residual,
                                std::abs(x[i] - ref.a[i] * f[i] / (ref.omega_tau[i] + f[i])));
        push_check(out, "ltc_fixed_point", residual, 1e-6, residual < 1e-6);

        std::vector<double> x0(6);
        for (double& v : x0) v = 0.3 * rng.normal();
        const std::vector<double> rhs = ref.derivative(x0, input);
        auto euler_err = [&](double dt) {
            const std::vector<double> x1 = ref.step(x0, input, dt);
            double err = 0.0;
            for (std::size_t i = 0; i < x0.size(); ++i)
                err = std::max(err, std::abs((x1[i] - x0[i]) / dt - rhs[i]));
            return err;
        };
        const double e1 = euler_err(1e-3), e2 = euler_err(1e-4);
        const double ratio = e1 / std::max(e2, 1e-300);
        const bool pass = ratio > 5.0 && ratio < 20.0 && e1 < 0.1;
        push_check(out, "ltc_euler_consistency", ratio, 10.0, pass);
    }
    {  // tracker properties on random weights
        Rng rng(3);
        const int q = 16, slots = 3, batch = 2;
        std::vector<TensorF> inputs;
        for (int s = 0; s < slots; ++s) {
            TensorF x({batch, 2, 4, 4});
            for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.normal());
            inputs.push_back(std::move(x));
        }
        double prob_violation = 0.0;
        double prefix_diff = 0.0;
        for (ModelKind kind : {ModelKind::lnn, ModelKind::lstm, ModelKind::ode_lstm}) {
            TrackerModelF model = TrackerModelF::build(kind, q, 12345);
            const auto probs = model.track(inputs, 0.4);
            for (const TensorF& p : probs)
                for (int b = 0; b < batch; ++b) {
                    double sum = 0.0;
                    for (int i = 0; i < q; ++i) {
                        const double v = p[static_cast<std::int64_t>(b) * q + i];
                        if (v <= 0.0 || v >= 1.0)
                            prob_violation = std::max(prob_violation, 1.0);
                        sum += v;
                    }
                    prob_violation = std::max(prob_violation, std::abs(sum - 1.0));
                }
            const std::vector<TensorF> shorter(inputs.begin(), inputs.begin() + 2);
            const auto probs_short = model.track(shorter, 0.4);
            for (std::size_t s = 0; s < probs_short.size(); ++s)
                for (std::int64_t i = 0; i < probs_short[s].numel(); ++i)
                    prefix_diff = std::max(prefix_diff,
                                           std::abs(static_cast<double>(probs_short[s][i]) -
                                                    probs[s][i]));
        }
        push_check(out, "tracker_probability_rows", prob_violation, 1e-6, prob_violation < 1e-6);
        push_check(out, "tracker_prefix_causality", prefix_diff, 0.0, prefix_diff == 0.0);

        // the plain LSTM output cannot depend on the prediction instant
        TrackerModelF lstm = TrackerModelF::build(ModelKind::lstm, q, 321);
        const auto p1 = lstm.track(inputs, 0.1);
        const auto p2 = lstm.track(inputs, 0.9);
        double lstm_diff = 0.0;
        for (std::size_t s = 0; s < p1.size(); ++s)
            for (std::int64_t i = 0; i < p1[s].numel(); ++i)
                lstm_diff = std::max(lstm_diff,
                                     std::abs(static_cast<double>(p1[s][i]) - p2[s][i]));
        push_check(out, "lstm_constant_in_instant", lstm_diff, 0.0, lstm_diff == 0.0);
    }
    {  // episode generation determinism and parallel equivalence
        SceneConfig cfg;
        cfg.n_antennas = 16;
        cfg.n_beams = 16;
        cfg.n_slots = 3;
        const std::vector<double> grid = {0.1, 0.5, 0.9};
        const Dataset d1 = generate_dataset(cfg, grid, 8, 99, 0, 1);
        const Dataset d2 = generate_dataset(cfg, grid, 8, 99, 0, 2);
        double diff = 0.0;
        for (std::size_t e = 0; e < d1.episodes.size(); ++e)
            for (std::size_t s = 0; s < d1.episodes[e].slots.size(); ++s) {
                const SlotRecord& a = d1.episodes[e].slots[s];
                const SlotRecord& b = d2.episodes[e].slots[s];
                for (std::size_t i = 0; i < a.pilot.size(); ++i)
                    diff = std::max(diff, static_cast<double>(std::abs(a.pilot[i] - b.pilot[i])));
                for (std::size_t gi = 0; gi < a.labels.size(); ++gi)
                    if (a.labels[gi].q_star != b.labels[gi].q_star) diff = std::max(diff, 1.0);
            }
        push_check(out, "parallel_generation_deterministic", diff, 0.0, diff == 0.0);
    }
    {  // normalized spectral efficiency is 1 for the oracle and inside [0,1] always
        SceneConfig cfg;
        cfg.n_antennas = 16;
        cfg.n_beams = 16;
        cfg.n_slots = 2;
        const std::vector<double> grid = {0.3, 0.7};
        const Dataset ds = generate_dataset(cfg, grid, 6, 5, 0, 1);
        PredictionTable oracle(ds.episodes.size());
        PredictionTable random_pred(ds.episodes.size());
        Rng rng(10);
        for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
            oracle[e].resize(static_cast<std::size_t>(ds.n_slots()));
            random_pred[e].resize(static_cast<std::size_t>(ds.n_slots()));
            for (int s = 0; s < ds.n_slots(); ++s)
                for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                    oracle[e][static_cast<std::size_t>(s)].push_back(
                        static_cast<int>(ds.episodes[e].slots[static_cast<std::size_t>(s)].labels[gi].q_star));
                    random_pred[e][static_cast<std::size_t>(s)].push_back(rng.uniform_int(0, 16));
                }
        }
        const EvalReport oracle_report = score_predictions(ds, oracle);
        const EvalReport random_report = score_predictions(ds, random_pred);
        double range_violation = 0.0;
        for (const auto& row : random_report.mean_sen)
            for (double v : row)
                if (v < 0.0 || v > 1.0) range_violation = std::max(range_violation, 1.0);
        push_check(out, "sen_oracle_is_one", std::abs(oracle_report.overall - 1.0), 1e-12,
                   std::abs(oracle_report.overall - 1.0) < 1e-12);
        push_check(out, "sen_range", range_violation, 0.0, range_violation == 0.0);
    }
    return out;
}

}  // namespace lbt
