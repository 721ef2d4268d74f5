// scratch: isolate whether full-model FD error is truncation or a bug
#include <cstdio>
#include <vector>

#include "liquidbeam/harness.hpp"

using namespace lbt;

int main() {
    const std::vector<double> grid = {0.2, 0.5, 0.8};
    Rng drng(0xDA7A);
    const int batch = 2, slots = 2, q = 16;
    std::vector<TensorD> inputs;
    for (int s = 0; s < slots; ++s) {
        TensorD x({batch, 2, 4, 4});
        for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = drng.normal();
        inputs.push_back(std::move(x));
    }
    std::vector<std::vector<std::vector<int>>> labels(grid.size(),
                                                      std::vector<std::vector<int>>(slots));
    for (auto& per_slot : labels)
        for (auto& row : per_slot) {
            row.resize(batch);
            for (int b = 0; b < batch; ++b) row[b] = drng.uniform_int(0, q);
        }

    for (ModelKind kind : {ModelKind::lnn, ModelKind::ode_lstm}) {
        TrackerModelD model = TrackerModelD::build(kind, q, 99);
        auto build = [&](Graph<double>& g) {
            auto bound = model.bind(g);
            std::vector<Graph<double>::Id> feats;
            for (const TensorD& x : inputs)
                feats.push_back(model.features(g, bound, g.input(x), true));
            return model.episode_loss(g, feats, labels, grid, bound);
        };
        auto params = model.named_params();
        for (const auto& p : params) p.tensor->zero_grad();
        {
            Graph<double> g;
            g.backward(build(g));
        }
        auto loss = [&]() {
            Graph<double> g;
            return static_cast<double>(g.value(build(g))[0]);
        };
        for (double eps : {1e-5, 1e-6, 3e-7}) {
            FdOptions opt;
            opt.samples_per_block = 4;
            opt.eps = eps;
            std::vector<FdBlockResult> blocks;
            const double worst = fd_max_rel_err<double>(loss, params, opt, &blocks);
            std::printf("%s eps=%g worst=%.3g", to_string(kind).c_str(), eps, worst);
            for (const auto& b : blocks)
                if (b.max_rel_err > 1e-4) std::printf(" [%s %.2g]", b.name.c_str(), b.max_rel_err);
            std::printf("\n");
        }
        // directional derivative: perturb every parameter along one direction
        Rng dir_rng(55);
        std::vector<std::vector<double>> dirs;
        double dot = 0.0;
        for (const auto& p : params) {
            std::vector<double> d(p.tensor->numel());
            for (auto& v : d) v = dir_rng.normal();
            const auto& g = p.tensor->grad();
            for (std::size_t i = 0; i < d.size(); ++i) dot += d[i] * g[i];
            dirs.push_back(std::move(d));
        }
        auto shift = [&](double a) {
            for (std::size_t pi = 0; pi < params.size(); ++pi)
                for (std::int64_t i = 0; i < params[pi].tensor->numel(); ++i)
                    (*params[pi].tensor)[i] += a * dirs[pi][i];
        };
        for (double h : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
            shift(h);
            const double up = loss();
            shift(-2 * h);
            const double down = loss();
            shift(h);
            const double fd = (up - down) / (2 * h);
            std::printf("%s directional h=%g: fd=%.10g ad=%.10g rel=%.3g\n",
                        to_string(kind).c_str(), h, fd, dot,
                        std::abs(fd - dot) / std::max(std::abs(fd), std::abs(dot)));
        }
    }
    return 0;
}
