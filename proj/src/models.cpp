#include "liquidbeam/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lbt {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::lnn: return "lnn";
        case ModelKind::lstm: return "lstm";
        case ModelKind::ode_lstm: return "ode-lstm";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "lnn") return ModelKind::lnn;
    if (name == "lstm") return ModelKind::lstm;
    if (name == "ode-lstm" || name == "ode_lstm") return ModelKind::ode_lstm;
    throw config_error("unknown model kind '" + name + "' (expected lnn | lstm | ode-lstm)");
}

template <class T>
void ConvLayer<T>::init(int in_ch, int out_ch, Rng& rng) {
    k = Tensor<T>({out_ch, in_ch, 3, 3});
    b = Tensor<T>({out_ch});
    const double bound = std::sqrt(6.0 / (in_ch * 9));
    for (std::int64_t i = 0; i < k.numel(); ++i) k[i] = static_cast<T>(rng.uniform(-bound, bound));
    k.set_requires_grad(true);
    b.set_requires_grad(true);
}

template <class T>
void BatchNormLayer<T>::init(int channels) {
    gamma = Tensor<T>::full({channels}, T(1));
    beta = Tensor<T>({channels});
    gamma.set_requires_grad(true);
    beta.set_requires_grad(true);
    state.init(channels);
}

namespace {
int conv_out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}
}  // namespace

template <class T>
void FeatureExtractor<T>::init(int grid_, Rng& rng) {
    audit(grid_);
    grid = grid_;
    bn1.init(2);
    conv1.init(2, kConvMidChannels, rng);
    bn2.init(kConvMidChannels);
    conv2.init(kConvMidChannels, kFeatureDim, rng);
    bn3.init(kFeatureDim);
    conv3.init(kFeatureDim, kFeatureDim, rng);
    bn4.init(kFeatureDim);
}

template <class T>
void FeatureExtractor<T>::audit(int grid_) {
    int extent = grid_;
    for (int layer = 0; layer < 3; ++layer) {
        extent = conv_out_extent(extent, 3, 3, 1);
        if (extent <= 0)
            throw config_error("feature extractor: conv stage " + std::to_string(layer + 1) +
                               " collapses a " + std::to_string(grid_) +
                               "x" + std::to_string(grid_) + " input grid");
    }
}

template <class T>
typename FeatureExtractor<T>::Bound FeatureExtractor<T>::bind(Graph<T>& g) {
    return Bound{g.param(bn1.gamma), g.param(bn1.beta),  g.param(conv1.k), g.param(conv1.b),
                 g.param(bn2.gamma), g.param(bn2.beta),  g.param(conv2.k), g.param(conv2.b),
                 g.param(bn3.gamma), g.param(bn3.beta),  g.param(conv3.k), g.param(conv3.b),
                 g.param(bn4.gamma), g.param(bn4.beta)};
}

template <class T>
typename Graph<T>::Id FeatureExtractor<T>::forward(Graph<T>& g, const Bound& bd,
                                                   typename Graph<T>::Id x, bool train) {
    auto h = g.batchnorm2d(x, bd.bn1_g, bd.bn1_b, bn1.state, train);
    h = g.relu(g.conv2d(h, bd.c1_k, bd.c1_b, conv1.stride, conv1.pad));
    h = g.batchnorm2d(h, bd.bn2_g, bd.bn2_b, bn2.state, train);
    h = g.relu(g.conv2d(h, bd.c2_k, bd.c2_b, conv2.stride, conv2.pad));
    h = g.batchnorm2d(h, bd.bn3_g, bd.bn3_b, bn3.state, train);
    h = g.relu(g.conv2d(h, bd.c3_k, bd.c3_b, conv3.stride, conv3.pad));
    h = g.batchnorm2d(h, bd.bn4_g, bd.bn4_b, bn4.state, train);
    return g.avgpool_global(h);
}

template <class T>
void FeatureExtractor<T>::collect_params(std::vector<NamedParam<T>>& out) {
    auto bn = [&out](const std::string& name, BatchNormLayer<T>& layer) {
        out.push_back({"extractor." + name + ".gamma", &layer.gamma, true});
        out.push_back({"extractor." + name + ".beta", &layer.beta, true});
    };
    auto conv = [&out](const std::string& name, ConvLayer<T>& layer) {
        out.push_back({"extractor." + name + ".k", &layer.k, true});
        out.push_back({"extractor." + name + ".b", &layer.b, true});
    };
    bn("bn1", bn1);
    conv("conv1", conv1);
    bn("bn2", bn2);
    conv("conv2", conv2);
    bn("bn3", bn3);
    conv("conv3", conv3);
    bn("bn4", bn4);
}

template <class T>
void LstmCell<T>::init(int feature_dim_, int hidden_dim_, Rng& rng) {
    feature_dim = feature_dim_;
    hidden_dim = hidden_dim_;
    const int joint = feature_dim + hidden_dim;
    wi.init(joint, hidden_dim, InitKind::xavier_uniform, rng);
    wf.init(joint, hidden_dim, InitKind::xavier_uniform, rng);
    wg.init(joint, hidden_dim, InitKind::xavier_uniform, rng);
    wo.init(joint, hidden_dim, InitKind::xavier_uniform, rng);
    // forget gate bias starts open
    for (std::int64_t i = 0; i < wf.b.numel(); ++i) wf.b[i] = T(1);
}

template <class T>
typename LstmCell<T>::Bound LstmCell<T>::bind(Graph<T>& g) {
    return Bound{g.param(wi.w), g.param(wi.b), g.param(wf.w), g.param(wf.b),
                 g.param(wg.w), g.param(wg.b), g.param(wo.w), g.param(wo.b)};
}

template <class T>
typename LstmCell<T>::State LstmCell<T>::forward(Graph<T>& g, const Bound& bd,
                                                 typename Graph<T>::Id feat,
                                                 const State& prev) const {
    const auto joint = g.concat({feat, prev.h}, 1);
    const auto i_gate = g.sigmoid(g.linear(joint, bd.wi_w, bd.wi_b));
    const auto f_gate = g.sigmoid(g.linear(joint, bd.wf_w, bd.wf_b));
    const auto cand = g.tanh(g.linear(joint, bd.wg_w, bd.wg_b));
    const auto o_gate = g.sigmoid(g.linear(joint, bd.wo_w, bd.wo_b));
    const auto c_next = g.add(g.mul(f_gate, prev.c), g.mul(i_gate, cand));
    const auto h_next = g.mul(o_gate, g.tanh(c_next));
    return State{h_next, c_next};
}

template <class T>
void LstmCell<T>::collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) {
    auto gate = [&](const std::string& name, LinearLayer<T>& layer) {
        out.push_back({prefix + "." + name + ".w", &layer.w, true});
        out.push_back({prefix + "." + name + ".b", &layer.b, true});
    };
    gate("wi", wi);
    gate("wf", wf);
    gate("wg", wg);
    gate("wo", wo);
}

template <class T>
void OdeLstmCell<T>::init(int feature_dim, int hidden_dim, Rng& rng) {
    lstm.init(feature_dim, hidden_dim, rng);
    d.init(hidden_dim, hidden_dim, InitKind::xavier_uniform, rng);
}

template <class T>
typename OdeLstmCell<T>::Bound OdeLstmCell<T>::bind(Graph<T>& g) {
    return Bound{lstm.bind(g), g.param(d.w), g.param(d.b)};
}

template <class T>
typename Graph<T>::Id OdeLstmCell<T>::evolve(Graph<T>& g, const Bound& bd,
                                             typename Graph<T>::Id h, double tbar) const {
    if (tbar == 0.0) return h;  // zero integration window
    const T dt = static_cast<T>(tbar / kOdeEulerSteps);
    for (int s = 0; s < kOdeEulerSteps; ++s) {
        const auto deriv = g.tanh(g.linear(h, bd.d_w, bd.d_b));
        h = g.add(h, g.affine(deriv, dt, T(0)));
    }
    return h;
}

template <class T>
void OdeLstmCell<T>::collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) {
    lstm.collect_params(prefix + ".lstm", out);
    out.push_back({prefix + ".d.w", &d.w, true});
    out.push_back({prefix + ".d.b", &d.b, true});
}

template <class T>
TrackerModel<T> TrackerModel<T>::build(ModelKind kind, int q_beams, std::uint64_t seed) {
    const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(q_beams))));
    if (grid * grid != q_beams)
        throw config_error("model: beam count " + std::to_string(q_beams) +
                           " is not a perfect square; cannot form the pilot grid");
    TrackerModel m;
    m.kind_ = kind;
    m.q_beams_ = q_beams;
    m.grid_ = grid;
    Rng rng(seed);
    m.extractor_.init(grid, rng);
    switch (kind) {
        case ModelKind::lnn:
            m.cfc_.init(kFeatureDim, kHiddenDim, kBackboneDim, rng);
            break;
        case ModelKind::lstm:
            m.lstm_.init(kFeatureDim, kHiddenDim, rng);
            break;
        case ModelKind::ode_lstm:
            m.ode_.init(kFeatureDim, kHiddenDim, rng);
            break;
    }
    m.output_.init(kHiddenDim, q_beams, InitKind::xavier_uniform, rng);
    return m;
}

template <class T>
std::vector<NamedParam<T>> TrackerModel<T>::named_params() {
    std::vector<NamedParam<T>> out;
    extractor_.collect_params(out);
    switch (kind_) {
        case ModelKind::lnn:
            cfc_.collect_params("lnn", out);
            break;
        case ModelKind::lstm:
            lstm_.collect_params("lstm", out);
            break;
        case ModelKind::ode_lstm:
            ode_.collect_params("odelstm", out);
            break;
    }
    out.push_back({"output.fc.w", &output_.w, true});
    out.push_back({"output.fc.b", &output_.b, true});
    return out;
}

template <class T>
std::vector<Tensor<T>*> TrackerModel<T>::trainable_tensors() {
    std::vector<Tensor<T>*> out;
    for (const NamedParam<T>& p : named_params())
        if (p.trainable) out.push_back(p.tensor);
    return out;
}

template <class T>
std::int64_t TrackerModel<T>::extractor_param_count() {
    std::int64_t n = 0;
    for (const NamedParam<T>& p : named_params())
        if (p.name.rfind("extractor.", 0) == 0) n += p.tensor->numel();
    return n;
}

template <class T>
std::int64_t TrackerModel<T>::output_param_count() {
    std::int64_t n = 0;
    for (const NamedParam<T>& p : named_params())
        if (p.name.rfind("output.", 0) == 0) n += p.tensor->numel();
    return n;
}

template <class T>
typename TrackerModel<T>::Bound TrackerModel<T>::bind(Graph<T>& g) {
    Bound bd{};
    bd.fe = extractor_.bind(g);
    switch (kind_) {
        case ModelKind::lnn:
            bd.cfc = cfc_.bind(g);
            break;
        case ModelKind::lstm:
            bd.lstm = lstm_.bind(g);
            break;
        case ModelKind::ode_lstm:
            bd.ode = ode_.bind(g);
            break;
    }
    bd.out_w = g.param(output_.w);
    bd.out_b = g.param(output_.b);
    return bd;
}

template <class T>
typename TrackerModel<T>::CellState TrackerModel<T>::initial_state(Graph<T>& g, int batch) const {
    CellState st;
    st.h = g.input(Tensor<T>({batch, kHiddenDim}));
    if (kind_ != ModelKind::lnn) st.c = g.input(Tensor<T>({batch, kHiddenDim}));
    return st;
}

template <class T>
typename Graph<T>::Id TrackerModel<T>::features(Graph<T>& g, const Bound& bd,
                                                typename Graph<T>::Id x, bool train) {
    return extractor_.forward(g, bd.fe, x, train);
}

template <class T>
typename TrackerModel<T>::StepOut TrackerModel<T>::step(Graph<T>& g, const Bound& bd,
                                                        typename Graph<T>::Id feat,
                                                        const CellState& prev, double tbar) const {
    StepOut out;
    switch (kind_) {
        case ModelKind::lnn: {
            const auto h = cfc_.forward(g, bd.cfc, feat, prev.h, tbar);
            out.state.h = h;
            out.output_h = h;
            break;
        }
        case ModelKind::lstm: {
            const auto next = lstm_.forward(g, bd.lstm, feat, {prev.h, prev.c});
            out.state = CellState{next.h, next.c};
            out.output_h = next.h;
            break;
        }
        case ModelKind::ode_lstm: {
            if (!(tbar >= 0.0 && tbar <= 1.0))
                throw std::domain_error("track: normalized instant " + std::to_string(tbar) +
                                        " outside [0,1]");
            const auto next = ode_.lstm.forward(g, bd.ode.lstm, feat, {prev.h, prev.c});
            out.state = CellState{next.h, next.c};
            out.output_h = ode_.evolve(g, bd.ode, next.h, tbar);
            break;
        }
    }
    return out;
}

template <class T>
typename Graph<T>::Id TrackerModel<T>::logits(Graph<T>& g, const Bound& bd,
                                              typename Graph<T>::Id h) const {
    return g.linear(h, bd.out_w, bd.out_b);
}

template <class T>
std::vector<Tensor<T>> TrackerModel<T>::track(const std::vector<Tensor<T>>& slot_inputs,
                                              double tbar) {
    if (slot_inputs.empty()) throw data_error("track: empty slot history");
    Graph<T> g;
    Bound bd = bind(g);
    const int batch = slot_inputs[0].dim(0);
    CellState state = initial_state(g, batch);
    std::vector<Tensor<T>> out;
    out.reserve(slot_inputs.size());
    for (const Tensor<T>& x : slot_inputs) {
        const auto feat = features(g, bd, g.input(x), /*train=*/false);
        const StepOut so = step(g, bd, feat, state, tbar);
        state = so.state;
        out.push_back(g.value(g.softmax(logits(g, bd, so.output_h))));
    }
    return out;
}

template <class T>
typename Graph<T>::Id TrackerModel<T>::episode_loss(
    Graph<T>& g, const std::vector<typename Graph<T>::Id>& feats,
    const std::vector<std::vector<std::vector<int>>>& labels, const std::vector<double>& tbar_grid,
    const Bound& bd) {
    if (feats.empty()) throw data_error("episode_loss: no slot features");
    if (labels.size() != tbar_grid.size())
        throw data_error("episode_loss: label rows do not match the instant grid");
    const int batch = g.value(feats[0]).dim(0);
    typename Graph<T>::Id total = -1;
    for (std::size_t gi = 0; gi < tbar_grid.size(); ++gi) {
        if (labels[gi].size() != feats.size())
            throw data_error("episode_loss: missing labels for slot under instant index " +
                             std::to_string(gi));
        CellState state = initial_state(g, batch);
        for (std::size_t s = 0; s < feats.size(); ++s) {
            const StepOut so = step(g, bd, feats[s], state, tbar_grid[gi]);
            state = so.state;
            const auto term = g.softmax_cross_entropy(logits(g, bd, so.output_h), labels[gi][s]);
            total = (total < 0) ? term : g.add(total, term);
        }
    }
    return g.affine(total, static_cast<T>(1.0 / tbar_grid.size()), T(0));
}

template <class T>
int select_beam(const Tensor<T>& prob_row) {
    const std::int64_t n = prob_row.numel();
    int best = 0;
    for (std::int64_t i = 1; i < n; ++i)
        if (prob_row[i] > prob_row[best]) best = static_cast<int>(i);
    return best;
}

template <class T>
void pilot_to_grid(const float* interleaved, int q_beams, T* out) {
    for (int q = 0; q < q_beams; ++q) {
        out[q] = static_cast<T>(interleaved[2 * q]);                // real channel
        out[q_beams + q] = static_cast<T>(interleaved[2 * q + 1]);  // imaginary channel
    }
}

namespace {

const char* kKindBlock = "model.kind";

}  // namespace

template <class T>
void TrackerModel<T>::save(const std::string& path) const {
    auto& self = const_cast<TrackerModel<T>&>(*this);
    std::vector<NamedParam<T>> blocks = self.named_params();

    // Running statistics and the kind tag ride along as extra blocks. They
    // are materialized into `extra` first so the registered pointers stay
    // stable while write_checkpoint runs.
    std::vector<std::pair<std::string, Tensor<T>>> extra;
    auto push_state = [&extra](const std::string& name, BatchNormLayer<T>& layer) {
        extra.emplace_back(name + ".running_mean",
                           Tensor<T>::from({static_cast<int>(layer.state.running_mean.size())},
                                           layer.state.running_mean));
        extra.emplace_back(name + ".running_var",
                           Tensor<T>::from({static_cast<int>(layer.state.running_var.size())},
                                           layer.state.running_var));
    };
    push_state("extractor.bn1", self.extractor_.bn1);
    push_state("extractor.bn2", self.extractor_.bn2);
    push_state("extractor.bn3", self.extractor_.bn3);
    push_state("extractor.bn4", self.extractor_.bn4);
    extra.emplace_back(kKindBlock,
                       Tensor<T>::from({1}, {static_cast<T>(static_cast<int>(kind_))}));
    for (auto& [name, tensor] : extra) blocks.push_back({name, &tensor, false});
    write_checkpoint(path, blocks);
}

template <class T>
TrackerModel<T> TrackerModel<T>::load(const std::string& path) {
    const auto blocks = read_checkpoint(path);
    std::map<std::string, const TensorF*> by_name;
    for (const auto& [name, tensor] : blocks) by_name[name] = &tensor;

    const auto kind_it = by_name.find(kKindBlock);
    if (kind_it == by_name.end()) throw format_error("checkpoint missing model.kind block");
    const ModelKind kind = static_cast<ModelKind>(static_cast<int>((*kind_it->second)[0]));
    const auto out_it = by_name.find("output.fc.w");
    if (out_it == by_name.end()) throw format_error("checkpoint missing output layer");
    const int q = out_it->second->dim(0);

    TrackerModel m = build(kind, q, /*seed=*/0);
    for (NamedParam<T>& p : m.named_params()) {
        const auto it = by_name.find(p.name);
        if (it == by_name.end()) throw format_error("checkpoint missing block " + p.name);
        if (it->second->shape() != p.tensor->shape())
            throw format_error("checkpoint block " + p.name + " has unexpected shape");
        for (std::int64_t i = 0; i < p.tensor->numel(); ++i)
            (*p.tensor)[i] = static_cast<T>((*it->second)[i]);
    }
    auto load_stat = [&by_name, &path](const std::string& block, std::vector<T>& dst) {
        const auto it = by_name.find(block);
        if (it == by_name.end())
            throw format_error("checkpoint " + path + " missing block " + block);
        if (it->second->numel() != static_cast<std::int64_t>(dst.size()))
            throw format_error("checkpoint block " + block + " has unexpected shape");
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] = static_cast<T>((*it->second)[static_cast<std::int64_t>(i)]);
    };
    auto load_bn = [&load_stat](const std::string& name, BatchNormLayer<T>& layer) {
        load_stat(name + ".running_mean", layer.state.running_mean);
        load_stat(name + ".running_var", layer.state.running_var);
    };
    load_bn("extractor.bn1", m.extractor_.bn1);
    load_bn("extractor.bn2", m.extractor_.bn2);
    load_bn("extractor.bn3", m.extractor_.bn3);
    load_bn("extractor.bn4", m.extractor_.bn4);
    return m;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template struct BatchNormLayer<float>;
template struct BatchNormLayer<double>;
template struct FeatureExtractor<float>;
template struct FeatureExtractor<double>;
template struct LstmCell<float>;
template struct LstmCell<double>;
template struct OdeLstmCell<float>;
template struct OdeLstmCell<double>;
template class TrackerModel<float>;
template class TrackerModel<double>;
template int select_beam<float>(const TensorF&);
template int select_beam<double>(const TensorD&);
template void pilot_to_grid<float>(const float*, int, float*);
template void pilot_to_grid<double>(const float*, int, double*);

}  // namespace lbt
