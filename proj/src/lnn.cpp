#include "liquidbeam/lnn.hpp"

#include <cmath>
#include <stdexcept>

namespace lbt {

template <class T>
void LinearLayer<T>::init(int in_dim, int out_dim, InitKind kind, Rng& rng) {
    w = Tensor<T>({out_dim, in_dim});
    b = Tensor<T>({out_dim});
    double bound = 0.0;
    switch (kind) {
        case InitKind::kaiming_uniform:
            bound = std::sqrt(6.0 / in_dim);
            break;
        case InitKind::xavier_uniform:
            bound = std::sqrt(6.0 / (in_dim + out_dim));
            break;
        case InitKind::zeros:
            bound = 0.0;
            break;
    }
    for (std::int64_t i = 0; i < w.numel(); ++i)
        w[i] = static_cast<T>(bound == 0.0 ? 0.0 : rng.uniform(-bound, bound));
    w.set_requires_grad(true);
    b.set_requires_grad(true);
}

template <class T>
typename Graph<T>::Id LinearLayer<T>::apply(Graph<T>& g, typename Graph<T>::Id x) const {
    auto& self = const_cast<LinearLayer<T>&>(*this);
    return g.linear(x, g.param(self.w), g.param(self.b));
}

template <class T>
void CfcCell<T>::init(int feature_dim_, int hidden_dim_, int backbone_dim_, Rng& rng) {
    feature_dim = feature_dim_;
    hidden_dim = hidden_dim_;
    backbone_dim = backbone_dim_;
    backbone.init(feature_dim + hidden_dim, backbone_dim, InitKind::xavier_uniform, rng);
    head_f.init(backbone_dim, hidden_dim, InitKind::xavier_uniform, rng);
    head_g.init(backbone_dim, hidden_dim, InitKind::xavier_uniform, rng);
    head_h.init(backbone_dim, hidden_dim, InitKind::xavier_uniform, rng);
}

template <class T>
typename CfcCell<T>::Bound CfcCell<T>::bind(Graph<T>& g) {
    return Bound{g.param(backbone.w), g.param(backbone.b), g.param(head_f.w), g.param(head_f.b),
                 g.param(head_g.w),   g.param(head_g.b),   g.param(head_h.w), g.param(head_h.b)};
}

template <class T>
typename Graph<T>::Id CfcCell<T>::forward(Graph<T>& g, const Bound& bd,
                                          typename Graph<T>::Id feat,
                                          typename Graph<T>::Id h_prev, double tbar) const {
    if (!(tbar >= 0.0 && tbar <= 1.0))
        throw std::domain_error("cfc_forward: normalized instant " + std::to_string(tbar) +
                                " outside [0,1]");
    const auto joint = g.concat({feat, h_prev}, 1);
    const auto z = g.tanh(g.linear(joint, bd.backbone_w, bd.backbone_b));
    const auto f_logit = g.linear(z, bd.f_w, bd.f_b);
    const auto gate = g.sigmoid(g.affine(f_logit, static_cast<T>(-tbar), T(0)));
    const auto g_branch = g.tanh(g.linear(z, bd.g_w, bd.g_b));
    const auto h_branch = g.tanh(g.linear(z, bd.h_w, bd.h_b));
    const auto inv_gate = g.affine(gate, T(-1), T(1));
    return g.add(g.mul(gate, g_branch), g.mul(inv_gate, h_branch));
}

template <class T>
typename Graph<T>::Id CfcCell<T>::forward(Graph<T>& g, typename Graph<T>::Id feat,
                                          typename Graph<T>::Id h_prev, double tbar) {
    return forward(g, bind(g), feat, h_prev, tbar);
}

template <class T>
void CfcCell<T>::collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out) {
    out.push_back({prefix + ".backbone.w", &backbone.w, true});
    out.push_back({prefix + ".backbone.b", &backbone.b, true});
    out.push_back({prefix + ".head_f.w", &head_f.w, true});
    out.push_back({prefix + ".head_f.b", &head_f.b, true});
    out.push_back({prefix + ".head_g.w", &head_g.w, true});
    out.push_back({prefix + ".head_g.b", &head_g.b, true});
    out.push_back({prefix + ".head_h.w", &head_h.w, true});
    out.push_back({prefix + ".head_h.b", &head_h.b, true});
}

LtcReference LtcReference::make(int state_dim, int input_dim, Rng& rng) {
    LtcReference ref;
    ref.state_dim = state_dim;
    ref.input_dim = input_dim;
    ref.omega_tau.resize(static_cast<std::size_t>(state_dim));
    ref.a.resize(static_cast<std::size_t>(state_dim));
    for (int i = 0; i < state_dim; ++i) {
        ref.omega_tau[static_cast<std::size_t>(i)] = rng.uniform(0.5, 2.0);
        ref.a[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
    }
    const int in = state_dim + input_dim;
    const double bound = std::sqrt(6.0 / (in + state_dim));
    ref.fw.resize(static_cast<std::size_t>(state_dim) * in);
    ref.fb.resize(static_cast<std::size_t>(state_dim));
    for (double& v : ref.fw) v = rng.uniform(-bound, bound);
    for (double& v : ref.fb) v = rng.uniform(-0.1, 0.1);
    return ref;
}

std::vector<double> LtcReference::synapse(const std::vector<double>& x,
                                          const std::vector<double>& input) const {
    const int in = state_dim + input_dim;
    std::vector<double> f(static_cast<std::size_t>(state_dim));
    for (int r = 0; r < state_dim; ++r) {
        double acc = fb[static_cast<std::size_t>(r)];
        const double* row = fw.data() + static_cast<std::size_t>(r) * in;
        for (int c = 0; c < state_dim; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
        for (int c = 0; c < input_dim; ++c)
            acc += row[state_dim + c] * input[static_cast<std::size_t>(c)];
        f[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(-acc));
    }
    return f;
}

std::vector<double> LtcReference::step(const std::vector<double>& x,
                                       const std::vector<double>& input, double dt) const {
    if (dt <= 0.0) throw config_error("ltc step: dt must be positive");
    const std::vector<double> f = synapse(x, input);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (x[i] + dt * a[i] * f[i]) / (1.0 + dt * (omega_tau[i] + f[i]));
    return out;
}

std::vector<double> LtcReference::derivative(const std::vector<double>& x,
                                             const std::vector<double>& input) const {
    const std::vector<double> f = synapse(x, input);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = -(omega_tau[i] + f[i]) * x[i] + a[i] * f[i];
    return out;
}

template struct LinearLayer<float>;
template struct LinearLayer<double>;
template struct CfcCell<float>;
template struct CfcCell<double>;

}  // namespace lbt
