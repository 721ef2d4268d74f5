#pragma once

// Continuous-time recurrent core: a closed-form cell whose sigmoid gate is
// driven by a learned liquid time constant times the normalized instant, plus
// an explicit Euler reference stepper for the underlying leak/synapse ODE the
// closed form approximates.

#include <cstdint>
#include <vector>

#include "liquidbeam/tensor.hpp"

namespace lbt {

enum class InitKind { kaiming_uniform, xavier_uniform, zeros };

// One fully connected layer with its own weight/bias tensors.
template <class T>
struct LinearLayer {
    Tensor<T> w;  // [out, in]
    Tensor<T> b;  // [out]

    void init(int in_dim, int out_dim, InitKind kind, Rng& rng);
    typename Graph<T>::Id apply(Graph<T>& g, typename Graph<T>::Id x) const;
    std::int64_t param_count() const { return w.numel() + b.numel(); }
};

// Shared backbone with Tanh, branching into the gate head (no activation)
// and two Tanh response heads. Hidden dimension is fixed by construction.
template <class T>
struct CfcCell {
    LinearLayer<T> backbone;  // [feature+hidden -> backbone_dim], Tanh
    LinearLayer<T> head_f;    // gate logits, no activation
    LinearLayer<T> head_g;    // Tanh
    LinearLayer<T> head_h;    // Tanh

    int feature_dim = 0;
    int hidden_dim = 0;
    int backbone_dim = 0;

    struct Bound {
        typename Graph<T>::Id backbone_w, backbone_b, f_w, f_b, g_w, g_b, h_w, h_b;
    };

    void init(int feature_dim_, int hidden_dim_, int backbone_dim_, Rng& rng);

    Bound bind(Graph<T>& g);

    // One recurrence step at normalized instant tbar in [0, 1]:
    //   z    = tanh(backbone([feat, h_prev]))
    //   gate = sigmoid(-f(z) * tbar)
    //   out  = gate (.) tanh(g(z)) + (1 - gate) (.) tanh(h(z))
    typename Graph<T>::Id forward(Graph<T>& g, const Bound& bound, typename Graph<T>::Id feat,
                                  typename Graph<T>::Id h_prev, double tbar) const;

    // Convenience overload that binds its own parameter nodes.
    typename Graph<T>::Id forward(Graph<T>& g, typename Graph<T>::Id feat,
                                  typename Graph<T>::Id h_prev, double tbar);

    void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out);
    std::int64_t param_count() const {
        return backbone.param_count() + head_f.param_count() + head_g.param_count() +
               head_h.param_count();
    }
};

// Reference integrator for the leak/synapse ODE
//   x' = -(omega_tau + f(x, i)) (.) x + a (.) f(x, i)
// with f a single sigmoid-output layer (so f >= 0). Untrained; used to pin
// down the dynamics the closed-form cell approximates.
struct LtcReference {
    std::vector<double> omega_tau;  // per-neuron leak rates, > 0
    std::vector<double> a;          // reversal potentials
    std::vector<double> fw;         // f layer weight [D, D+M] row-major
    std::vector<double> fb;         // f layer bias [D]
    int state_dim = 0;
    int input_dim = 0;

    static LtcReference make(int state_dim, int input_dim, Rng& rng);

    // f(x, i) elementwise in (0, 1).
    std::vector<double> synapse(const std::vector<double>& x,
                                const std::vector<double>& input) const;

    // Semi-implicit (fused) Euler step:
    //   x <- (x + dt * a (.) f) / (1 + dt * (omega_tau + f))
    std::vector<double> step(const std::vector<double>& x, const std::vector<double>& input,
                             double dt) const;

    // Right-hand side of the ODE, for consistency checks.
    std::vector<double> derivative(const std::vector<double>& x,
                                   const std::vector<double>& input) const;
};

}  // namespace lbt
