#include "liquidbeam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace lbt {

namespace {

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// y[0..n) += a * x[0..n). The workhorse behind every matmul-shaped op; the
// elementwise form keeps the accumulation order fixed and lets the compiler
// vectorize without reassociation.
template <class T>
inline void axpy(std::int64_t n, T a, const T* x, T* y) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

std::int64_t prod(const std::vector<int>& s, int lo, int hi) {
    std::int64_t p = 1;
    for (int i = lo; i < hi; ++i) p *= s[static_cast<std::size_t>(i)];
    return p;
}

}  // namespace

template <class T>
typename Graph<T>::Id Graph<T>::push(Node n) {
    if (check_finite) assert_finite(n.value, "op output");
    nodes_.push_back(std::move(n));
    spent_ = false;
    return static_cast<Id>(nodes_.size()) - 1;
}

template <class T>
void Graph<T>::assert_finite(const Tensor<T>& t, const char* what) const {
    for (std::int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(static_cast<double>(t[i])))
            throw numeric_error(std::string("non-finite value in ") + what);
}

template <class T>
typename Graph<T>::Id Graph<T>::input(Tensor<T> value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.needs_grad = false;
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::param(Tensor<T>& bound) {
    Node n;
    n.op = Op::leaf;
    n.value = bound;  // snapshot; the step's forward works on this copy
    n.needs_grad = bound.requires_grad();
    n.bound = &bound;
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::linear(Id x, Id w, Id b) {
    const Tensor<T>& xv = at(x).value;
    const Tensor<T>& wv = at(w).value;
    const Tensor<T>& bv = at(b).value;
    if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != wv.dim(1) ||
        bv.dim(0) != wv.dim(0))
        throw dim_error("linear: incompatible shapes x=" + shape_str(xv.shape()) +
                        " w=" + shape_str(wv.shape()) + " b=" + shape_str(bv.shape()));
    const int B = xv.dim(0), I = xv.dim(1), O = wv.dim(0);

    Node n;
    n.op = Op::linear;
    n.in = {x, w, b};
    n.needs_grad = at(x).needs_grad || at(w).needs_grad || at(b).needs_grad;
    n.value = Tensor<T>({B, O});

    // Transpose W once so the inner loop streams contiguously over outputs.
    std::vector<T> wt(static_cast<std::size_t>(I) * O);
    for (int o = 0; o < O; ++o)
        for (int i = 0; i < I; ++i) wt[static_cast<std::size_t>(i) * O + o] = wv[o * I + i];
    T* y = n.value.data();
    for (int row = 0; row < B; ++row) {
        T* yr = y + static_cast<std::int64_t>(row) * O;
        for (int o = 0; o < O; ++o) yr[o] = bv[o];
        const T* xr = xv.data() + static_cast<std::int64_t>(row) * I;
        for (int i = 0; i < I; ++i) axpy<T>(O, xr[i], wt.data() + static_cast<std::size_t>(i) * O, yr);
    }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::conv2d(Id x, Id k, Id b, int stride, int pad) {
    const Tensor<T>& xv = at(x).value;
    const Tensor<T>& kv = at(k).value;
    const Tensor<T>& bv = at(b).value;
    if (xv.rank() != 4 || kv.rank() != 4 || bv.rank() != 1)
        throw dim_error("conv2d: expected x rank 4, k rank 4, b rank 1");
    if (kv.dim(1) != xv.dim(1) || bv.dim(0) != kv.dim(0))
        throw dim_error("conv2d: channel mismatch x=" + shape_str(xv.shape()) +
                        " k=" + shape_str(kv.shape()));
    if (stride < 1 || pad < 0) throw config_error("conv2d: stride must be >=1 and pad >=0");
    const int B = xv.dim(0), Cin = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int Cout = kv.dim(0), KH = kv.dim(2), KW = kv.dim(3);
    const int OH = (H + 2 * pad - KH) / stride + 1;
    const int OW = (W + 2 * pad - KW) / stride + 1;
    if (H + 2 * pad < KH || W + 2 * pad < KW || OH <= 0 || OW <= 0)
        throw config_error("conv2d: non-positive output size for input " + shape_str(xv.shape()) +
                           " kernel " + shape_str(kv.shape()) + " stride " +
                           std::to_string(stride) + " pad " + std::to_string(pad));

    Node n;
    n.op = Op::conv2d;
    n.in = {x, k, b};
    n.i0 = stride;
    n.i1 = pad;
    n.needs_grad = at(x).needs_grad || at(k).needs_grad || at(b).needs_grad;
    n.value = Tensor<T>({B, Cout, OH, OW});

    const int P = OH * OW;
    const int J = Cin * KH * KW;
    // Kernel transposed to [J, Cout] so accumulation streams over Cout.
    std::vector<T> kt(static_cast<std::size_t>(J) * Cout);
    for (int co = 0; co < Cout; ++co)
        for (int j = 0; j < J; ++j) kt[static_cast<std::size_t>(j) * Cout + co] = kv[co * J + j];

    std::vector<T> cols(static_cast<std::size_t>(P) * J);
    std::vector<T> tmp(static_cast<std::size_t>(P) * Cout);
    for (int bi = 0; bi < B; ++bi) {
        const T* xb = xv.data() + static_cast<std::int64_t>(bi) * Cin * H * W;
        // im2col with zero padding
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                T* col = cols.data() + (static_cast<std::size_t>(oy) * OW + ox) * J;
                int j = 0;
                for (int ci = 0; ci < Cin; ++ci)
                    for (int ky = 0; ky < KH; ++ky) {
                        const int y = oy * stride - pad + ky;
                        for (int kx = 0; kx < KW; ++kx, ++j) {
                            const int xcol = ox * stride - pad + kx;
                            col[j] = (y >= 0 && y < H && xcol >= 0 && xcol < W)
                                         ? xb[(static_cast<std::int64_t>(ci) * H + y) * W + xcol]
                                         : T(0);
                        }
                    }
            }
        for (int p = 0; p < P; ++p) {
            T* row = tmp.data() + static_cast<std::size_t>(p) * Cout;
            for (int co = 0; co < Cout; ++co) row[co] = bv[co];
            const T* col = cols.data() + static_cast<std::size_t>(p) * J;
            for (int j = 0; j < J; ++j)
                axpy<T>(Cout, col[j], kt.data() + static_cast<std::size_t>(j) * Cout, row);
        }
        T* yb = n.value.data() + static_cast<std::int64_t>(bi) * Cout * P;
        for (int co = 0; co < Cout; ++co)
            for (int p = 0; p < P; ++p) yb[static_cast<std::int64_t>(co) * P + p] =
                tmp[static_cast<std::size_t>(p) * Cout + co];
    }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::batchnorm2d(Id x, Id gamma, Id beta, BatchNormState<T>& state,
                                            bool train) {
    const Tensor<T>& xv = at(x).value;
    const Tensor<T>& gv = at(gamma).value;
    const Tensor<T>& bv = at(beta).value;
    if (xv.rank() != 4) throw dim_error("batchnorm2d: expected rank-4 input");
    const int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (gv.numel() != C || bv.numel() != C ||
        static_cast<int>(state.running_mean.size()) != C)
        throw dim_error("batchnorm2d: channel mismatch for input " + shape_str(xv.shape()));
    const std::int64_t HW = static_cast<std::int64_t>(H) * W;
    const std::int64_t Nred = static_cast<std::int64_t>(B) * HW;
    if (train && Nred < 2) throw config_error("batchnorm2d: train mode needs B*H*W >= 2");

    Node n;
    n.op = Op::batchnorm;
    n.in = {x, gamma, beta};
    n.flag = train;
    n.needs_grad = at(x).needs_grad || at(gamma).needs_grad || at(beta).needs_grad;
    n.value = Tensor<T>({B, C, H, W});
    n.saved.resize(static_cast<std::size_t>(2) * C);  // per channel: mean, inv_std

    for (int c = 0; c < C; ++c) {
        T mean, var;
        if (train) {
            double s = 0.0, s2 = 0.0;
            for (int bi = 0; bi < B; ++bi) {
                const T* p = xv.data() + (static_cast<std::int64_t>(bi) * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i) {
                    s += static_cast<double>(p[i]);
                    s2 += static_cast<double>(p[i]) * static_cast<double>(p[i]);
                }
            }
            const double m = s / static_cast<double>(Nred);
            const double v = std::max(0.0, s2 / static_cast<double>(Nred) - m * m);
            mean = static_cast<T>(m);
            var = static_cast<T>(v);
            // running stats carry the unbiased variance
            const double unbiased = v * static_cast<double>(Nred) / static_cast<double>(Nred - 1);
            state.running_mean[static_cast<std::size_t>(c)] =
                (T(1) - state.momentum) * state.running_mean[static_cast<std::size_t>(c)] +
                state.momentum * mean;
            state.running_var[static_cast<std::size_t>(c)] =
                (T(1) - state.momentum) * state.running_var[static_cast<std::size_t>(c)] +
                state.momentum * static_cast<T>(unbiased);
        } else {
            mean = state.running_mean[static_cast<std::size_t>(c)];
            var = state.running_var[static_cast<std::size_t>(c)];
        }
        const T inv_std = T(1) / std::sqrt(var + state.eps);
        n.saved[static_cast<std::size_t>(2 * c)] = mean;
        n.saved[static_cast<std::size_t>(2 * c + 1)] = inv_std;
        const T g = gv[c], be = bv[c];
        for (int bi = 0; bi < B; ++bi) {
            const T* p = xv.data() + (static_cast<std::int64_t>(bi) * C + c) * HW;
            T* q = n.value.data() + (static_cast<std::int64_t>(bi) * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) q[i] = (p[i] - mean) * inv_std * g + be;
        }
    }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::activation(Id x, Activation kind) {
    const Tensor<T>& xv = at(x).value;
    Node n;
    n.op = Op::act;
    n.in = {x};
    n.i0 = static_cast<int>(kind);
    n.needs_grad = at(x).needs_grad;
    n.value = Tensor<T>(xv.shape());
    T* y = n.value.data();
    const T* p = xv.data();
    const std::int64_t m = xv.numel();
    switch (kind) {
        case Activation::relu:
            for (std::int64_t i = 0; i < m; ++i) y[i] = p[i] > T(0) ? p[i] : T(0);
            break;
        case Activation::tanh:
            for (std::int64_t i = 0; i < m; ++i) y[i] = std::tanh(p[i]);
            break;
        case Activation::sigmoid:
            for (std::int64_t i = 0; i < m; ++i) y[i] = T(1) / (T(1) + std::exp(-p[i]));
            break;
    }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::avgpool_global(Id x) {
    const Tensor<T>& xv = at(x).value;
    if (xv.rank() != 4) throw dim_error("avgpool_global: expected rank-4 input");
    const int B = xv.dim(0), C = xv.dim(1);
    const std::int64_t HW = static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3);
    Node n;
    n.op = Op::avgpool;
    n.in = {x};
    n.needs_grad = at(x).needs_grad;
    n.value = Tensor<T>({B, C});
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c) {
            const T* p = xv.data() + (static_cast<std::int64_t>(bi) * C + c) * HW;
            double s = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) s += static_cast<double>(p[i]);
            n.value[static_cast<std::int64_t>(bi) * C + c] =
                static_cast<T>(s / static_cast<double>(HW));
        }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::concat(const std::vector<Id>& xs, int axis) {
    if (xs.empty()) throw dim_error("concat: no inputs");
    const Tensor<T>& first = at(xs[0]).value;
    const int r = first.rank();
    if (axis < 0 || axis >= r) throw dim_error("concat: axis out of range");
    std::vector<int> out_shape = first.shape();
    int axis_total = 0;
    for (Id id : xs) {
        const Tensor<T>& t = at(id).value;
        if (t.rank() != r) throw dim_error("concat: rank mismatch");
        for (int d = 0; d < r; ++d)
            if (d != axis && t.dim(d) != first.dim(d))
                throw dim_error("concat: extent mismatch at dim " + std::to_string(d) + ": " +
                                shape_str(t.shape()) + " vs " + shape_str(first.shape()));
        axis_total += t.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = axis_total;

    Node n;
    n.op = Op::concat;
    n.in = xs;
    n.i0 = axis;
    n.needs_grad = false;
    for (Id id : xs) n.needs_grad = n.needs_grad || at(id).needs_grad;
    n.value = Tensor<T>(out_shape);

    const std::int64_t outer = prod(out_shape, 0, axis);
    const std::int64_t inner = prod(out_shape, axis + 1, r);
    std::int64_t offset = 0;
    for (Id id : xs) {
        const Tensor<T>& t = at(id).value;
        const std::int64_t block = t.dim(axis) * inner;
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy_n(t.data() + o * block, block,
                        n.value.data() + o * axis_total * inner + offset);
        offset += block;
    }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::softmax(Id x) {
    const Tensor<T>& xv = at(x).value;
    if (xv.rank() != 2) throw dim_error("softmax: expected rank-2 input");
    const int B = xv.dim(0), Q = xv.dim(1);
    Node n;
    n.op = Op::softmax;
    n.in = {x};
    n.needs_grad = at(x).needs_grad;
    n.value = Tensor<T>({B, Q});
    for (int bi = 0; bi < B; ++bi) {
        const T* row = xv.data() + static_cast<std::int64_t>(bi) * Q;
        T* out = n.value.data() + static_cast<std::int64_t>(bi) * Q;
        T mx = row[0];
        for (int q = 1; q < Q; ++q) mx = std::max(mx, row[q]);
        double denom = 0.0;
        for (int q = 0; q < Q; ++q) {
            out[q] = std::exp(row[q] - mx);
            denom += static_cast<double>(out[q]);
        }
        for (int q = 0; q < Q; ++q) out[q] = static_cast<T>(out[q] / denom);
    }
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::softmax_cross_entropy(Id logits, std::vector<int> targets) {
    const Tensor<T>& xv = at(logits).value;
    if (xv.rank() != 2) throw dim_error("softmax_cross_entropy: expected rank-2 logits");
    const int B = xv.dim(0), Q = xv.dim(1);
    if (static_cast<int>(targets.size()) != B)
        throw dim_error("softmax_cross_entropy: " + std::to_string(targets.size()) +
                        " targets for batch " + std::to_string(B));
    for (int t : targets)
        if (t < 0 || t >= Q)
            throw dim_error("softmax_cross_entropy: target " + std::to_string(t) +
                            " outside [0," + std::to_string(Q) + ")");

    Node n;
    n.op = Op::softmax_xent;
    n.in = {logits};
    n.itargets = std::move(targets);
    n.needs_grad = at(logits).needs_grad;
    n.saved.resize(static_cast<std::size_t>(B) * Q);  // probabilities
    double loss = 0.0;
    for (int bi = 0; bi < B; ++bi) {
        const T* row = xv.data() + static_cast<std::int64_t>(bi) * Q;
        T* p = n.saved.data() + static_cast<std::size_t>(bi) * Q;
        T mx = row[0];
        for (int q = 1; q < Q; ++q) mx = std::max(mx, row[q]);
        double denom = 0.0;
        for (int q = 0; q < Q; ++q) {
            p[q] = std::exp(row[q] - mx);
            denom += static_cast<double>(p[q]);
        }
        const double log_denom = std::log(denom);
        for (int q = 0; q < Q; ++q) p[q] = static_cast<T>(p[q] / denom);
        const int t = n.itargets[static_cast<std::size_t>(bi)];
        loss += log_denom - static_cast<double>(row[t] - mx);
    }
    n.value = Tensor<T>::from({1}, {static_cast<T>(loss / B)});
    return push(std::move(n));
}

template <class T>
Tensor<T> Graph<T>::probs(Id id) const {
    const Node& n = at(id);
    if (n.op != Op::softmax_xent)
        throw state_error("probs: node is not a softmax_cross_entropy result");
    const int B = at(n.in[0]).value.dim(0), Q = at(n.in[0]).value.dim(1);
    return Tensor<T>::from({B, Q}, n.saved);
}

template <class T>
typename Graph<T>::Id Graph<T>::add(Id a, Id b) {
    const Tensor<T>& av = at(a).value;
    const Tensor<T>& bv = at(b).value;
    if (av.shape() != bv.shape())
        throw dim_error("add: shape mismatch " + shape_str(av.shape()) + " vs " +
                        shape_str(bv.shape()));
    Node n;
    n.op = Op::add;
    n.in = {a, b};
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.value = Tensor<T>(av.shape());
    for (std::int64_t i = 0; i < av.numel(); ++i) n.value[i] = av[i] + bv[i];
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::mul(Id a, Id b) {
    const Tensor<T>& av = at(a).value;
    const Tensor<T>& bv = at(b).value;
    if (av.shape() != bv.shape())
        throw dim_error("mul: shape mismatch " + shape_str(av.shape()) + " vs " +
                        shape_str(bv.shape()));
    Node n;
    n.op = Op::mul;
    n.in = {a, b};
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    n.value = Tensor<T>(av.shape());
    for (std::int64_t i = 0; i < av.numel(); ++i) n.value[i] = av[i] * bv[i];
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::affine(Id x, T scale, T shift) {
    const Tensor<T>& xv = at(x).value;
    Node n;
    n.op = Op::affine;
    n.in = {x};
    n.needs_grad = at(x).needs_grad;
    n.saved = {scale, shift};
    n.value = Tensor<T>(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i) n.value[i] = scale * xv[i] + shift;
    return push(std::move(n));
}

template <class T>
typename Graph<T>::Id Graph<T>::sum(Id x) {
    const Tensor<T>& xv = at(x).value;
    Node n;
    n.op = Op::sum;
    n.in = {x};
    n.needs_grad = at(x).needs_grad;
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.numel(); ++i) s += static_cast<double>(xv[i]);
    n.value = Tensor<T>::from({1}, {static_cast<T>(s)});
    return push(std::move(n));
}

template <class T>
std::vector<T>& Graph<T>::grad_buf(Id id) {
    Node& n = at(id);
    if (n.grad.empty()) n.grad.assign(static_cast<std::size_t>(n.value.numel()), T(0));
    return n.grad;
}

template <class T>
void Graph<T>::backward(Id loss) {
    if (spent_ || nodes_.empty()) throw state_error("backward: tape already consumed");
    if (at(loss).value.numel() != 1) throw dim_error("backward: loss must be scalar");
    grad_buf(loss)[0] = T(1);
    for (Id id = loss; id >= 0; --id) {
        Node& n = at(id);
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.op == Op::leaf) {
            if (n.bound && n.bound->requires_grad()) {
                std::vector<T>& g = n.bound->grad();
                if (g.size() != n.grad.size())
                    throw dim_error("backward: bound grad buffer shape mismatch");
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
            }
            continue;
        }
        backward_node(id);
    }
    reset();
    spent_ = true;
}

template <class T>
void Graph<T>::backward_node(Id id) {
    Node& n = at(id);
    const std::vector<T>& gy = n.grad;
    switch (n.op) {
        case Op::linear: {
            const Node& xn = at(n.in[0]);
            const Node& wn = at(n.in[1]);
            const Node& bn = at(n.in[2]);
            const int B = xn.value.dim(0), I = xn.value.dim(1), O = wn.value.dim(0);
            if (xn.needs_grad) {
                std::vector<T>& gx = grad_buf(n.in[0]);
                for (int row = 0; row < B; ++row) {
                    const T* gyr = gy.data() + static_cast<std::int64_t>(row) * O;
                    T* gxr = gx.data() + static_cast<std::int64_t>(row) * I;
                    for (int o = 0; o < O; ++o)
                        axpy<T>(I, gyr[o], wn.value.data() + static_cast<std::int64_t>(o) * I, gxr);
                }
            }
            if (wn.needs_grad) {
                std::vector<T>& gw = grad_buf(n.in[1]);
                for (int row = 0; row < B; ++row) {
                    const T* gyr = gy.data() + static_cast<std::int64_t>(row) * O;
                    const T* xr = xn.value.data() + static_cast<std::int64_t>(row) * I;
                    for (int o = 0; o < O; ++o)
                        axpy<T>(I, gyr[o], xr, gw.data() + static_cast<std::int64_t>(o) * I);
                }
            }
            if (bn.needs_grad) {
                std::vector<T>& gb = grad_buf(n.in[2]);
                for (int row = 0; row < B; ++row)
                    axpy<T>(O, T(1), gy.data() + static_cast<std::int64_t>(row) * O, gb.data());
            }
            break;
        }
        case Op::conv2d: {
            const Node& xn = at(n.in[0]);
            const Node& kn = at(n.in[1]);
            const Node& bn = at(n.in[2]);
            const int stride = n.i0, pad = n.i1;
            const int B = xn.value.dim(0), Cin = xn.value.dim(1), H = xn.value.dim(2),
                      W = xn.value.dim(3);
            const int Cout = kn.value.dim(0), KH = kn.value.dim(2), KW = kn.value.dim(3);
            const int OH = n.value.dim(2), OW = n.value.dim(3);
            const int P = OH * OW, J = Cin * KH * KW;
            std::vector<T> cols(static_cast<std::size_t>(P) * J);
            std::vector<T> gtmp(static_cast<std::size_t>(P) * Cout);
            std::vector<T> gcols;
            std::vector<T>* gx = xn.needs_grad ? &grad_buf(n.in[0]) : nullptr;
            std::vector<T>* gk = kn.needs_grad ? &grad_buf(n.in[1]) : nullptr;
            std::vector<T>* gb = bn.needs_grad ? &grad_buf(n.in[2]) : nullptr;
            for (int bi = 0; bi < B; ++bi) {
                const T* gyb = gy.data() + static_cast<std::int64_t>(bi) * Cout * P;
                for (int co = 0; co < Cout; ++co)
                    for (int p = 0; p < P; ++p)
                        gtmp[static_cast<std::size_t>(p) * Cout + co] =
                            gyb[static_cast<std::int64_t>(co) * P + p];
                if (gb) {
                    for (int p = 0; p < P; ++p)
                        axpy<T>(Cout, T(1), gtmp.data() + static_cast<std::size_t>(p) * Cout,
                                gb->data());
                }
                if (gk || gx) {
                    // re-derive the patch matrix for this batch element
                    const T* xb = xn.value.data() + static_cast<std::int64_t>(bi) * Cin * H * W;
                    for (int oy = 0; oy < OH; ++oy)
                        for (int ox = 0; ox < OW; ++ox) {
                            T* col = cols.data() + (static_cast<std::size_t>(oy) * OW + ox) * J;
                            int j = 0;
                            for (int ci = 0; ci < Cin; ++ci)
                                for (int ky = 0; ky < KH; ++ky) {
                                    const int y = oy * stride - pad + ky;
                                    for (int kx = 0; kx < KW; ++kx, ++j) {
                                        const int xc = ox * stride - pad + kx;
                                        col[j] = (y >= 0 && y < H && xc >= 0 && xc < W)
                                                     ? xb[(static_cast<std::int64_t>(ci) * H + y) *
                                                              W +
                                                          xc]
                                                     : T(0);
                                    }
                                }
                        }
                }
                if (gk) {
                    for (int p = 0; p < P; ++p) {
                        const T* col = cols.data() + static_cast<std::size_t>(p) * J;
                        const T* gt = gtmp.data() + static_cast<std::size_t>(p) * Cout;
                        for (int co = 0; co < Cout; ++co)
                            axpy<T>(J, gt[co], col, gk->data() + static_cast<std::int64_t>(co) * J);
                    }
                }
                if (gx) {
                    gcols.assign(static_cast<std::size_t>(P) * J, T(0));
                    for (int p = 0; p < P; ++p) {
                        T* gcol = gcols.data() + static_cast<std::size_t>(p) * J;
                        const T* gt = gtmp.data() + static_cast<std::size_t>(p) * Cout;
                        for (int co = 0; co < Cout; ++co)
                            axpy<T>(J, gt[co], kn.value.data() + static_cast<std::int64_t>(co) * J,
                                    gcol);
                    }
                    T* gxb = gx->data() + static_cast<std::int64_t>(bi) * Cin * H * W;
                    for (int oy = 0; oy < OH; ++oy)
                        for (int ox = 0; ox < OW; ++ox) {
                            const T* gcol =
                                gcols.data() + (static_cast<std::size_t>(oy) * OW + ox) * J;
                            int j = 0;
                            for (int ci = 0; ci < Cin; ++ci)
                                for (int ky = 0; ky < KH; ++ky) {
                                    const int y = oy * stride - pad + ky;
                                    for (int kx = 0; kx < KW; ++kx, ++j) {
                                        const int xc = ox * stride - pad + kx;
                                        if (y >= 0 && y < H && xc >= 0 && xc < W)
                                            gxb[(static_cast<std::int64_t>(ci) * H + y) * W + xc] +=
                                                gcol[j];
                                    }
                                }
                        }
                }
            }
            break;
        }
        case Op::batchnorm: {
            const Node& xn = at(n.in[0]);
            const Node& gn = at(n.in[1]);
            const Node& bn = at(n.in[2]);
            const int B = xn.value.dim(0), C = xn.value.dim(1);
            const std::int64_t HW = static_cast<std::int64_t>(xn.value.dim(2)) * xn.value.dim(3);
            const std::int64_t Nred = static_cast<std::int64_t>(B) * HW;
            std::vector<T>* gx = xn.needs_grad ? &grad_buf(n.in[0]) : nullptr;
            std::vector<T>* gg = gn.needs_grad ? &grad_buf(n.in[1]) : nullptr;
            std::vector<T>* gb = bn.needs_grad ? &grad_buf(n.in[2]) : nullptr;
            for (int c = 0; c < C; ++c) {
                const T mean = n.saved[static_cast<std::size_t>(2 * c)];
                const T inv_std = n.saved[static_cast<std::size_t>(2 * c + 1)];
                const T gamma = gn.value[c];
                double sum_gy = 0.0, sum_gy_xhat = 0.0;
                for (int bi = 0; bi < B; ++bi) {
                    const std::int64_t base = (static_cast<std::int64_t>(bi) * C + c) * HW;
                    for (std::int64_t i = 0; i < HW; ++i) {
                        const double xhat =
                            static_cast<double>((xn.value[base + i] - mean) * inv_std);
                        const double g = static_cast<double>(gy[static_cast<std::size_t>(base + i)]);
                        sum_gy += g;
                        sum_gy_xhat += g * xhat;
                    }
                }
                if (gg) (*gg)[static_cast<std::size_t>(c)] += static_cast<T>(sum_gy_xhat);
                if (gb) (*gb)[static_cast<std::size_t>(c)] += static_cast<T>(sum_gy);
                if (gx) {
                    if (n.flag) {
                        // train mode: batch statistics enter the graph
                        const double k1 = sum_gy / static_cast<double>(Nred);
                        const double k2 = sum_gy_xhat / static_cast<double>(Nred);
                        for (int bi = 0; bi < B; ++bi) {
                            const std::int64_t base = (static_cast<std::int64_t>(bi) * C + c) * HW;
                            for (std::int64_t i = 0; i < HW; ++i) {
                                const double xhat = static_cast<double>(
                                    (xn.value[base + i] - mean) * inv_std);
                                const double g =
                                    static_cast<double>(gy[static_cast<std::size_t>(base + i)]);
                                (*gx)[static_cast<std::size_t>(base + i)] += static_cast<T>(
                                    static_cast<double>(gamma) * static_cast<double>(inv_std) *
                                    (g - k1 - xhat * k2));
                            }
                        }
                    } else {
                        const T a = gamma * inv_std;
                        for (int bi = 0; bi < B; ++bi) {
                            const std::int64_t base = (static_cast<std::int64_t>(bi) * C + c) * HW;
                            for (std::int64_t i = 0; i < HW; ++i)
                                (*gx)[static_cast<std::size_t>(base + i)] +=
                                    a * gy[static_cast<std::size_t>(base + i)];
                        }
                    }
                }
            }
            break;
        }
        case Op::act: {
            if (!at(n.in[0]).needs_grad) break;
            std::vector<T>& gx = grad_buf(n.in[0]);
            const std::int64_t m = n.value.numel();
            switch (static_cast<Activation>(n.i0)) {
                case Activation::relu:
                    for (std::int64_t i = 0; i < m; ++i)
                        if (n.value[i] > T(0)) gx[static_cast<std::size_t>(i)] += gy[static_cast<std::size_t>(i)];
                    break;
                case Activation::tanh:
                    for (std::int64_t i = 0; i < m; ++i)
                        gx[static_cast<std::size_t>(i)] +=
                            gy[static_cast<std::size_t>(i)] * (T(1) - n.value[i] * n.value[i]);
                    break;
                case Activation::sigmoid:
                    for (std::int64_t i = 0; i < m; ++i)
                        gx[static_cast<std::size_t>(i)] += gy[static_cast<std::size_t>(i)] *
                                                           n.value[i] * (T(1) - n.value[i]);
                    break;
            }
            break;
        }
        case Op::avgpool: {
            if (!at(n.in[0]).needs_grad) break;
            const Node& xn = at(n.in[0]);
            std::vector<T>& gx = grad_buf(n.in[0]);
            const int B = xn.value.dim(0), C = xn.value.dim(1);
            const std::int64_t HW = static_cast<std::int64_t>(xn.value.dim(2)) * xn.value.dim(3);
            const T w = T(1) / static_cast<T>(HW);
            for (int bi = 0; bi < B; ++bi)
                for (int c = 0; c < C; ++c) {
                    const T g = gy[static_cast<std::size_t>(bi) * C + c] * w;
                    T* p = gx.data() + (static_cast<std::int64_t>(bi) * C + c) * HW;
                    for (std::int64_t i = 0; i < HW; ++i) p[i] += g;
                }
            break;
        }
        case Op::concat: {
            const int axis = n.i0;
            const int r = n.value.rank();
            const std::int64_t outer = prod(n.value.shape(), 0, axis);
            const std::int64_t inner = prod(n.value.shape(), axis + 1, r);
            const std::int64_t total = n.value.dim(axis) * inner;
            std::int64_t offset = 0;
            for (Id cid : n.in) {
                const Node& cn = at(cid);
                const std::int64_t block = cn.value.dim(axis) * inner;
                if (cn.needs_grad) {
                    std::vector<T>& gc = grad_buf(cid);
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const T* src = gy.data() + o * total + offset;
                        T* dst = gc.data() + o * block;
                        for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
                    }
                }
                offset += block;
            }
            break;
        }
        case Op::softmax: {
            if (!at(n.in[0]).needs_grad) break;
            std::vector<T>& gx = grad_buf(n.in[0]);
            const int B = n.value.dim(0), Q = n.value.dim(1);
            for (int bi = 0; bi < B; ++bi) {
                const T* p = n.value.data() + static_cast<std::int64_t>(bi) * Q;
                const T* g = gy.data() + static_cast<std::int64_t>(bi) * Q;
                double dot = 0.0;
                for (int q = 0; q < Q; ++q) dot += static_cast<double>(p[q]) * g[q];
                T* out = gx.data() + static_cast<std::int64_t>(bi) * Q;
                for (int q = 0; q < Q; ++q)
                    out[q] += p[q] * (g[q] - static_cast<T>(dot));
            }
            break;
        }
        case Op::softmax_xent: {
            if (!at(n.in[0]).needs_grad) break;
            std::vector<T>& gx = grad_buf(n.in[0]);
            const Node& xn = at(n.in[0]);
            const int B = xn.value.dim(0), Q = xn.value.dim(1);
            const T scale = gy[0] / static_cast<T>(B);
            for (int bi = 0; bi < B; ++bi) {
                const T* p = n.saved.data() + static_cast<std::size_t>(bi) * Q;
                T* out = gx.data() + static_cast<std::int64_t>(bi) * Q;
                const int t = n.itargets[static_cast<std::size_t>(bi)];
                for (int q = 0; q < Q; ++q) out[q] += scale * (p[q] - (q == t ? T(1) : T(0)));
            }
            break;
        }
        case Op::add: {
            for (int s = 0; s < 2; ++s) {
                if (!at(n.in[static_cast<std::size_t>(s)]).needs_grad) continue;
                std::vector<T>& g = grad_buf(n.in[static_cast<std::size_t>(s)]);
                for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
            }
            break;
        }
        case Op::mul: {
            const Node& an = at(n.in[0]);
            const Node& bn = at(n.in[1]);
            if (an.needs_grad) {
                std::vector<T>& g = grad_buf(n.in[0]);
                for (std::size_t i = 0; i < gy.size(); ++i)
                    g[i] += gy[i] * bn.value[static_cast<std::int64_t>(i)];
            }
            if (bn.needs_grad) {
                std::vector<T>& g = grad_buf(n.in[1]);
                for (std::size_t i = 0; i < gy.size(); ++i)
                    g[i] += gy[i] * an.value[static_cast<std::int64_t>(i)];
            }
            break;
        }
        case Op::affine: {
            if (!at(n.in[0]).needs_grad) break;
            std::vector<T>& g = grad_buf(n.in[0]);
            const T a = n.saved[0];
            for (std::size_t i = 0; i < gy.size(); ++i) g[i] += a * gy[i];
            break;
        }
        case Op::sum: {
            if (!at(n.in[0]).needs_grad) break;
            std::vector<T>& g = grad_buf(n.in[0]);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[0];
            break;
        }
        case Op::leaf:
            break;
    }
}

template <class T>
void Graph<T>::reset() {
    nodes_.clear();
    spent_ = false;
}

template <class T>
Adam<T>::Adam(std::vector<Tensor<T>*> params, T lr, T beta1, T beta2, T eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor<T>* p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p->numel()), T(0));
        v_.emplace_back(static_cast<std::size_t>(p->numel()), T(0));
    }
}

template <class T>
void Adam<T>::step() {
    ++step_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(step_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor<T>& p = *params_[pi];
        const std::vector<T>& g = p.grad();
        if (g.size() != static_cast<std::size_t>(p.numel()))
            throw dim_error("adam: grad shape mismatch for parameter " + std::to_string(pi));
        std::vector<T>& m = m_[pi];
        std::vector<T>& v = v_[pi];
        T* w = p.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

template <class T>
void Adam<T>::zero_grad() {
    for (Tensor<T>* p : params_) p->zero_grad();
}

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw io_error("truncated checkpoint " + path + " at byte offset " +
                       std::to_string(static_cast<long long>(is.tellg())));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

template <class T>
void write_checkpoint(const std::string& path, const std::vector<NamedParam<T>>& blocks) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open " + path + " for writing");
    os.write("LBMT", 4);
    put_u32(os, 1u);
    put_u32(os, static_cast<std::uint32_t>(blocks.size()));
    for (const NamedParam<T>& b : blocks) {
        put_u32(os, static_cast<std::uint32_t>(b.name.size()));
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        const Tensor<T>& t = *b.tensor;
        put_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) put_u32(os, static_cast<std::uint32_t>(t.dim(d)));
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            const float f = static_cast<float>(t[i]);
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            put_u32(os, u);
        }
    }
    if (!os) throw io_error("write failure on " + path);
}

std::vector<std::pair<std::string, TensorF>> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "LBMT", 4) != 0)
        throw format_error("bad checkpoint magic in " + path);
    const std::uint32_t version = get_u32(is, path);
    if (version != 1u)
        throw format_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = get_u32(is, path);
    std::vector<std::pair<std::string, TensorF>> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is, path);
        if (name_len > (1u << 16)) throw format_error("implausible block name length in " + path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw io_error("truncated checkpoint " + path + " at byte offset " +
                           std::to_string(static_cast<long long>(is.tellg())));
        const std::uint32_t rank = get_u32(is, path);
        if (rank > 8) throw format_error("implausible tensor rank in " + path);
        std::vector<int> shape(rank);
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(get_u32(is, path));
            if (shape[d] <= 0) throw format_error("non-positive extent in " + path);
            numel *= shape[d];
        }
        std::vector<float> data(static_cast<std::size_t>(numel));
        for (std::int64_t j = 0; j < numel; ++j) {
            const std::uint32_t u = get_u32(is, path);
            float f;
            std::memcpy(&f, &u, 4);
            data[static_cast<std::size_t>(j)] = f;
        }
        out.emplace_back(std::move(name), TensorF::from(std::move(shape), std::move(data)));
    }
    return out;
}

template <class T>
double fd_max_rel_err(const std::function<double()>& loss,
                      const std::vector<NamedParam<T>>& params, const FdOptions& opt,
                      std::vector<FdBlockResult>* per_block) {
    Rng rng(opt.seed);
    double worst = 0.0;
    for (const NamedParam<T>& np : params) {
        if (!np.trainable) continue;
        Tensor<T>& p = *np.tensor;
        const std::vector<T>& g = p.grad();
        double block_worst = 0.0;
        const int n = static_cast<int>(p.numel());
        const int samples = std::min(opt.samples_per_block, n);
        for (int s = 0; s < samples; ++s) {
            const int idx = samples == n ? s : rng.uniform_int(0, n);
            const T keep = p[idx];
            p[idx] = keep + static_cast<T>(opt.eps);
            const double up = loss();
            p[idx] = keep - static_cast<T>(opt.eps);
            const double down = loss();
            p[idx] = keep;
            const double fd = (up - down) / (2.0 * opt.eps);
            const double ad = static_cast<double>(g[static_cast<std::size_t>(idx)]);
            const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
            block_worst = std::max(block_worst, std::abs(fd - ad) / denom);
        }
        if (per_block) per_block->push_back({np.name, block_worst});
        worst = std::max(worst, block_worst);
    }
    return worst;
}

template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;
template class Adam<float>;
template class Adam<double>;
template void write_checkpoint<float>(const std::string&, const std::vector<NamedParam<float>>&);
template void write_checkpoint<double>(const std::string&, const std::vector<NamedParam<double>>&);
template double fd_max_rel_err<float>(const std::function<double()>&,
                                      const std::vector<NamedParam<float>>&, const FdOptions&,
                                      std::vector<FdBlockResult>*);
template double fd_max_rel_err<double>(const std::function<double()>&,
                                       const std::vector<NamedParam<double>>&, const FdOptions&,
                                       std::vector<FdBlockResult>*);

}  // namespace lbt
