#pragma once

// Dense row-major tensors plus a reverse-mode tape. The op set is exactly
// what the tracker models need: linear, conv2d, batchnorm2d, elementwise
// activations/arithmetic, global average pooling, concat, softmax and the
// fused softmax cross entropy. float is the training precision; double
// instantiations exist for finite-difference gradient checking.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "liquidbeam/errors.hpp"
#include "liquidbeam/rng.hpp"

namespace lbt {

template <class T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, T fill = T(0))
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T value) {
        return Tensor(std::move(shape), value);
    }

    static Tensor from(std::vector<int> shape, std::vector<T> data) {
        Tensor t;
        if (checked_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw dim_error("tensor data length " + std::to_string(data.size()) +
                            " does not match shape product " +
                            std::to_string(checked_numel(shape)));
        t.shape_ = std::move(shape);
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool on) {
        requires_grad_ = on;
        if (on && grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
        if (!on) grad_.clear();
    }

    std::vector<T>& grad() {
        if (!requires_grad_) throw state_error("tensor does not track gradients");
        return grad_;
    }
    const std::vector<T>& grad() const {
        if (!requires_grad_) throw state_error("tensor does not track gradients");
        return grad_;
    }

    void zero_grad() {
        if (requires_grad_) grad_.assign(data_.size(), T(0));
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        std::vector<U> d(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
        return Tensor<U>::from(shape_, std::move(d));
    }

  private:
    static std::int64_t checked_numel(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw dim_error("tensor extent must be positive");
            n *= e;
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
    bool requires_grad_ = false;
    std::vector<T> grad_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Per-channel running statistics for batchnorm2d. Owned by the layer, updated
// by the op in train mode, read in eval mode. Fresh state (mean 0, var 1) is
// valid for eval before any training step.
template <class T>
struct BatchNormState {
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    void init(int channels) {
        running_mean.assign(static_cast<std::size_t>(channels), T(0));
        running_var.assign(static_cast<std::size_t>(channels), T(1));
    }
};

enum class Activation { relu, tanh, sigmoid };

// Reverse-mode tape. Ops append nodes in creation order; backward() walks the
// tape once in reverse, accumulates into bound parameter tensors and clears
// the tape. A cleared tape refuses a second backward().
template <class T>
class Graph {
  public:
    using Id = int;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // When set, every op forward scans its output for NaN/Inf and throws.
    bool check_finite = false;

    // Leaf holding a value that never needs gradients (network inputs).
    Id input(Tensor<T> value);

    // Leaf bound to an external tensor; backward() accumulates into its grad
    // buffer when requires_grad is set.
    Id param(Tensor<T>& bound);

    // y = x W^T + b with x:[B,I], W:[O,I], b:[O].
    Id linear(Id x, Id w, Id b);

    // Cross-correlation with zero padding. x:[B,Cin,H,W], k:[Cout,Cin,kh,kw],
    // b:[Cout]. Output spatial extent floor((H + 2 pad - kh)/stride) + 1.
    Id conv2d(Id x, Id k, Id b, int stride, int pad);

    // Per-channel batch normalization over (B,H,W). Train mode normalizes by
    // batch statistics and updates `state`; eval mode uses the running stats.
    Id batchnorm2d(Id x, Id gamma, Id beta, BatchNormState<T>& state, bool train);

    Id activation(Id x, Activation kind);
    Id relu(Id x) { return activation(x, Activation::relu); }
    Id tanh(Id x) { return activation(x, Activation::tanh); }
    Id sigmoid(Id x) { return activation(x, Activation::sigmoid); }

    // [B,C,H,W] -> [B,C] mean over spatial positions.
    Id avgpool_global(Id x);

    // Order-preserving concatenation along `axis`; all other extents equal.
    Id concat(const std::vector<Id>& xs, int axis);

    // Row-wise softmax (any rank-2 input).
    Id softmax(Id x);

    // Max-subtracted softmax + NLL averaged over rows. targets[b] in [0,Q).
    // The resulting node is a scalar; probs(id) exposes the row probabilities.
    Id softmax_cross_entropy(Id logits, std::vector<int> targets);

    Id add(Id a, Id b);      // same-shape elementwise sum
    Id mul(Id a, Id b);      // Hadamard product
    Id affine(Id x, T scale, T shift);  // scale*x + shift elementwise
    Id sum(Id x);            // full reduction to a scalar

    const Tensor<T>& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    // Probability rows saved by softmax_cross_entropy.
    Tensor<T> probs(Id id) const;

    // Reverse accumulation from a scalar loss. Populates grads of every
    // requires_grad leaf reachable from it, then clears the tape.
    void backward(Id loss);

    // Drop all nodes; the graph is reusable afterwards.
    void reset();

    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op : std::uint8_t {
        leaf,
        linear,
        conv2d,
        batchnorm,
        act,
        avgpool,
        concat,
        softmax,
        softmax_xent,
        add,
        mul,
        affine,
        sum,
    };

    struct Node {
        Op op = Op::leaf;
        std::vector<Id> in;
        Tensor<T> value;
        std::vector<T> grad;    // allocated lazily during backward
        bool needs_grad = false;
        Tensor<T>* bound = nullptr;  // leaf only

        // op-specific saved state
        std::vector<T> saved;        // e.g. batchnorm (mean, inv_std), xent probs
        std::vector<int> itargets;   // xent targets
        int i0 = 0, i1 = 0;          // stride/pad, axis, activation kind
        bool flag = false;           // batchnorm train mode
    };

    Id push(Node n);
    Node& at(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& at(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::vector<T>& grad_buf(Id id);
    void assert_finite(const Tensor<T>& t, const char* what) const;
    void backward_node(Id id);

    std::vector<Node> nodes_;
    bool spent_ = false;  // backward already consumed this tape
};

// Bias-corrected Adam over a fixed parameter list. Moment buffers are keyed
// by position, so the list must not change between steps.
template <class T>
class Adam {
  public:
    Adam(std::vector<Tensor<T>*> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
         T eps = T(1e-8));

    void step();
    void zero_grad();

    std::int64_t step_count() const { return step_; }
    T learning_rate() const { return lr_; }
    void set_learning_rate(T lr) { lr_ = lr; }

  private:
    std::vector<Tensor<T>*> params_;
    std::vector<std::vector<T>> m_, v_;
    T lr_, beta1_, beta2_, eps_;
    std::int64_t step_ = 0;
};

// Named parameter/state entry used by checkpoints, Adam and gradient checks.
template <class T>
struct NamedParam {
    std::string name;
    Tensor<T>* tensor = nullptr;
    bool trainable = true;
};

// Checkpoint container format: "LBMT", u32 version, u32 block count, then per
// block u32 name length, name bytes, u32 rank, u32 extents, f32 payload.
// Everything little-endian; doubles are narrowed to f32 on disk.
template <class T>
void write_checkpoint(const std::string& path, const std::vector<NamedParam<T>>& blocks);

std::vector<std::pair<std::string, TensorF>> read_checkpoint(const std::string& path);

// Central finite differences against tape gradients.
//
// `loss` must rebuild the forward pass from current parameter values on every
// call; it must not touch the tape used to produce `analytic grads`. The
// caller runs backward once beforehand so that each tensor's grad buffer holds
// the analytic gradient.
struct FdOptions {
    int samples_per_block = 8;
    double eps = 1e-5;
    std::uint64_t seed = 20240901;
};

struct FdBlockResult {
    std::string name;
    double max_rel_err = 0.0;
};

template <class T>
double fd_max_rel_err(const std::function<double()>& loss,
                      const std::vector<NamedParam<T>>& params, const FdOptions& opt,
                      std::vector<FdBlockResult>* per_block = nullptr);

}  // namespace lbt
