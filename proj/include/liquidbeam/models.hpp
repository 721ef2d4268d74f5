#pragma once

// End-to-end tracker models. All variants share the same convolutional
// feature extractor (pilot sweeps reshaped to a two-channel square grid) and
// the same softmax output layer; they differ only in the recurrent cell:
// the closed-form continuous-time cell, a standard LSTM that by construction
// ignores the prediction instant, or an LSTM whose hidden state is evolved by
// an explicit-Euler latent derivative between slot boundaries.

#include <string>
#include <variant>
#include <vector>

#include "liquidbeam/lnn.hpp"
#include "liquidbeam/tensor.hpp"

namespace lbt {

inline constexpr int kFeatureDim = 256;
inline constexpr int kHiddenDim = 64;
inline constexpr int kBackboneDim = 128;
inline constexpr int kConvMidChannels = 64;
inline constexpr int kOdeEulerSteps = 10;

enum class ModelKind { lnn, lstm, ode_lstm };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

template <class T>
struct ConvLayer {
    Tensor<T> k;  // [Cout, Cin, 3, 3]
    Tensor<T> b;  // [Cout]
    int stride = 3;
    int pad = 1;

    void init(int in_ch, int out_ch, Rng& rng);
};

template <class T>
struct BatchNormLayer {
    Tensor<T> gamma;
    Tensor<T> beta;
    BatchNormState<T> state;

    void init(int channels);
};

// Pilot grid [B, 2, G, G] -> feature vector [B, 256]:
// BN -> (conv s3 p1, ReLU, BN) x3 -> global average pool.
template <class T>
struct FeatureExtractor {
    BatchNormLayer<T> bn1;
    ConvLayer<T> conv1;
    BatchNormLayer<T> bn2;
    ConvLayer<T> conv2;
    BatchNormLayer<T> bn3;
    ConvLayer<T> conv3;
    BatchNormLayer<T> bn4;
    int grid = 0;  // spatial extent G of the input

    struct Bound {
        typename Graph<T>::Id bn1_g, bn1_b, c1_k, c1_b, bn2_g, bn2_b, c2_k, c2_b, bn3_g, bn3_b,
            c3_k, c3_b, bn4_g, bn4_b;
    };

    void init(int grid_, Rng& rng);

    // Verifies the conv chain produces positive spatial maps and the fixed
    // 256-wide feature for this grid size; throws config_error otherwise.
    static void audit(int grid);

    Bound bind(Graph<T>& g);
    typename Graph<T>::Id forward(Graph<T>& g, const Bound& bound, typename Graph<T>::Id x,
                                  bool train);

    void collect_params(std::vector<NamedParam<T>>& out);
};

// Standard LSTM cell over [feature, hidden] with per-gate weight matrices.
template <class T>
struct LstmCell {
    LinearLayer<T> wi, wf, wg, wo;
    int feature_dim = 0;
    int hidden_dim = 0;

    struct Bound {
        typename Graph<T>::Id wi_w, wi_b, wf_w, wf_b, wg_w, wg_b, wo_w, wo_b;
    };
    struct State {
        typename Graph<T>::Id h;
        typename Graph<T>::Id c;
    };

    void init(int feature_dim_, int hidden_dim_, Rng& rng);
    Bound bind(Graph<T>& g);
    State forward(Graph<T>& g, const Bound& bound, typename Graph<T>::Id feat,
                  const State& prev) const;
    void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out);
};

// LSTM at slot boundaries plus a latent derivative h' = tanh(d(h)) integrated
// with fixed-step explicit Euler over the normalized instant.
template <class T>
struct OdeLstmCell {
    LstmCell<T> lstm;
    LinearLayer<T> d;

    struct Bound {
        typename LstmCell<T>::Bound lstm;
        typename Graph<T>::Id d_w, d_b;
    };

    void init(int feature_dim, int hidden_dim, Rng& rng);
    Bound bind(Graph<T>& g);
    typename Graph<T>::Id evolve(Graph<T>& g, const Bound& bound, typename Graph<T>::Id h,
                                 double tbar) const;
    void collect_params(const std::string& prefix, std::vector<NamedParam<T>>& out);
};

template <class T>
class TrackerModel {
  public:
    // q_beams must be a perfect square; the pilot vector is reshaped to a
    // two-channel sqrt(Q) x sqrt(Q) grid.
    static TrackerModel build(ModelKind kind, int q_beams, std::uint64_t seed);

    static TrackerModel load(const std::string& path);
    void save(const std::string& path) const;

    ModelKind kind() const { return kind_; }
    int q_beams() const { return q_beams_; }
    int grid() const { return grid_; }

    std::vector<NamedParam<T>> named_params();
    std::vector<Tensor<T>*> trainable_tensors();
    std::int64_t extractor_param_count();
    std::int64_t output_param_count();

    // Graph-level building blocks. bind() creates the parameter nodes once
    // per tape; the returned handle is valid until the tape is reset.
    struct Bound {
        typename FeatureExtractor<T>::Bound fe;
        typename CfcCell<T>::Bound cfc;
        typename LstmCell<T>::Bound lstm;
        typename OdeLstmCell<T>::Bound ode;
        typename Graph<T>::Id out_w, out_b;
    };

    struct CellState {
        typename Graph<T>::Id h = -1;
        typename Graph<T>::Id c = -1;  // unused by the closed-form cell
    };

    Bound bind(Graph<T>& g);
    CellState initial_state(Graph<T>& g, int batch) const;
    typename Graph<T>::Id features(Graph<T>& g, const Bound& bound, typename Graph<T>::Id x,
                                   bool train);

    // One slot of recurrence at normalized instant tbar; returns the carried
    // state and the hidden vector the output layer should read.
    struct StepOut {
        CellState state;
        typename Graph<T>::Id output_h;
    };
    StepOut step(Graph<T>& g, const Bound& bound, typename Graph<T>::Id feat,
                 const CellState& prev, double tbar) const;

    typename Graph<T>::Id logits(Graph<T>& g, const Bound& bound,
                                 typename Graph<T>::Id h) const;

    // Inference: probability vector per slot prefix for one normalized
    // instant. slot_inputs[i] is the [B, 2, G, G] pilot grid of slot i.
    std::vector<Tensor<T>> track(const std::vector<Tensor<T>>& slot_inputs, double tbar);

    // Training loss over one batch of episodes: cross entropy summed over
    // slots, averaged over the instant grid (and over the batch inside each
    // term). labels[g][s] holds the batch's beam indices for instant g of
    // slot s. Returns the loss node; the caller runs backward.
    typename Graph<T>::Id episode_loss(Graph<T>& g, const std::vector<typename Graph<T>::Id>& feats,
                                       const std::vector<std::vector<std::vector<int>>>& labels,
                                       const std::vector<double>& tbar_grid, const Bound& bound);

  private:
    TrackerModel() = default;

    ModelKind kind_ = ModelKind::lnn;
    int q_beams_ = 0;
    int grid_ = 0;
    FeatureExtractor<T> extractor_;
    CfcCell<T> cfc_;
    LstmCell<T> lstm_;
    OdeLstmCell<T> ode_;
    LinearLayer<T> output_;
};

// argmax with ties broken toward the lowest index.
template <class T>
int select_beam(const Tensor<T>& prob_row);

// Reshape one pilot sweep (interleaved re/im pairs, length 2Q) into the
// [2, G, G] input layout; row-major beam order.
template <class T>
void pilot_to_grid(const float* interleaved, int q_beams, T* out);

using TrackerModelF = TrackerModel<float>;
using TrackerModelD = TrackerModel<double>;

}  // namespace lbt
