#pragma once

#include <random>
#include <string>
#include <vector>

#include "trajpred/nn/graph.hpp"
#include "trajpred/nn/params.hpp"

namespace trajpred::nn {

/// y = x W + b
struct LinearParams {
  int w = -1;
  int b = -1;
  static LinearParams create(ParamStore& store, const std::string& prefix, std::size_t in,
                             std::size_t out, std::mt19937_64& rng);
  NodeId apply(Graph& g, ParamBinder& p, NodeId x) const;
};

/// Gated linear unit: (x W1 + b1) .* sigmoid(x W2 + b2)
struct GluParams {
  LinearParams lin;
  LinearParams gate;
  static GluParams create(ParamStore& store, const std::string& prefix, std::size_t in,
                          std::size_t out, std::mt19937_64& rng);
  NodeId apply(Graph& g, ParamBinder& p, NodeId x) const;
};

/// Gain/bias pair for layer/group normalization (gain=1, bias=0 at init).
struct NormParams {
  int gain = -1;
  int bias = -1;
  static NormParams create(ParamStore& store, const std::string& prefix, std::size_t width);
  NodeId layer_norm(Graph& g, ParamBinder& p, NodeId x, double eps = 1e-5) const;
  NodeId group_norm(Graph& g, ParamBinder& p, NodeId x, std::size_t groups,
                    double eps = 1e-5) const;
};

/// LSTM cell, gate order [input, forget, cell, output]; forget bias starts at 1.
struct LstmParams {
  int w_ih = -1;  // in x 4h
  int w_hh = -1;  // h x 4h
  int b = -1;     // 1 x 4h
  std::size_t hidden = 0;
  static LstmParams create(ParamStore& store, const std::string& prefix, std::size_t in,
                           std::size_t hidden, std::mt19937_64& rng);
};

struct LstmState {
  NodeId h;
  NodeId c;
};

LstmState recurrent_cell_lstm(Graph& g, ParamBinder& p, NodeId x_t, LstmState state,
                              const LstmParams& params);

/// GRU cell, gate order [update, reset, candidate].
struct GruParams {
  int w_ih = -1;  // in x 3h
  int w_hh = -1;  // h x 3h
  int b = -1;     // 1 x 3h
  std::size_t hidden = 0;
  static GruParams create(ParamStore& store, const std::string& prefix, std::size_t in,
                          std::size_t hidden, std::mt19937_64& rng);
};

NodeId recurrent_cell_gru(Graph& g, ParamBinder& p, NodeId x_t, NodeId h, const GruParams& params);

/// Per-head full-input projections; head outputs are summed, not concatenated.
struct MhsaParams {
  std::vector<LinearParams> wq;
  std::vector<LinearParams> wk;
  std::vector<LinearParams> wv;
  std::size_t d_head = 0;
  static MhsaParams create(ParamStore& store, const std::string& prefix, std::size_t d_in,
                           std::size_t d_head, std::size_t heads, std::mt19937_64& rng);
};

/// Scaled dot-product attention over the rows of q_in/k_in/v_in. Offsets (if
/// given) are added to the score matrix before the softmax; use -1e9 entries to
/// mask positions.
NodeId multi_head_self_attention(Graph& g, ParamBinder& p, const MhsaParams& params, NodeId q_in,
                                 NodeId k_in, NodeId v_in, const Tensor* score_offsets = nullptr);

/// Lower-triangular score offsets (0 allowed, -1e9 for future positions).
Tensor causal_offsets(std::size_t t);

/// Symmetric normalization D^-1/2 (A + lambda I) D^-1/2 used by the GCN.
Tensor gcn_propagation(const Tensor& adjacency, double lambda_a);

/// relu(P (z W)) with P precomputed by gcn_propagation.
NodeId gcn_layer_pre(Graph& g, NodeId z, const Tensor& propagation, NodeId w);

/// Full GCN layer from a raw adjacency matrix.
NodeId gcn_layer(Graph& g, NodeId z, const Tensor& adjacency, NodeId w, double lambda_a = 1.0);

}  // namespace trajpred::nn
