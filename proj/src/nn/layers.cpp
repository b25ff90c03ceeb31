#include "trajpred/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace trajpred::nn {

LinearParams LinearParams::create(ParamStore& store, const std::string& prefix, std::size_t in,
                                  std::size_t out, std::mt19937_64& rng) {
  LinearParams p;
  p.w = store.add(prefix + ".w", glorot_uniform(in, out, rng));
  p.b = store.add(prefix + ".b", Tensor::zeros(1, out));
  return p;
}

NodeId LinearParams::apply(Graph& g, ParamBinder& p, NodeId x) const {
  return g.add_rowvec(g.matmul(x, p.use(w)), p.use(b));
}

GluParams GluParams::create(ParamStore& store, const std::string& prefix, std::size_t in,
                            std::size_t out, std::mt19937_64& rng) {
  GluParams p;
  p.lin = LinearParams::create(store, prefix + ".lin", in, out, rng);
  p.gate = LinearParams::create(store, prefix + ".gate", in, out, rng);
  return p;
}

NodeId GluParams::apply(Graph& g, ParamBinder& p, NodeId x) const {
  return g.mul(lin.apply(g, p, x), g.sigmoid(gate.apply(g, p, x)));
}

NormParams NormParams::create(ParamStore& store, const std::string& prefix, std::size_t width) {
  NormParams p;
  p.gain = store.add(prefix + ".gain", Tensor::full(1, width, 1.0));
  p.bias = store.add(prefix + ".bias", Tensor::zeros(1, width));
  return p;
}

NodeId NormParams::layer_norm(Graph& g, ParamBinder& p, NodeId x, double eps) const {
  return g.layer_norm(x, p.use(gain), p.use(bias), eps);
}

NodeId NormParams::group_norm(Graph& g, ParamBinder& p, NodeId x, std::size_t groups,
                              double eps) const {
  return g.group_norm(x, groups, p.use(gain), p.use(bias), eps);
}

LstmParams LstmParams::create(ParamStore& store, const std::string& prefix, std::size_t in,
                              std::size_t hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.hidden = hidden;
  p.w_ih = store.add(prefix + ".w_ih", glorot_uniform(in, 4 * hidden, rng));
  p.w_hh = store.add(prefix + ".w_hh", glorot_uniform(hidden, 4 * hidden, rng));
  Tensor b = Tensor::zeros(1, 4 * hidden);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) b.at(i) = 1.0;  // forget gate
  p.b = store.add(prefix + ".b", std::move(b));
  return p;
}

LstmState recurrent_cell_lstm(Graph& g, ParamBinder& p, NodeId x_t, LstmState state,
                              const LstmParams& params) {
  std::size_t h = params.hidden;
  NodeId gates = g.add_rowvec(
      g.add(g.matmul(x_t, p.use(params.w_ih)), g.matmul(state.h, p.use(params.w_hh))),
      p.use(params.b));
  NodeId i = g.sigmoid(g.slice_cols(gates, 0, h));
  NodeId f = g.sigmoid(g.slice_cols(gates, h, h));
  NodeId cand = g.tanh_(g.slice_cols(gates, 2 * h, h));
  NodeId o = g.sigmoid(g.slice_cols(gates, 3 * h, h));
  NodeId c_next = g.add(g.mul(f, state.c), g.mul(i, cand));
  NodeId h_next = g.mul(o, g.tanh_(c_next));
  return {h_next, c_next};
}

GruParams GruParams::create(ParamStore& store, const std::string& prefix, std::size_t in,
                            std::size_t hidden, std::mt19937_64& rng) {
  GruParams p;
  p.hidden = hidden;
  p.w_ih = store.add(prefix + ".w_ih", glorot_uniform(in, 3 * hidden, rng));
  p.w_hh = store.add(prefix + ".w_hh", glorot_uniform(hidden, 3 * hidden, rng));
  p.b = store.add(prefix + ".b", Tensor::zeros(1, 3 * hidden));
  return p;
}

NodeId recurrent_cell_gru(Graph& g, ParamBinder& p, NodeId x_t, NodeId h, const GruParams& params) {
  std::size_t n = params.hidden;
  NodeId xg = g.add_rowvec(g.matmul(x_t, p.use(params.w_ih)), p.use(params.b));
  NodeId hg = g.matmul(h, p.use(params.w_hh));
  NodeId z = g.sigmoid(g.add(g.slice_cols(xg, 0, n), g.slice_cols(hg, 0, n)));
  NodeId r = g.sigmoid(g.add(g.slice_cols(xg, n, n), g.slice_cols(hg, n, n)));
  NodeId cand = g.tanh_(g.add(g.slice_cols(xg, 2 * n, n), g.mul(r, g.slice_cols(hg, 2 * n, n))));
  // h' = (1-z).*cand + z.*h
  return g.add(g.sub(cand, g.mul(z, cand)), g.mul(z, h));
}

MhsaParams MhsaParams::create(ParamStore& store, const std::string& prefix, std::size_t d_in,
                              std::size_t d_head, std::size_t heads, std::mt19937_64& rng) {
  MhsaParams p;
  p.d_head = d_head;
  for (std::size_t i = 0; i < heads; ++i) {
    std::string hp = prefix + ".h" + std::to_string(i);
    p.wq.push_back(LinearParams::create(store, hp + ".q", d_in, d_head, rng));
    p.wk.push_back(LinearParams::create(store, hp + ".k", d_in, d_head, rng));
    p.wv.push_back(LinearParams::create(store, hp + ".v", d_in, d_head, rng));
  }
  return p;
}

NodeId multi_head_self_attention(Graph& g, ParamBinder& p, const MhsaParams& params, NodeId q_in,
                                 NodeId k_in, NodeId v_in, const Tensor* score_offsets) {
  if (params.wq.empty()) throw std::invalid_argument("mhsa: needs at least one head");
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.d_head));
  NodeId out = -1;
  for (std::size_t i = 0; i < params.wq.size(); ++i) {
    NodeId q = params.wq[i].apply(g, p, q_in);
    NodeId k = params.wk[i].apply(g, p, k_in);
    NodeId v = params.wv[i].apply(g, p, v_in);
    NodeId scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_d);
    NodeId attn = g.softmax_rows(scores, score_offsets);
    NodeId head = g.matmul(attn, v);
    out = (out < 0) ? head : g.add(out, head);
  }
  return out;
}

Tensor causal_offsets(std::size_t t) {
  Tensor off(t, t);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = r + 1; c < t; ++c) off(r, c) = -1e9;
  }
  return off;
}

Tensor gcn_propagation(const Tensor& adjacency, double lambda_a) {
  if (adjacency.rows() != adjacency.cols()) {
    throw std::invalid_argument("gcn: adjacency must be square");
  }
  std::size_t n = adjacency.rows();
  Tensor a_tilde(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      a_tilde(r, c) = adjacency(r, c) + (r == c ? lambda_a : 0.0);
    }
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t r = 0; r < n; ++r) {
    double deg = 0.0;
    for (std::size_t c = 0; c < n; ++c) deg += a_tilde(r, c);
    if (deg <= 0.0) {
      throw std::invalid_argument("gcn: zero row sum at node " + std::to_string(r) +
                                  " (needs lambda_a > 0)");
    }
    inv_sqrt_deg[r] = 1.0 / std::sqrt(deg);
  }
  Tensor prop(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      prop(r, c) = inv_sqrt_deg[r] * a_tilde(r, c) * inv_sqrt_deg[c];
    }
  }
  return prop;
}

NodeId gcn_layer_pre(Graph& g, NodeId z, const Tensor& propagation, NodeId w) {
  return g.relu(g.matmul_const_left(propagation, g.matmul(z, w)));
}

NodeId gcn_layer(Graph& g, NodeId z, const Tensor& adjacency, NodeId w, double lambda_a) {
  return gcn_layer_pre(g, z, gcn_propagation(adjacency, lambda_a), w);
}

}  // namespace trajpred::nn
