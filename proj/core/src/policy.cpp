#include "deepcq/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deepcq/util.hpp"

namespace deepcq {

// ---------------------------------------------------------------------------
// Observation construction
// ---------------------------------------------------------------------------

std::vector<KBestEntry> sort_k_best(const RoutingTable& table,
                                    NodeId destination,
                                    std::span<const NodeId> candidates,
                                    int k) {
  std::vector<KBestEntry> entries;
  entries.reserve(candidates.size());
  for (NodeId n : candidates) {
    const Entry e = table.lookup(n, destination);
    entries.push_back({n, e.h, e.c});
  }
  std::sort(entries.begin(), entries.end(),
            [](const KBestEntry& a, const KBestEntry& b) {
              const double ka = a.h * (1.0 - a.c);
              const double kb = b.h * (1.0 - b.c);
              if (ka != kb) return ka < kb;
              return a.neighbor < b.neighbor;
            });
  entries.resize(static_cast<std::size_t>(k),
                 KBestEntry{-1, table.params().h_max, 0.0});
  return entries;
}

ObservationBuilder::ObservationBuilder(int k, double h_max)
    : k_(k), h_max_(h_max) {}

void ObservationBuilder::reset() { prev_.clear(); }

Observation ObservationBuilder::build(const RoutingTable& table,
                                      NodeId destination,
                                      std::span<const NodeId> candidates,
                                      int prev_action, int arrival_flag) {
  const auto kb = sort_k_best(table, destination, candidates, k_);
  std::vector<double> c(static_cast<std::size_t>(k_));
  std::vector<double> h(static_cast<std::size_t>(k_));
  for (int i = 0; i < k_; ++i) {
    c[static_cast<std::size_t>(i)] = kb[static_cast<std::size_t>(i)].c;
    h[static_cast<std::size_t>(i)] =
        kb[static_cast<std::size_t>(i)].h / h_max_;
  }

  Observation obs;
  obs.features.reserve(static_cast<std::size_t>(observation_length(k_)));
  obs.features.insert(obs.features.end(), c.begin(), c.end());
  obs.features.insert(obs.features.end(), h.begin(), h.end());

  const auto it = prev_.find(destination);
  for (int i = 0; i < k_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    obs.features.push_back(it == prev_.end() ? 0.0 : c[u] - it->second.c[u]);
  }
  for (int i = 0; i < k_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    obs.features.push_back(it == prev_.end() ? 0.0 : h[u] - it->second.h[u]);
  }
  obs.features.push_back(static_cast<double>(prev_action));
  obs.features.push_back(static_cast<double>(arrival_flag));

  prev_[destination] = Cached{std::move(c), std::move(h)};
  return obs;
}

// ---------------------------------------------------------------------------
// Shared policy network
// ---------------------------------------------------------------------------

namespace {

/// y = W x + b for one parameter segment.
void affine(const double* params, const PolicyNetwork::Segment& seg,
            const double* x, double* y) {
  const double* w = params + seg.offset;
  const double* b = params + seg.bias_offset();
  for (int r = 0; r < seg.rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * seg.cols;
    double acc = b[r];
    for (int c = 0; c < seg.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void softmax2(const std::array<double, 2>& logits, std::array<double, 2>& p) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double z = e0 + e1;
  p[0] = e0 / z;
  p[1] = e1 / z;
}

}  // namespace

PolicyNetwork::PolicyNetwork(int input_dim) : input_dim_(input_dim) {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  const std::array<const char*, 4> names{"hidden0", "hidden1", "hidden2",
                                         "hidden3"};
  std::size_t offset = 0;
  int in = input_dim;
  for (std::size_t i = 0; i < kHidden.size(); ++i) {
    Segment seg{names[i], kHidden[i], in, offset};
    offset += seg.size();
    segments_.push_back(seg);
    in = kHidden[i];
  }
  segments_.push_back(Segment{"action_head", 2, in, offset});
  offset += segments_.back().size();
  segments_.push_back(Segment{"value_head", 1, in, offset});
  offset += segments_.back().size();
  params_.assign(offset, 0.0);
}

void PolicyNetwork::randomize(RngStream& rng) {
  for (const Segment& seg : segments_) {
    // Glorot-uniform weights, zero biases; the action head starts small so
    // the initial policy is close to uniform.
    const double limit = std::sqrt(6.0 / (seg.rows + seg.cols));
    const double scale = seg.name == "action_head" ? 0.01 : 1.0;
    for (int i = 0; i < seg.rows * seg.cols; ++i) {
      params_[seg.offset + static_cast<std::size_t>(i)] =
          scale * rng.uniform(-limit, limit);
    }
    for (int r = 0; r < seg.rows; ++r) {
      params_[seg.bias_offset() + static_cast<std::size_t>(r)] = 0.0;
    }
  }
}

PolicyNetwork::Output PolicyNetwork::forward(
    std::span<const double> input) const {
  ForwardTrace trace;
  return forward(input, trace);
}

PolicyNetwork::Output PolicyNetwork::forward(std::span<const double> input,
                                             ForwardTrace& trace) const {
  if (static_cast<int>(input.size()) != input_dim_) {
    throw std::invalid_argument(
        "observation length " + std::to_string(input.size()) +
        " does not match network input " + std::to_string(input_dim_));
  }
  const double* p = params_.data();
  const double* x = input.data();
  for (std::size_t i = 0; i < kHidden.size(); ++i) {
    const Segment& seg = segments_[i];
    auto& h = trace.hidden[i];
    h.resize(static_cast<std::size_t>(seg.rows));
    affine(p, seg, x, h.data());
    for (double& v : h) v = std::tanh(v);
    x = h.data();
  }
  Output out;
  affine(p, segments_[4], x, out.logits.data());
  double value = 0.0;
  affine(p, segments_[5], x, &value);
  out.value = value;
  softmax2(out.logits, out.probs);
  return out;
}

void PolicyNetwork::backward(const ForwardTrace& trace,
                             std::span<const double> input,
                             const std::array<double, 2>& dlogits,
                             double dvalue, std::span<double> grad) const {
  const double* p = params_.data();
  double* g = grad.data();
  const auto& h_last = trace.hidden.back();  // width 4

  // dLoss/d(last hidden), fed by both heads.
  std::array<double, 16> dh{};
  {
    const Segment& a = segments_[4];
    for (int r = 0; r < a.rows; ++r) {
      const std::size_t row = a.offset + static_cast<std::size_t>(r) * a.cols;
      for (int c = 0; c < a.cols; ++c) {
        g[row + static_cast<std::size_t>(c)] +=
            dlogits[static_cast<std::size_t>(r)] *
            h_last[static_cast<std::size_t>(c)];
        dh[static_cast<std::size_t>(c)] +=
            dlogits[static_cast<std::size_t>(r)] *
            p[row + static_cast<std::size_t>(c)];
      }
      g[a.bias_offset() + static_cast<std::size_t>(r)] +=
          dlogits[static_cast<std::size_t>(r)];
    }
    const Segment& v = segments_[5];
    for (int c = 0; c < v.cols; ++c) {
      g[v.offset + static_cast<std::size_t>(c)] +=
          dvalue * h_last[static_cast<std::size_t>(c)];
      dh[static_cast<std::size_t>(c)] +=
          dvalue * p[v.offset + static_cast<std::size_t>(c)];
    }
    g[v.bias_offset()] += dvalue;
  }

  // Hidden layers, last to first. tanh' = 1 - tanh^2 uses the cached
  // post-activation values.
  for (int layer = static_cast<int>(kHidden.size()) - 1; layer >= 0; --layer) {
    const Segment& seg = segments_[static_cast<std::size_t>(layer)];
    const auto& h = trace.hidden[static_cast<std::size_t>(layer)];
    const double* prev =
        layer == 0 ? input.data()
                   : trace.hidden[static_cast<std::size_t>(layer - 1)].data();

    std::array<double, 16> dz{};
    for (int r = 0; r < seg.rows; ++r) {
      const double a = h[static_cast<std::size_t>(r)];
      dz[static_cast<std::size_t>(r)] =
          dh[static_cast<std::size_t>(r)] * (1.0 - a * a);
    }
    // dprev is only needed above the input layer; its fixed width covers the
    // hidden layers, while layer 0's predecessor (the input, 4K+2 wide) can
    // be wider than any hidden layer and receives no gradient.
    std::array<double, 16> dprev{};
    for (int r = 0; r < seg.rows; ++r) {
      const std::size_t row =
          seg.offset + static_cast<std::size_t>(r) * seg.cols;
      const double dzr = dz[static_cast<std::size_t>(r)];
      for (int c = 0; c < seg.cols; ++c) {
        g[row + static_cast<std::size_t>(c)] +=
            dzr * prev[static_cast<std::size_t>(c)];
      }
      if (layer > 0) {
        for (int c = 0; c < seg.cols; ++c) {
          dprev[static_cast<std::size_t>(c)] +=
              dzr * p[row + static_cast<std::size_t>(c)];
        }
      }
      g[seg.bias_offset() + static_cast<std::size_t>(r)] += dzr;
    }
    dh = dprev;
  }
}

int sample_action(const PolicyNetwork::Output& out, RngStream& rng) {
  return rng.bernoulli(out.probs[1]) ? 1 : 0;
}

double action_log_prob(const PolicyNetwork::Output& out, int action) {
  const double m = std::max(out.logits[0], out.logits[1]);
  const double lse =
      m + std::log(std::exp(out.logits[0] - m) + std::exp(out.logits[1] - m));
  return out.logits[static_cast<std::size_t>(action)] - lse;
}

double distribution_entropy(const std::array<double, 2>& probs) {
  double h = 0.0;
  for (double pr : probs) {
    if (pr > 0.0) h -= pr * std::log(pr);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Weight persistence
// ---------------------------------------------------------------------------

std::string weights_to_text(const PolicyNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  const auto params = net.parameters();
  for (const auto& seg : net.segments()) {
    std::vector<double> w(params.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                          params.begin() + static_cast<std::ptrdiff_t>(seg.bias_offset()));
    std::vector<double> b(params.begin() + static_cast<std::ptrdiff_t>(seg.bias_offset()),
                          params.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size()));
    layers.push_back({{"name", seg.name},
                      {"rows", seg.rows},
                      {"cols", seg.cols},
                      {"weights", w},
                      {"bias", b}});
  }
  nlohmann::json doc{{"format", "deepcq-weights"},
                     {"version", 1},
                     {"input_dim", net.input_dim()},
                     {"layers", layers}};
  return doc.dump(1) + "\n";
}

PolicyNetwork weights_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::out_of_range& e) {
    // Number overflow: the file encodes a value outside double range.
    if (e.id == 406) {
      throw WeightsError(std::string("weights file has a non-finite value: ") +
                         e.what());
    }
    throw WeightsError(std::string("malformed weights file: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError(std::string("malformed weights file: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "deepcq-weights") {
    throw WeightsError("not a weights file (missing format marker)");
  }
  if (doc.value("version", 0) != 1) {
    throw WeightsError("unsupported weights version");
  }
  int input_dim = 0;
  try {
    input_dim = doc.at("input_dim").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw WeightsError("malformed weights file: missing input_dim");
  }
  if (input_dim < 1) throw WeightsError("input_dim must be >= 1");

  PolicyNetwork net(input_dim);
  if (!doc.contains("layers") || !doc.at("layers").is_array() ||
      doc.at("layers").size() != net.segments().size()) {
    throw WeightsError("malformed weights file: expected " +
                       std::to_string(net.segments().size()) + " layers");
  }
  auto params = net.parameters();
  for (std::size_t i = 0; i < net.segments().size(); ++i) {
    const auto& seg = net.segments()[i];
    const auto& jl = doc.at("layers")[i];
    std::vector<double> w, b;
    int rows = 0, cols = 0;
    std::string name;
    try {
      name = jl.at("name").get<std::string>();
      rows = jl.at("rows").get<int>();
      cols = jl.at("cols").get<int>();
      w = jl.at("weights").get<std::vector<double>>();
      b = jl.at("bias").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw WeightsError("layer '" + seg.name + "': malformed (" + e.what() +
                         ")");
    }
    if (name != seg.name) {
      throw WeightsError("layer " + std::to_string(i) + ": expected '" +
                         seg.name + "', found '" + name + "'");
    }
    if (rows != seg.rows || cols != seg.cols ||
        w.size() != static_cast<std::size_t>(seg.rows) * seg.cols ||
        b.size() != static_cast<std::size_t>(seg.rows)) {
      throw WeightsError("layer '" + seg.name + "': shape mismatch (expected " +
                         std::to_string(seg.rows) + "x" +
                         std::to_string(seg.cols) + ")");
    }
    for (double v : w) {
      if (!std::isfinite(v)) {
        throw WeightsError("layer '" + seg.name + "': non-finite value");
      }
    }
    for (double v : b) {
      if (!std::isfinite(v)) {
        throw WeightsError("layer '" + seg.name + "': non-finite value");
      }
    }
    std::copy(w.begin(), w.end(),
              params.begin() + static_cast<std::ptrdiff_t>(seg.offset));
    std::copy(b.begin(), b.end(),
              params.begin() + static_cast<std::ptrdiff_t>(seg.bias_offset()));
  }
  return net;
}

void save_weights(const PolicyNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw WeightsError("cannot open weights file for writing: " + path);
  out << weights_to_text(net);
  if (!out) throw WeightsError("failed writing weights file: " + path);
}

PolicyNetwork load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WeightsError("cannot open weights file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return weights_from_text(buf.str());
}

std::uint64_t weights_hash(const PolicyNetwork& net) {
  return fnv1a64(weights_to_text(net));
}

// ---------------------------------------------------------------------------
// Routing decision policies
// ---------------------------------------------------------------------------

namespace {

double best_confidence(const DecisionContext& ctx) {
  const auto best = ctx.table->best_next_hop(ctx.destination, ctx.candidates);
  if (!best) return 0.0;
  return ctx.table->lookup(*best, ctx.destination).c;
}

}  // namespace

PolicyDecision CqPolicy::decide(const DecisionContext& ctx, RngStream& rng) {
  (void)rng;
  PolicyDecision d;
  d.action = 0;
  d.c_best = best_confidence(ctx);
  return d;
}

PolicyDecision CqPlusPolicy::decide(const DecisionContext& ctx,
                                    RngStream& rng) {
  PolicyDecision d;
  d.c_best = best_confidence(ctx);
  const double p_bc =
      broadcast_probability(d.c_best, ctx.table->params().epsilon);
  d.action = rng.bernoulli(p_bc) ? 1 : 0;
  return d;
}

DeepCqPolicy::DeepCqPolicy(const PolicyNetwork& net, int k)
    : net_(&net), k_(k) {}

void DeepCqPolicy::reset() { builders_.clear(); }

PolicyDecision DeepCqPolicy::decide(const DecisionContext& ctx,
                                    RngStream& rng) {
  auto [it, inserted] =
      builders_.try_emplace(ctx.node, k_, ctx.table->params().h_max);
  Observation obs = it->second.build(*ctx.table, ctx.destination,
                                     ctx.candidates, ctx.prev_action,
                                     ctx.arrival_flag);
  const auto out = net_->forward(obs.features);

  PolicyDecision d;
  d.action = sample_action(out, rng);
  d.log_prob = action_log_prob(out, d.action);
  d.value = out.value;
  d.c_best = best_confidence(ctx);
  d.has_observation = true;
  d.obs = std::move(obs);
  return d;
}

}  // namespace deepcq
