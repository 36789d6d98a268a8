#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "deepcq/rng.hpp"
#include "deepcq/routing_table.hpp"

namespace deepcq {

// ---------------------------------------------------------------------------
// Observation construction
// ---------------------------------------------------------------------------

/// Feature layout: [c_1..c_K, h_1..h_K, dc_1..dc_K, dh_1..dh_K, a_prev,
/// p_prev]. The K slots are sorted ascending by h*(1-c) (ties by node id),
/// h entries are normalized by h_max, and the delta vectors are slot-wise
/// differences against the previous observation built for the same
/// destination (zero on the first one). Length is 4K+2, independent of
/// network size — the same policy runs at any N.
struct Observation {
  std::vector<double> features;

  double c_best() const { return features.empty() ? 0.0 : features[0]; }
};

constexpr int observation_length(int k) { return 4 * k + 2; }

struct KBestEntry {
  NodeId neighbor = -1;  // -1 marks a padding slot
  double h = 0.0;
  double c = 0.0;
};

/// Sorts candidates ascending by h*(1-c) with ties broken by node id, keeps
/// the best k, and pads missing slots with (h_max, 0). The result is
/// independent of the input order.
std::vector<KBestEntry> sort_k_best(const RoutingTable& table,
                                    NodeId destination,
                                    std::span<const NodeId> candidates, int k);

/// Builds observations for one node, remembering the previously built sorted
/// vectors per destination so the delta features can be formed.
class ObservationBuilder {
 public:
  ObservationBuilder(int k, double h_max);

  Observation build(const RoutingTable& table, NodeId destination,
                    std::span<const NodeId> candidates, int prev_action,
                    int arrival_flag);
  void reset();

 private:
  int k_;
  double h_max_;
  struct Cached {
    std::vector<double> c, h;
  };
  std::map<NodeId, Cached> prev_;  // keyed by destination
};

// ---------------------------------------------------------------------------
// Shared policy network
// ---------------------------------------------------------------------------

/// Dense network input -> 16 -> 8 -> 8 -> 4 (tanh) with two linear heads:
/// 2 action logits (index 0 = unicast, 1 = broadcast) and 1 state value.
/// Parameters live in one flat vector so the optimizer and the gradient
/// checks can treat the network as a plain function of its parameters.
class PolicyNetwork {
 public:
  static constexpr std::array<int, 4> kHidden{16, 8, 8, 4};

  explicit PolicyNetwork(int input_dim);

  int input_dim() const { return input_dim_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Glorot-uniform initialization; action-head weights are scaled down so
  /// the initial policy is near-uniform.
  void randomize(RngStream& rng);

  struct Output {
    std::array<double, 2> logits{};
    std::array<double, 2> probs{};
    double value = 0.0;

    double p_unicast() const { return probs[0]; }
    double p_broadcast() const { return probs[1]; }
  };

  Output forward(std::span<const double> input) const;

  /// Post-activation values of the hidden layers, kept for backpropagation.
  struct ForwardTrace {
    std::array<std::vector<double>, kHidden.size()> hidden;
  };
  Output forward(std::span<const double> input, ForwardTrace& trace) const;

  /// Accumulates dLoss/dParam into `grad` (same layout as parameters())
  /// given the loss gradients at the two heads.
  void backward(const ForwardTrace& trace, std::span<const double> input,
                const std::array<double, 2>& dlogits, double dvalue,
                std::span<double> grad) const;

  /// One named parameter block: weights (rows x cols, row-major) at `offset`,
  /// followed by `rows` bias entries.
  struct Segment {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;

    std::size_t bias_offset() const {
      return offset + static_cast<std::size_t>(rows) * cols;
    }
    std::size_t size() const {
      return static_cast<std::size_t>(rows) * (cols + 1);
    }
  };
  const std::vector<Segment>& segments() const { return segments_; }

 private:
  int input_dim_;
  std::vector<Segment> segments_;
  std::vector<double> params_;
};

/// Draws from the 2-point action distribution: broadcast with p_broadcast.
int sample_action(const PolicyNetwork::Output& out, RngStream& rng);

/// log pi(action) computed from the logits (stable log-softmax).
double action_log_prob(const PolicyNetwork::Output& out, int action);

/// Entropy of the 2-point distribution, in nats.
double distribution_entropy(const std::array<double, 2>& probs);

// ---------------------------------------------------------------------------
// Weight persistence
// ---------------------------------------------------------------------------

class WeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string weights_to_text(const PolicyNetwork& net);
PolicyNetwork weights_from_text(const std::string& text);
void save_weights(const PolicyNetwork& net, const std::string& path);
PolicyNetwork load_weights(const std::string& path);

/// Identifier embedded in result rows; hash of the serialized weights.
std::uint64_t weights_hash(const PolicyNetwork& net);

// ---------------------------------------------------------------------------
// Routing decision policies
// ---------------------------------------------------------------------------

struct DecisionContext {
  const RoutingTable* table = nullptr;
  NodeId node = -1;
  NodeId destination = -1;
  std::span<const NodeId> candidates;  // neighbors with table rows; non-empty
  int prev_action = 0;                 // this node's previous action
  int arrival_flag = 0;                // head packet arrived via broadcast
};

struct PolicyDecision {
  int action = 0;  // 0 unicast, 1 broadcast
  double log_prob = 0.0;
  double value = 0.0;
  double c_best = 0.0;  // confidence of the current best next hop
  bool has_observation = false;
  Observation obs;
};

class DecisionPolicy {
 public:
  virtual ~DecisionPolicy() = default;
  virtual PolicyDecision decide(const DecisionContext& ctx, RngStream& rng) = 0;
  virtual void reset() {}  // called at episode start
  virtual std::string_view name() const = 0;
};

/// Plain confidence-based Q-routing: always unicast to the best next hop.
class CqPolicy : public DecisionPolicy {
 public:
  PolicyDecision decide(const DecisionContext& ctx, RngStream& rng) override;
  std::string_view name() const override { return "cq"; }
};

/// Selective broadcast: broadcast with probability eps + (1-c_best)(1-eps).
class CqPlusPolicy : public DecisionPolicy {
 public:
  PolicyDecision decide(const DecisionContext& ctx, RngStream& rng) override;
  std::string_view name() const override { return "cq+"; }
};

/// Neural broadcast/unicast decision from the shared policy network. One
/// instance serves one simulated network; per-node observation builders keep
/// the delta features. The network is owned by the caller and treated as an
/// immutable snapshot while episodes run.
class DeepCqPolicy : public DecisionPolicy {
 public:
  DeepCqPolicy(const PolicyNetwork& net, int k);

  PolicyDecision decide(const DecisionContext& ctx, RngStream& rng) override;
  void reset() override;
  std::string_view name() const override { return "deepcq+"; }

 private:
  const PolicyNetwork* net_;
  int k_;
  std::map<NodeId, ObservationBuilder> builders_;  // keyed by node id
};

}  // namespace deepcq
