#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "deepcq/config.hpp"
#include "deepcq/metrics.hpp"
#include "deepcq/mobility.hpp"
#include "deepcq/policy.hpp"
#include "deepcq/rng.hpp"
#include "deepcq/trace.hpp"

namespace deepcq {

struct Packet {
  int flow = 0;
  int seq = 0;
  NodeId source = -1;
  NodeId destination = -1;
  std::vector<NodeId> path;  // nodes traversed, beginning with the source
  bool arrived_via_broadcast = false;
  int birth_slot = 0;
};

struct NodeState {
  NodeId id = -1;
  NodeKinematics kin;
  WaypointState waypoint;  // random-waypoint leg state
  RoutingTable table;
  std::deque<Packet> queue;
  std::set<std::pair<int, int>> seen;  // (flow, seq) ever accepted
  int prev_action = 0;                 // this node's last broadcast/unicast

  NodeState(NodeId node_id, ProtocolParams params)
      : id(node_id), table(node_id, params) {}
};

enum class ReceiveOutcome { DroppedLoop, DroppedDuplicate, Delivered, Enqueued };

struct IncomingResult {
  ReceiveOutcome outcome = ReceiveOutcome::DroppedLoop;
  std::optional<AckValues> ack;  // absent exactly for the loop-drop case
  int delivery_hops = 0;
};

/// Reception state machine: a packet that already visited this node is
/// dropped without an ACK; a (flow, seq) already seen is dropped but ACKed;
/// the destination records the delivery and ACKs (1, 1); anything else is
/// enqueued with this node appended to the path. Mutates only `node`.
IncomingResult handle_incoming(NodeState& node, const Packet& packet,
                               bool via_broadcast);

/// One broadcast/unicast decision taken during an episode, together with
/// everything training needs: behavior-time observation, log-prob and value,
/// the transmission outcome, and retroactive delivery credit.
struct DecisionRecord {
  int slot = 0;
  NodeId node = -1;
  int flow = 0;
  int seq = 0;
  int action = 0;        // 0 unicast, 1 broadcast
  bool forced = false;   // no known next hop: compulsory broadcast, no choice
  double log_prob = 0.0;
  double value = 0.0;
  double c_best = 0.0;
  bool has_observation = false;
  Observation obs;
  int n_acks = 0;
  bool zero_ack = false;         // transmitted and nobody answered
  bool delivery_credit = false;  // the packet this decision forwarded reached
                                 // its destination this episode
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<DecisionRecord> decisions;  // with SimOptions::record_decisions
  std::vector<TraceEvent> trace;          // with SimOptions::record_trace
  int end_slot = 0;
  bool hit_cap = false;
};

struct SeededEntry {
  NodeId node = -1;
  NodeId neighbor = -1;
  NodeId destination = -1;
  Entry entry;
};

struct SimOptions {
  bool record_decisions = false;
  bool record_trace = false;
  /// Test seam: fixed initial placement instead of the seeded one.
  std::optional<std::vector<Vec2>> initial_positions;
  /// Test seam: routing rows installed before the first slot.
  std::vector<SeededEntry> initial_entries;
};

/// One episode of the slotted simulation. Each slot: inject traffic (while
/// the window is open), move nodes, recompute connectivity, then a two-phase
/// transmit step — decisions for every non-empty queue are sampled against
/// the slot-start state, then applied in node order. ACKs are instantaneous
/// and reliable within the slot. The episode ends when the traffic window
/// has closed and every queue is empty, or at the hard cap.
class Simulator {
 public:
  Simulator(const ScenarioConfig& cfg, DecisionPolicy& policy,
            std::uint64_t seed, SimOptions options = {});

  /// Runs the single episode this instance was built for.
  EpisodeResult run();

  const std::vector<NodeState>& nodes() const { return nodes_; }

  /// Closed-ball unit-disk adjacency, symmetric, self excluded; neighbor
  /// lists are ascending by node id.
  static std::vector<std::vector<NodeId>> connectivity(
      const std::vector<Vec2>& positions, double radio_range);

 private:
  void place_nodes();
  void inject(int slot);
  void move_nodes();
  void transmit(int slot, const std::vector<std::vector<NodeId>>& neighbors);
  void check_conservation(int slot) const;
  bool all_queues_empty() const;
  bool link_up();
  void record(TraceEvent e);
  void credit_delivery(const Packet& head, std::size_t sender_decision);

  ScenarioConfig cfg_;
  DecisionPolicy* policy_;
  SimOptions opts_;
  RegionLayout regions_;
  RngStream init_rng_;
  RngStream mobility_rng_;
  RngStream link_rng_;
  RngStream policy_rng_;
  std::vector<NodeState> nodes_;
  std::vector<int> flow_seq_;
  EpisodeMetrics metrics_;
  std::vector<TraceEvent> trace_;
  std::vector<DecisionRecord> decisions_;
  // (flow, seq, node) -> decision that forwarded that packet at that node
  std::map<std::tuple<int, int, NodeId>, std::size_t> forward_index_;
  // conservation counters
  long long generated_ = 0;
  long long enqueued_ = 0;
  long long forwarded_ = 0;
  long long receptions_ = 0;
  bool ran_ = false;
};

}  // namespace deepcq
