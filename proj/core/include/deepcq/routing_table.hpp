#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace deepcq {

using NodeId = std::int32_t;

/// Protocol scalars shared by every table in a scenario.
///   lambda  — EMA decay for confidence updates
///   epsilon — minimum broadcast probability (exploration floor)
///   h_max   — hop-estimate ceiling; also the default for unseen routes
struct ProtocolParams {
  double lambda = 0.1;
  double epsilon = 0.05;
  double h_max = 16.0;
};

/// One (neighbor, destination) row: estimated hop count through that
/// neighbor and the confidence in the estimate.
struct Entry {
  double h = 0.0;  // >= 1
  double c = 0.0;  // in [0, 1]
};

/// Route information carried back to a transmitter by an ACK.
struct AckValues {
  double h_ack = 1.0;  // >= 1
  double c_ack = 0.0;  // in [0, 1]
};

/// Probability that a CQ+ node broadcasts given the confidence of its best
/// next hop: epsilon + (1 - c_best) * (1 - epsilon). Monotonically decreasing
/// in c_best, bounded in [epsilon, 1].
double broadcast_probability(double c_best, double epsilon);

/// Per-node learned routing state: a map (neighbor, destination) -> Entry.
/// Rows are created by ACKs; absent rows read as (h_max, 0), which makes
/// unknown routes least preferred without special-casing.
class RoutingTable {
 public:
  RoutingTable(NodeId owner, ProtocolParams params)
      : owner_(owner), params_(params) {}

  NodeId owner() const { return owner_; }
  const ProtocolParams& params() const { return params_; }

  /// Row values, falling back to the defaults for absent rows.
  Entry lookup(NodeId neighbor, NodeId destination) const;

  bool has_entry(NodeId neighbor, NodeId destination) const;

  /// Neighbors with a row for this destination, ascending by id. These are
  /// the candidates a node actually knows about; physical neighbors it has
  /// never received an ACK from are not in the set.
  std::vector<NodeId> known_neighbors(NodeId destination) const;

  /// argmin over candidates of h * (1 - c); ties broken by lowest node id.
  /// Empty candidate set returns nullopt.
  std::optional<NodeId> best_next_hop(NodeId destination,
                                      std::span<const NodeId> candidates) const;

  /// ACK values this node would return for a packet addressed to
  /// `destination`, per the given candidate set. At the destination itself
  /// the values are (1, 1); with no candidates they are the defaults.
  AckValues compute_ack_values(NodeId destination,
                               std::span<const NodeId> candidates) const;

  /// Convenience overload using known_neighbors(destination).
  AckValues compute_ack_values(NodeId destination) const;

  /// Success update on a received ACK:
  ///   alpha = max(c_ack, 1 - c)
  ///   h <- (1 - alpha) h + alpha h_ack
  ///   c <- (1 - lambda) c + lambda c_ack
  Entry update_on_ack(NodeId neighbor, NodeId destination, AckValues ack);

  /// Failure update when a unicast got no ACK: confidence decays by
  /// (1 - lambda), the hop estimate cannot be updated.
  Entry update_on_failure(NodeId neighbor, NodeId destination);

  /// Store a row directly (clamped to the legal ranges). Intended for
  /// seeding known states in experiments and tests; the protocol itself
  /// only writes rows through the two update functions.
  void set_entry(NodeId neighbor, NodeId destination, Entry entry);

  std::size_t size() const { return entries_.size(); }

  /// Debug dump: one line per row (neighbor, destination, h, c).
  void dump(std::ostream& os) const;

 private:
  Entry clamp(Entry e) const;

  NodeId owner_;
  ProtocolParams params_;
  std::map<std::pair<NodeId, NodeId>, Entry> entries_;
};

}  // namespace deepcq
