#include "deepcq/routing_table.hpp"

#include <algorithm>
#include <ostream>

#include "deepcq/util.hpp"

namespace deepcq {

double broadcast_probability(double c_best, double epsilon) {
  return epsilon + (1.0 - c_best) * (1.0 - epsilon);
}

Entry RoutingTable::lookup(NodeId neighbor, NodeId destination) const {
  auto it = entries_.find({neighbor, destination});
  if (it == entries_.end()) return Entry{params_.h_max, 0.0};
  return it->second;
}

bool RoutingTable::has_entry(NodeId neighbor, NodeId destination) const {
  return entries_.contains({neighbor, destination});
}

std::vector<NodeId> RoutingTable::known_neighbors(NodeId destination) const {
  std::vector<NodeId> out;
  for (const auto& [key, entry] : entries_) {
    if (key.second == destination) out.push_back(key.first);
  }
  return out;  // map iteration order keeps ids ascending
}

std::optional<NodeId> RoutingTable::best_next_hop(
    NodeId destination, std::span<const NodeId> candidates) const {
  std::optional<NodeId> best;
  double best_key = 0.0;
  for (NodeId j : candidates) {
    const Entry e = lookup(j, destination);
    const double key = e.h * (1.0 - e.c);
    if (!best || key < best_key || (key == best_key && j < *best)) {
      best = j;
      best_key = key;
    }
  }
  return best;
}

AckValues RoutingTable::compute_ack_values(
    NodeId destination, std::span<const NodeId> candidates) const {
  if (owner_ == destination) return AckValues{1.0, 1.0};
  const auto k_hat = best_next_hop(destination, candidates);
  if (!k_hat) return AckValues{params_.h_max, 0.0};
  const Entry e = lookup(*k_hat, destination);
  return AckValues{1.0 + e.h, e.c};
}

AckValues RoutingTable::compute_ack_values(NodeId destination) const {
  const auto candidates = known_neighbors(destination);
  return compute_ack_values(destination, candidates);
}

Entry RoutingTable::clamp(Entry e) const {
  e.h = std::clamp(e.h, 1.0, params_.h_max);
  e.c = std::clamp(e.c, 0.0, 1.0);
  return e;
}

Entry RoutingTable::update_on_ack(NodeId neighbor, NodeId destination,
                                  AckValues ack) {
  const Entry cur = lookup(neighbor, destination);
  const double alpha = std::max(ack.c_ack, 1.0 - cur.c);
  Entry next;
  next.h = (1.0 - alpha) * cur.h + alpha * ack.h_ack;
  next.c = (1.0 - params_.lambda) * cur.c + params_.lambda * ack.c_ack;
  next = clamp(next);
  entries_[{neighbor, destination}] = next;
  return next;
}

Entry RoutingTable::update_on_failure(NodeId neighbor, NodeId destination) {
  const Entry cur = lookup(neighbor, destination);
  Entry next = cur;
  next.c = (1.0 - params_.lambda) * cur.c;
  next = clamp(next);
  entries_[{neighbor, destination}] = next;
  return next;
}

void RoutingTable::set_entry(NodeId neighbor, NodeId destination, Entry entry) {
  entries_[{neighbor, destination}] = clamp(entry);
}

void RoutingTable::dump(std::ostream& os) const {
  os << "table node=" << owner_ << " rows=" << entries_.size() << "\n";
  for (const auto& [key, e] : entries_) {
    os << "  via=" << key.first << " dest=" << key.second
       << " h=" << format_double(e.h) << " c=" << format_double(e.c) << "\n";
  }
}

}  // namespace deepcq
