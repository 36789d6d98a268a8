#include "deepcq/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace deepcq {

IncomingResult handle_incoming(NodeState& node, const Packet& packet,
                               bool via_broadcast) {
  IncomingResult r;
  if (std::find(packet.path.begin(), packet.path.end(), node.id) !=
      packet.path.end()) {
    r.outcome = ReceiveOutcome::DroppedLoop;  // drop, no ACK
    return r;
  }
  const auto key = std::pair{packet.flow, packet.seq};
  if (node.seen.count(key)) {
    r.outcome = ReceiveOutcome::DroppedDuplicate;  // drop but ACK
    r.ack = node.table.compute_ack_values(packet.destination);
    return r;
  }
  if (node.id == packet.destination) {
    node.seen.insert(key);
    r.outcome = ReceiveOutcome::Delivered;
    r.ack = node.table.compute_ack_values(packet.destination);  // (1, 1)
    r.delivery_hops = static_cast<int>(packet.path.size());
    return r;
  }
  Packet copy = packet;
  copy.path.push_back(node.id);
  copy.arrived_via_broadcast = via_broadcast;
  node.queue.push_back(std::move(copy));
  node.seen.insert(key);
  r.outcome = ReceiveOutcome::Enqueued;
  r.ack = node.table.compute_ack_values(packet.destination);
  return r;
}

std::vector<std::vector<NodeId>> Simulator::connectivity(
    const std::vector<Vec2>& positions, double radio_range) {
  const auto n = positions.size();
  std::vector<std::vector<NodeId>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance(positions[i], positions[j]) <= radio_range) {
        neighbors[i].push_back(static_cast<NodeId>(j));
        neighbors[j].push_back(static_cast<NodeId>(i));
      }
    }
  }
  return neighbors;
}

Simulator::Simulator(const ScenarioConfig& cfg, DecisionPolicy& policy,
                     std::uint64_t seed, SimOptions options)
    : cfg_(cfg),
      policy_(&policy),
      opts_(std::move(options)),
      init_rng_(make_stream(seed, "init", 0, 0)),
      mobility_rng_(make_stream(seed, "mobility", 0, 0)),
      link_rng_(make_stream(seed, "links", 0, 0)),
      policy_rng_(make_stream(seed, "policy", 0, 0)) {
  if (auto errors = validate_scenario(cfg_); !errors.empty()) {
    throw ConfigError(std::move(errors));
  }
  flow_seq_.assign(cfg_.flows.size(), 0);
}

void Simulator::record(TraceEvent e) {
  if (opts_.record_trace) trace_.push_back(e);
}

void Simulator::place_nodes() {
  const auto n = static_cast<std::size_t>(cfg_.nodes);
  nodes_.reserve(n);
  // Flow endpoints are pinned to the outer bands: sources on the left edge
  // strip, destinations on the right, so traffic crosses the speed regions.
  std::vector<int> band(n, -1);
  for (const auto& f : cfg_.flows) {
    band[static_cast<std::size_t>(f.source)] = 0;
    band[static_cast<std::size_t>(f.destination)] = 4;
  }
  const double w = cfg_.arena.effective_width();
  const double h = cfg_.arena.effective_height();
  for (std::size_t i = 0; i < n; ++i) {
    NodeState node(static_cast<NodeId>(i), cfg_.protocol);
    const double x = band[i] < 0
                         ? init_rng_.uniform(0.0, w)
                         : init_rng_.uniform(band[i] * w / 5.0,
                                             (band[i] + 1) * w / 5.0);
    node.kin.position = {x, init_rng_.uniform(0.0, h)};
    switch (cfg_.mobility.model) {
      case MobilityModel::Static:
        break;
      case MobilityModel::GaussMarkov: {
        const double mult = regions_.multiplier_at(cfg_.arena, x);
        const double mean = cfg_.mobility.mean_speed * cfg_.mobility.dynamic_scale;
        const double sigma = std::sqrt(cfg_.mobility.speed_variance *
                                       cfg_.mobility.dynamic_scale * mult);
        node.kin.speed = std::abs(init_rng_.normal(mean, sigma));
        node.kin.heading = init_rng_.uniform(0.0, 2.0 * M_PI);
        break;
      }
      case MobilityModel::RandomWaypoint: {
        node.waypoint.target = {init_rng_.uniform(0.0, w),
                                init_rng_.uniform(0.0, h)};
        node.waypoint.leg_speed = init_rng_.uniform(
            cfg_.mobility.speed_min * cfg_.mobility.dynamic_scale,
            cfg_.mobility.speed_max * cfg_.mobility.dynamic_scale);
        node.kin.speed = node.waypoint.leg_speed;
        node.kin.heading =
            std::atan2(node.waypoint.target.y - node.kin.position.y,
                       node.waypoint.target.x - node.kin.position.x);
        break;
      }
    }
    nodes_.push_back(std::move(node));
  }
  if (opts_.initial_positions) {
    if (opts_.initial_positions->size() != n) {
      throw std::invalid_argument("initial_positions size != nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
      nodes_[i].kin.position = (*opts_.initial_positions)[i];
    }
  }
  for (const auto& seeded : opts_.initial_entries) {
    if (seeded.node < 0 || seeded.node >= static_cast<NodeId>(n)) {
      throw std::invalid_argument("initial_entries node id out of range");
    }
    nodes_[seeded.node].table.set_entry(seeded.neighbor, seeded.destination,
                                        seeded.entry);
  }
}

void Simulator::inject(int slot) {
  for (std::size_t f = 0; f < cfg_.flows.size(); ++f) {
    const auto& flow = cfg_.flows[f];
    if (slot % flow.inter_arrival != 0) continue;
    Packet p;
    p.flow = static_cast<int>(f);
    p.seq = flow_seq_[f]++;
    p.source = flow.source;
    p.destination = flow.destination;
    p.path = {flow.source};
    p.birth_slot = slot;
    auto& src = nodes_[static_cast<std::size_t>(flow.source)];
    src.seen.insert({p.flow, p.seq});
    record({slot, flow.source, EventKind::Generate, p.flow, p.seq,
            flow.destination, 0});
    src.queue.push_back(std::move(p));
    ++generated_;
    ++metrics_.packets_entered;
  }
}

void Simulator::move_nodes() {
  for (auto& node : nodes_) {
    switch (cfg_.mobility.model) {
      case MobilityModel::Static:
        break;
      case MobilityModel::GaussMarkov: {
        const double mult =
            regions_.multiplier_at(cfg_.arena, node.kin.position.x);
        node.kin = gauss_markov_step(node.kin, cfg_.mobility, mult, cfg_.arena,
                                     mobility_rng_);
        break;
      }
      case MobilityModel::RandomWaypoint:
        node.kin = random_waypoint_step(node.kin, node.waypoint, cfg_.mobility,
                                        cfg_.arena, mobility_rng_);
        break;
    }
  }
}

bool Simulator::link_up() {
  // Perfect links draw nothing, so the stream stays aligned across policies.
  if (cfg_.link_reliability >= 1.0) return true;
  return link_rng_.bernoulli(cfg_.link_reliability);
}

void Simulator::credit_delivery(const Packet& head,
                                std::size_t sender_decision) {
  // Everyone on the delivered path forwarded this packet exactly once; the
  // sender's own forward entry is not written yet, so credit it directly.
  if (!head.path.empty()) {
    for (std::size_t i = 0; i + 1 < head.path.size(); ++i) {
      const auto it =
          forward_index_.find({head.flow, head.seq, head.path[i]});
      if (it != forward_index_.end()) {
        decisions_[it->second].delivery_credit = true;
      }
    }
  }
  if (sender_decision != SIZE_MAX) {
    decisions_[sender_decision].delivery_credit = true;
  }
}

void Simulator::transmit(int slot,
                         const std::vector<std::vector<NodeId>>& neighbors) {
  struct Pending {
    NodeId node;
    int action;
    bool forced;
    NodeId target;  // unicast only
    std::size_t decision_index;
  };
  std::vector<Pending> pending;

  // Phase A: sample every decision against the slot-start state.
  for (auto& node : nodes_) {
    if (node.queue.empty()) continue;
    const Packet& head = node.queue.front();
    const auto candidates = node.table.known_neighbors(head.destination);

    PolicyDecision d;
    const bool forced = candidates.empty();
    if (forced) {
      d.action = 1;  // nobody known toward the destination: flood
    } else {
      DecisionContext ctx;
      ctx.table = &node.table;
      ctx.node = node.id;
      ctx.destination = head.destination;
      ctx.candidates = candidates;
      ctx.prev_action = node.prev_action;
      ctx.arrival_flag = head.arrived_via_broadcast ? 1 : 0;
      d = policy_->decide(ctx, policy_rng_);
    }

    NodeId target = -1;
    if (!forced && d.action == 0) {
      target = *node.table.best_next_hop(head.destination, candidates);
    }

    std::size_t idx = SIZE_MAX;
    if (opts_.record_decisions) {
      DecisionRecord rec;
      rec.slot = slot;
      rec.node = node.id;
      rec.flow = head.flow;
      rec.seq = head.seq;
      rec.action = d.action;
      rec.forced = forced;
      rec.log_prob = d.log_prob;
      rec.value = d.value;
      rec.c_best = d.c_best;
      rec.has_observation = d.has_observation;
      rec.obs = std::move(d.obs);
      decisions_.push_back(std::move(rec));
      idx = decisions_.size() - 1;
    }
    node.prev_action = d.action;
    pending.push_back({node.id, d.action, forced, target, idx});
  }

  // Phase B: apply transmissions in node order.
  for (const auto& p : pending) {
    auto& tx = nodes_[static_cast<std::size_t>(p.node)];
    const Packet head = tx.queue.front();
    int n_acks = 0;

    const auto receive = [&](NodeId rid, bool via_broadcast) {
      ++receptions_;
      auto& rv = nodes_[static_cast<std::size_t>(rid)];
      const IncomingResult res = handle_incoming(rv, head, via_broadcast);
      switch (res.outcome) {
        case ReceiveOutcome::DroppedLoop:
          ++metrics_.drop_loop;
          record({slot, rid, EventKind::DropLoop, head.flow, head.seq, p.node,
                  0});
          break;
        case ReceiveOutcome::DroppedDuplicate:
          ++metrics_.drop_duplicate;
          record({slot, rid, EventKind::DropDuplicate, head.flow, head.seq,
                  p.node, 0});
          break;
        case ReceiveOutcome::Delivered:
          ++metrics_.delivered_unique;
          metrics_.sum_delivery_hops += res.delivery_hops;
          record({slot, rid, EventKind::Deliver, head.flow, head.seq, p.node,
                  res.delivery_hops});
          if (opts_.record_decisions) credit_delivery(head, p.decision_index);
          break;
        case ReceiveOutcome::Enqueued:
          ++enqueued_;
          record({slot, rid, EventKind::Enqueue, head.flow, head.seq, p.node,
                  0});
          break;
      }
      if (res.ack) {
        tx.table.update_on_ack(rid, head.destination, *res.ack);
        ++n_acks;
        ++metrics_.ack_count;
        record({slot, p.node, EventKind::Ack, head.flow, head.seq, rid, 0});
      }
    };

    if (p.action == 1) {
      ++metrics_.data_transmissions;
      ++metrics_.broadcast_transmissions;
      record({slot, p.node, EventKind::TransmitBroadcast, head.flow, head.seq,
              -1, p.forced ? 1 : 0});
      for (NodeId rid : neighbors[static_cast<std::size_t>(p.node)]) {
        if (!link_up()) continue;
        receive(rid, true);
      }
    } else {
      ++metrics_.data_transmissions;
      ++metrics_.unicast_transmissions;
      record({slot, p.node, EventKind::TransmitUnicast, head.flow, head.seq,
              p.target, 0});
      const auto& nb = neighbors[static_cast<std::size_t>(p.node)];
      const bool in_range =
          std::find(nb.begin(), nb.end(), p.target) != nb.end();
      if (in_range && link_up()) {
        receive(p.target, false);
      }
      if (n_acks == 0) {
        // The chosen next hop never answered: confidence in it decays.
        tx.table.update_on_failure(p.target, head.destination);
        record({slot, p.node, EventKind::UnicastFailure, head.flow, head.seq,
                p.target, 0});
      }
    }

    if (n_acks > 0) {
      tx.queue.pop_front();
      ++forwarded_;
      record({slot, p.node, EventKind::Forward, head.flow, head.seq, -1,
              n_acks});
      if (opts_.record_decisions) {
        forward_index_[{head.flow, head.seq, p.node}] = p.decision_index;
      }
    } else {
      record({slot, p.node, EventKind::Retain, head.flow, head.seq, -1, 0});
    }
    if (p.decision_index != SIZE_MAX) {
      decisions_[p.decision_index].n_acks = n_acks;
      decisions_[p.decision_index].zero_ack = (n_acks == 0);
    }
  }
}

void Simulator::check_conservation(int slot) const {
  long long queued = 0;
  for (const auto& node : nodes_) {
    queued += static_cast<long long>(node.queue.size());
  }
  if (generated_ + enqueued_ != forwarded_ + queued) {
    throw std::logic_error(
        "packet conservation violated at slot " + std::to_string(slot) +
        ": generated " + std::to_string(generated_) + " + enqueued " +
        std::to_string(enqueued_) + " != forwarded " +
        std::to_string(forwarded_) + " + queued " + std::to_string(queued));
  }
  const long long accounted = enqueued_ + metrics_.delivered_unique +
                              metrics_.drop_loop + metrics_.drop_duplicate;
  if (receptions_ != accounted) {
    throw std::logic_error(
        "reception accounting violated at slot " + std::to_string(slot) +
        ": receptions " + std::to_string(receptions_) + " != accounted " +
        std::to_string(accounted));
  }
}

bool Simulator::all_queues_empty() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const NodeState& n) { return n.queue.empty(); });
}

EpisodeResult Simulator::run() {
  if (ran_) throw std::logic_error("Simulator::run called twice");
  ran_ = true;

  policy_->reset();
  place_nodes();

  EpisodeResult result;
  for (int slot = 0;; ++slot) {
    if (slot >= cfg_.episode_cap) {
      result.hit_cap = true;
      result.end_slot = slot;
      break;
    }
    if (slot < cfg_.t_max) inject(slot);
    move_nodes();
    const auto neighbors = [&] {
      std::vector<Vec2> positions;
      positions.reserve(nodes_.size());
      for (const auto& n : nodes_) positions.push_back(n.kin.position);
      return connectivity(positions, cfg_.arena.radio_range);
    }();
    transmit(slot, neighbors);
    check_conservation(slot);
    metrics_.slots = slot + 1;
    if (slot + 1 >= cfg_.t_max && all_queues_empty()) {
      result.end_slot = slot + 1;
      break;
    }
  }

  result.metrics = metrics_;
  result.decisions = std::move(decisions_);
  result.trace = std::move(trace_);
  return result;
}

}  // namespace deepcq
