#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "deepcq/trace.hpp"

namespace deepcq {

/// Counters for one episode (or an aggregate of episodes; merging with +=
/// is associative and commutative). Ratios are derived on demand and absent
/// when their denominator is zero.
struct EpisodeMetrics {
  long long packets_entered = 0;
  long long delivered_unique = 0;        // duplicates at destination excluded
  long long data_transmissions = 0;      // broadcast + unicast
  long long broadcast_transmissions = 0;
  long long unicast_transmissions = 0;
  long long ack_count = 0;               // ACKs received by transmitters
  long long drop_loop = 0;
  long long drop_duplicate = 0;
  long long sum_delivery_hops = 0;
  long long slots = 0;

  EpisodeMetrics& operator+=(const EpisodeMetrics& o);
  bool operator==(const EpisodeMetrics&) const = default;
};

/// Unique delivered packets over packets that entered the network.
std::optional<double> goodput(const EpisodeMetrics& m);

/// (1/N) * (N_TX / N_D): transmissions per delivery, normalized by size.
std::optional<double> normalized_overhead(const EpisodeMetrics& m,
                                          int n_nodes);

/// Excess transmissions per delivery: (N_TX - N_D) / N_D.
std::optional<double> overhead_type1(const EpisodeMetrics& m);

/// Transmitted units (data + ACKs at relative size rho) per delivered unit:
/// (N_TX + rho * N_ACK) / N_D.
std::optional<double> overhead_type2(const EpisodeMetrics& m, double rho);

/// Broadcast data transmissions over all data transmissions.
std::optional<double> broadcast_rate(const EpisodeMetrics& m);

/// Mean path length (hops) of delivered packets.
std::optional<double> mean_hops(const EpisodeMetrics& m);

/// Rebuilds the counters from an event trace. Equality with the online
/// accumulation is a consistency check both paths must pass.
EpisodeMetrics metrics_from_trace(std::span<const TraceEvent> events);

/// One result row of an experiment run, keyed so any row is reproducible
/// from (config file, seed, weights file) alone.
struct ResultRow {
  std::string policy;
  int nodes = 0;
  int flows = 0;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::optional<double> goodput;
  std::optional<double> oh;
  std::optional<double> overhead_1;
  std::optional<double> overhead_2;
  std::optional<double> broadcast_rate;
  std::optional<double> mean_hops;
  std::string config_hash;
  std::string weights_hash;
};

ResultRow make_result_row(const EpisodeMetrics& m, int n_nodes, double rho);

std::string result_csv_header();
std::string result_csv_line(const ResultRow& row);

}  // namespace deepcq
