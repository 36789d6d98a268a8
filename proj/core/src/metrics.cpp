#include "deepcq/metrics.hpp"

#include <sstream>

#include "deepcq/util.hpp"

namespace deepcq {

EpisodeMetrics& EpisodeMetrics::operator+=(const EpisodeMetrics& o) {
  packets_entered += o.packets_entered;
  delivered_unique += o.delivered_unique;
  data_transmissions += o.data_transmissions;
  broadcast_transmissions += o.broadcast_transmissions;
  unicast_transmissions += o.unicast_transmissions;
  ack_count += o.ack_count;
  drop_loop += o.drop_loop;
  drop_duplicate += o.drop_duplicate;
  sum_delivery_hops += o.sum_delivery_hops;
  slots += o.slots;
  return *this;
}

std::optional<double> goodput(const EpisodeMetrics& m) {
  if (m.packets_entered <= 0) return std::nullopt;
  return static_cast<double>(m.delivered_unique) /
         static_cast<double>(m.packets_entered);
}

std::optional<double> normalized_overhead(const EpisodeMetrics& m,
                                          int n_nodes) {
  if (m.delivered_unique <= 0 || n_nodes <= 0) return std::nullopt;
  return static_cast<double>(m.data_transmissions) /
         static_cast<double>(m.delivered_unique) / n_nodes;
}

std::optional<double> overhead_type1(const EpisodeMetrics& m) {
  if (m.delivered_unique <= 0) return std::nullopt;
  return static_cast<double>(m.data_transmissions - m.delivered_unique) /
         static_cast<double>(m.delivered_unique);
}

std::optional<double> overhead_type2(const EpisodeMetrics& m, double rho) {
  if (m.delivered_unique <= 0) return std::nullopt;
  return (static_cast<double>(m.data_transmissions) +
          rho * static_cast<double>(m.ack_count)) /
         static_cast<double>(m.delivered_unique);
}

std::optional<double> broadcast_rate(const EpisodeMetrics& m) {
  if (m.data_transmissions <= 0) return std::nullopt;
  return static_cast<double>(m.broadcast_transmissions) /
         static_cast<double>(m.data_transmissions);
}

std::optional<double> mean_hops(const EpisodeMetrics& m) {
  if (m.delivered_unique <= 0) return std::nullopt;
  return static_cast<double>(m.sum_delivery_hops) /
         static_cast<double>(m.delivered_unique);
}

EpisodeMetrics metrics_from_trace(std::span<const TraceEvent> events) {
  EpisodeMetrics m;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::Generate:
        ++m.packets_entered;
        break;
      case EventKind::TransmitUnicast:
        ++m.data_transmissions;
        ++m.unicast_transmissions;
        break;
      case EventKind::TransmitBroadcast:
        ++m.data_transmissions;
        ++m.broadcast_transmissions;
        break;
      case EventKind::Deliver:
        ++m.delivered_unique;
        m.sum_delivery_hops += e.value;
        break;
      case EventKind::DropLoop:
        ++m.drop_loop;
        break;
      case EventKind::DropDuplicate:
        ++m.drop_duplicate;
        break;
      case EventKind::Ack:
        ++m.ack_count;
        break;
      case EventKind::Enqueue:
      case EventKind::Forward:
      case EventKind::Retain:
      case EventKind::UnicastFailure:
        break;
    }
    if (e.slot + 1 > m.slots) m.slots = e.slot + 1;
  }
  return m;
}

ResultRow make_result_row(const EpisodeMetrics& m, int n_nodes, double rho) {
  ResultRow row;
  row.nodes = n_nodes;
  row.goodput = goodput(m);
  row.oh = normalized_overhead(m, n_nodes);
  row.overhead_1 = overhead_type1(m);
  row.overhead_2 = overhead_type2(m, rho);
  row.broadcast_rate = broadcast_rate(m);
  row.mean_hops = mean_hops(m);
  return row;
}

std::string result_csv_header() {
  return "policy,nodes,flows,scale,seed,goodput,oh,overhead_1,overhead_2,"
         "broadcast_rate,mean_hops,config_hash,weights_hash";
}

namespace {

void append_field(std::ostringstream& out, const std::optional<double>& v) {
  out << ',';
  if (v) out << format_double(*v);
}

}  // namespace

std::string result_csv_line(const ResultRow& row) {
  std::ostringstream out;
  out << row.policy << ',' << row.nodes << ',' << row.flows << ','
      << format_double(row.scale) << ',' << row.seed;
  append_field(out, row.goodput);
  append_field(out, row.oh);
  append_field(out, row.overhead_1);
  append_field(out, row.overhead_2);
  append_field(out, row.broadcast_rate);
  append_field(out, row.mean_hops);
  out << ',' << row.config_hash << ',' << row.weights_hash;
  return out.str();
}

}  // namespace deepcq
