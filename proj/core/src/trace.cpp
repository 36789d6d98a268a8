#include "deepcq/trace.hpp"

#include <ostream>
#include <sstream>

namespace deepcq {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Generate: return "generate";
    case EventKind::TransmitUnicast: return "tx_unicast";
    case EventKind::TransmitBroadcast: return "tx_broadcast";
    case EventKind::Enqueue: return "enqueue";
    case EventKind::Deliver: return "deliver";
    case EventKind::DropLoop: return "drop_loop";
    case EventKind::DropDuplicate: return "drop_dup";
    case EventKind::Ack: return "ack";
    case EventKind::Forward: return "forward";
    case EventKind::Retain: return "retain";
    case EventKind::UnicastFailure: return "unicast_failure";
  }
  return "unknown";
}

std::string to_string(const TraceEvent& e) {
  std::ostringstream out;
  out << e.slot << ' ' << e.node << ' ' << to_string(e.kind) << ' ' << e.flow
      << ' ' << e.seq << ' ' << e.other << ' ' << e.value;
  return out.str();
}

void write_trace(std::ostream& out, const std::vector<TraceEvent>& events) {
  for (const auto& e : events) out << to_string(e) << '\n';
}

}  // namespace deepcq
