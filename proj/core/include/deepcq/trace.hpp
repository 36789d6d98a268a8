#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "deepcq/routing_table.hpp"

namespace deepcq {

/// One simulator event. The `other` and `value` fields depend on the kind:
///   Generate          node=source,      other=destination
///   TransmitUnicast   node=transmitter, other=target
///   TransmitBroadcast node=transmitter, other=-1, value=1 if forced
///                     (no known next hop existed, broadcast was compulsory)
///   Enqueue           node=receiver,    other=sender
///   Deliver           node=destination, other=sender, value=hop count
///   DropLoop/DropDup  node=receiver,    other=sender
///   Ack               node=transmitter, other=responder
///   Forward           node=transmitter, value=ACK count (>=1, dequeued)
///   Retain            node=transmitter, value=0 (zero ACKs, kept for retry)
///   UnicastFailure    node=transmitter, other=silent target
enum class EventKind {
  Generate,
  TransmitUnicast,
  TransmitBroadcast,
  Enqueue,
  Deliver,
  DropLoop,
  DropDuplicate,
  Ack,
  Forward,
  Retain,
  UnicastFailure,
};

struct TraceEvent {
  int slot = 0;
  NodeId node = -1;
  EventKind kind = EventKind::Generate;
  int flow = -1;
  int seq = -1;
  NodeId other = -1;
  int value = 0;

  bool operator==(const TraceEvent&) const = default;
};

std::string to_string(EventKind kind);

/// One line per event: slot node kind flow seq other value.
std::string to_string(const TraceEvent& e);
void write_trace(std::ostream& out, const std::vector<TraceEvent>& events);

}  // namespace deepcq
