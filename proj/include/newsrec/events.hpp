#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "newsrec/common.hpp"

namespace newsrec {

enum class EventKind { impression, click, access };

const char* to_string(EventKind k);
std::optional<EventKind> event_kind_from(const std::string& name);

// One behavior-log record. `article_id` is empty for access events. `seq` is
// a monotone per-source sequence number used to order events per user.
struct BehaviorEvent {
  EventKind kind = EventKind::impression;
  std::string user_id;
  std::string article_id;
  Timestamp ts = 0;
  std::int64_t seq = 0;
};

// One event per line, fixed field order so identical logs are byte-identical:
// {"kind":"click","user_id":"u1","article_id":"a1","ts":100,"seq":7}
// access events omit article_id.
std::string format_event(const BehaviorEvent& ev);

// Lenient parse: unknown fields are ignored; returns nullopt for unparseable
// lines, unknown kinds, or missing required fields (kind, user_id, ts, seq;
// click/impression must also carry article_id).
std::optional<BehaviorEvent> parse_event(const std::string& line);

}  // namespace newsrec
