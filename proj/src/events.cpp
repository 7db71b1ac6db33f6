#include "newsrec/events.hpp"

#include <json.hpp>

namespace newsrec {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::impression: return "impression";
    case EventKind::click: return "click";
    case EventKind::access: return "access";
  }
  return "?";
}

std::optional<EventKind> event_kind_from(const std::string& name) {
  if (name == "impression") return EventKind::impression;
  if (name == "click") return EventKind::click;
  if (name == "access") return EventKind::access;
  return std::nullopt;
}

namespace {

void append_json_string(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
}

}  // namespace

std::string format_event(const BehaviorEvent& ev) {
  std::string out;
  out.reserve(96);
  out += "{\"kind\":\"";
  out += to_string(ev.kind);
  out += "\",\"user_id\":";
  append_json_string(out, ev.user_id);
  if (ev.kind != EventKind::access) {
    out += ",\"article_id\":";
    append_json_string(out, ev.article_id);
  }
  out += ",\"ts\":";
  out += std::to_string(ev.ts);
  out += ",\"seq\":";
  out += std::to_string(ev.seq);
  out += "}";
  return out;
}

std::optional<BehaviorEvent> parse_event(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto kind_it = j.find("kind");
  auto user_it = j.find("user_id");
  auto ts_it = j.find("ts");
  auto seq_it = j.find("seq");
  if (kind_it == j.end() || !kind_it->is_string()) return std::nullopt;
  if (user_it == j.end() || !user_it->is_string()) return std::nullopt;
  if (ts_it == j.end() || !ts_it->is_number_integer()) return std::nullopt;
  if (seq_it == j.end() || !seq_it->is_number_integer()) return std::nullopt;
  auto kind = event_kind_from(kind_it->get<std::string>());
  if (!kind) return std::nullopt;

  BehaviorEvent ev;
  ev.kind = *kind;
  ev.user_id = user_it->get<std::string>();
  ev.ts = ts_it->get<Timestamp>();
  ev.seq = seq_it->get<std::int64_t>();
  auto art_it = j.find("article_id");
  if (art_it != j.end() && art_it->is_string()) ev.article_id = art_it->get<std::string>();
  if (ev.kind != EventKind::access && ev.article_id.empty()) return std::nullopt;
  return ev;
}

}  // namespace newsrec
