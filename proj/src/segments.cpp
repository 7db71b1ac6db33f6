#include "newsrec/segments.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace newsrec {

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

template <typename Range>
void append_id_array(std::string& out, const Range& ids) {
  out.push_back('[');
  bool first = true;
  for (const auto& id : ids) {
    if (!first) out.push_back(',');
    first = false;
    append_json_string(out, id);
  }
  out.push_back(']');
}

}  // namespace

void save_segments(const std::vector<HourSegment>& segments, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write segments: " + path);
  std::string line;
  for (const auto& seg : segments) {
    line.clear();
    line += "{\"hour_start\":";
    line += std::to_string(seg.hour_start);
    line += ",\"candidates\":";
    append_id_array(line, seg.candidates_all);
    line += ",\"displayed\":{";
    bool first = true;
    for (const auto& [user, ids] : seg.displayed) {
      if (!first) line.push_back(',');
      first = false;
      append_json_string(line, user);
      line.push_back(':');
      append_id_array(line, ids);
    }
    line += "},\"clicked\":{";
    first = true;
    for (const auto& [user, ids] : seg.clicked) {
      if (!first) line.push_back(',');
      first = false;
      append_json_string(line, user);
      line.push_back(':');
      append_id_array(line, ids);
    }
    line += "}}";
    out << line << '\n';
  }
}

std::vector<HourSegment> load_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open segments: " + path);
  std::vector<HourSegment> segments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad segment line");
    HourSegment seg;
    seg.hour_start = j.at("hour_start").get<Timestamp>();
    for (const auto& id : j.at("candidates")) seg.candidates_all.push_back(id.get<std::string>());
    for (const auto& [user, ids] : j.at("displayed").items()) {
      auto& list = seg.displayed[user];
      for (const auto& id : ids) list.push_back(id.get<std::string>());
    }
    for (const auto& [user, ids] : j.at("clicked").items()) {
      auto& set = seg.clicked[user];
      for (const auto& id : ids) set.insert(id.get<std::string>());
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace newsrec
