#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "newsrec/common.hpp"

namespace newsrec {

// One evaluation hour: every article available that hour, what each user was
// actually shown (display order preserved), and what they clicked.
struct HourSegment {
  Timestamp hour_start = 0;
  std::vector<std::string> candidates_all;                    // sorted ids
  std::map<std::string, std::vector<std::string>> displayed;  // user -> display order
  std::map<std::string, std::set<std::string>> clicked;       // user -> clicked set
};

// One JSON object per line:
// {"hour_start":...,"candidates":[...],"displayed":{...},"clicked":{...}}
// User keys and clicked sets are sorted; displayed lists keep display order.
void save_segments(const std::vector<HourSegment>& segments, const std::string& path);
std::vector<HourSegment> load_segments(const std::string& path);

}  // namespace newsrec
