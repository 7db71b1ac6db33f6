#pragma once

#include <cstdio>
#include <string>

namespace newsrec {

// %.17g round-trips every double exactly; used in all machine artifacts so
// that save -> load -> save is bit-identical.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

}  // namespace newsrec
