#pragma once

namespace dmis {

/// A space-time location; `t` first to mirror the (t, x) network input order.
struct Point {
  double t = 0.0;
  double x = 0.0;
};

}  // namespace dmis
