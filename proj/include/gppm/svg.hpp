#pragma once

#include <string>
#include <vector>

#include "gppm/predict.hpp"

namespace gppm {

// Calendar-day interval highlighted on the calendar-time panels.
struct EventWindow {
  int start = 0;
  int end = 0;  // inclusive
  std::string label;
};

// One six-panel component dashboard: posterior median with the 2.5/97.5%
// band for each additive piece of the propensity.
struct DashboardSpec {
  ComponentCurves curves;
  std::vector<EventWindow> windows;
  std::string title = "Spend propensity components";
};

// Writes one SVG per panel plus dashboard.html embedding all six, in a
// fixed order with fixed numeric precision so identical input gives
// identical bytes. Inactive components render as an empty placeholder
// panel. The band-encloses-median invariant is re-checked here and a
// violation is fatal. Returns the written paths.
std::vector<std::string> render_dashboard(const DashboardSpec& spec,
                                          const std::string& out_dir);

}  // namespace gppm
