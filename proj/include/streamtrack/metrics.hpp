#pragma once

#include "streamtrack/geometry.hpp"
#include "streamtrack/tracker.hpp"

#include <string>
#include <utility>
#include <vector>

namespace streamtrack {

/// CLEAR MOT evaluation thresholds (KITTI-style conventions).
struct EvalConfig {
  double match_floor = 0.5;   // minimum BEV IoU of a gt/hyp match
  double mt_threshold = 0.8;  // mostly-tracked coverage ratio
  double ml_threshold = 0.2;  // mostly-lost coverage ratio
};

/// Aggregated CLEAR MOT numbers. mota satisfies
/// mota == 1 - (fn + fp + ids) / gt whenever gt > 0.
struct MotReport {
  double mota = 0.0;
  double motp = 0.0;  // mean matched IoU, higher is better
  double mt = 0.0;
  double ml = 0.0;
  long ids = 0;
  long fm = 0;
  long fp = 0;
  long fn = 0;
  long gt = 0;       // total ground-truth states
  long matches = 0;  // total matched states
};

/// One evaluation frame: keeps still-valid previous matches, then runs a
/// Hungarian assignment on the remaining pairs with IoU >= floor. Index pairs
/// are (gt index, hyp index) into the given box lists.
std::vector<std::pair<int, int>> match_frame(
    const std::vector<RectBEV>& gt_boxes, const std::vector<RectBEV>& hyp_boxes,
    const std::vector<std::pair<int, int>>& prev_matches, double floor);

/// CLEAR MOT over full track sets, matching by BEV IoU. An identity change on
/// consecutive matched frames counts as an ID switch; every interruption of a
/// gt track's matched run (a gap or an identity handover) counts as a
/// fragmentation. Throws std::invalid_argument when gt is empty.
MotReport evaluate(const std::vector<Track>& gt, const std::vector<Track>& hyp,
                   const EvalConfig& cfg = {});

/// Flat key-value rendering, one metric per line.
std::string report_to_text(const MotReport& report);
std::string report_to_json(const MotReport& report);

}  // namespace streamtrack
