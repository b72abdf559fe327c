#include "streamtrack/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace streamtrack {

namespace {

constexpr double kForbidden = 1e9;

// Hungarian algorithm (potentials formulation), minimizing total cost of a
// dense n x m matrix with n <= m. Returns the column picked for each row.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1,
                             std::numeric_limits<double>::infinity());
    std::vector<bool> used(static_cast<std::size_t>(m) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0) {
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
  }
  return row_to_col;
}

void validate(const EvalConfig& cfg) {
  if (!(cfg.match_floor > 0.0 && cfg.match_floor <= 1.0)) {
    throw std::invalid_argument("EvalConfig: match_floor must be in (0, 1]");
  }
  if (!(cfg.ml_threshold >= 0.0 && cfg.ml_threshold < cfg.mt_threshold &&
        cfg.mt_threshold <= 1.0)) {
    throw std::invalid_argument("EvalConfig: need 0 <= ml_threshold < mt_threshold <= 1");
  }
}

}  // namespace

std::vector<std::pair<int, int>> match_frame(
    const std::vector<RectBEV>& gt_boxes, const std::vector<RectBEV>& hyp_boxes,
    const std::vector<std::pair<int, int>>& prev_matches, double floor) {
  std::vector<std::pair<int, int>> out;
  std::vector<bool> gt_used(gt_boxes.size(), false);
  std::vector<bool> hyp_used(hyp_boxes.size(), false);

  // CLEAR continuity: a previous match survives while it clears the floor.
  for (const auto& [gi, hi] : prev_matches) {
    if (gi < 0 || hi < 0 || gi >= static_cast<int>(gt_boxes.size()) ||
        hi >= static_cast<int>(hyp_boxes.size())) {
      continue;
    }
    if (gt_used[static_cast<std::size_t>(gi)] || hyp_used[static_cast<std::size_t>(hi)]) continue;
    if (iou_bev(gt_boxes[static_cast<std::size_t>(gi)], hyp_boxes[static_cast<std::size_t>(hi)]) >=
        floor) {
      gt_used[static_cast<std::size_t>(gi)] = true;
      hyp_used[static_cast<std::size_t>(hi)] = true;
      out.emplace_back(gi, hi);
    }
  }

  std::vector<int> free_gt;
  std::vector<int> free_hyp;
  for (int i = 0; i < static_cast<int>(gt_boxes.size()); ++i) {
    if (!gt_used[static_cast<std::size_t>(i)]) free_gt.push_back(i);
  }
  for (int j = 0; j < static_cast<int>(hyp_boxes.size()); ++j) {
    if (!hyp_used[static_cast<std::size_t>(j)]) free_hyp.push_back(j);
  }
  if (free_gt.empty() || free_hyp.empty()) return out;

  // Optimal assignment on the rest. Forbidden pairs get a cost large enough
  // that the solver only uses them when unavoidable; they are dropped after.
  const bool transpose = free_gt.size() > free_hyp.size();
  const auto& rows = transpose ? free_hyp : free_gt;
  const auto& cols = transpose ? free_gt : free_hyp;
  std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const int gi = transpose ? cols[c] : rows[r];
      const int hi = transpose ? rows[r] : cols[c];
      const double iou = iou_bev(gt_boxes[static_cast<std::size_t>(gi)],
                                 hyp_boxes[static_cast<std::size_t>(hi)]);
      cost[r][c] = iou >= floor ? 1.0 - iou : kForbidden;
    }
  }
  const auto assigned = solve_assignment(cost);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (assigned[r] < 0) continue;
    const int gi = transpose ? cols[static_cast<std::size_t>(assigned[r])] : rows[r];
    const int hi = transpose ? rows[r] : cols[static_cast<std::size_t>(assigned[r])];
    if (iou_bev(gt_boxes[static_cast<std::size_t>(gi)], hyp_boxes[static_cast<std::size_t>(hi)]) >=
        floor) {
      out.emplace_back(gi, hi);
    }
  }
  return out;
}

MotReport evaluate(const std::vector<Track>& gt, const std::vector<Track>& hyp,
                   const EvalConfig& cfg) {
  validate(cfg);
  long gt_total = 0;
  for (const auto& track : gt) gt_total += static_cast<long>(track.states.size());
  if (gt.empty() || gt_total == 0) {
    throw std::invalid_argument("evaluate: MOTA undefined for empty ground truth");
  }

  std::map<int, std::vector<int>> gt_by_frame;   // frame -> indices into gt
  std::map<int, std::vector<int>> hyp_by_frame;  // frame -> indices into hyp
  std::set<int> frames;
  for (int i = 0; i < static_cast<int>(gt.size()); ++i) {
    for (const auto& [frame, state] : gt[static_cast<std::size_t>(i)].states) {
      gt_by_frame[frame].push_back(i);
      frames.insert(frame);
    }
  }
  for (int j = 0; j < static_cast<int>(hyp.size()); ++j) {
    for (const auto& [frame, state] : hyp[static_cast<std::size_t>(j)].states) {
      hyp_by_frame[frame].push_back(j);
      frames.insert(frame);
    }
  }

  MotReport report;
  report.gt = gt_total;
  double motp_sum = 0.0;

  std::map<int, int> mapping;               // gt index -> hyp index, carried
  std::map<int, std::optional<int>> prev_assignment;  // at the previous frame
  std::vector<long> covered(gt.size(), 0);

  for (const int frame : frames) {
    const auto git = gt_by_frame.find(frame);
    const auto hit = hyp_by_frame.find(frame);
    const std::vector<int> empty;
    const std::vector<int>& gt_here = git == gt_by_frame.end() ? empty : git->second;
    const std::vector<int>& hyp_here = hit == hyp_by_frame.end() ? empty : hit->second;

    std::vector<RectBEV> gt_boxes;
    std::vector<RectBEV> hyp_boxes;
    gt_boxes.reserve(gt_here.size());
    hyp_boxes.reserve(hyp_here.size());
    for (const int i : gt_here) {
      gt_boxes.push_back(gt[static_cast<std::size_t>(i)].states.at(frame).box.bev());
    }
    for (const int j : hyp_here) {
      hyp_boxes.push_back(hyp[static_cast<std::size_t>(j)].states.at(frame).box.bev());
    }

    // Translate the carried mapping into this frame's pool indices.
    std::vector<std::pair<int, int>> prev_pairs;
    for (const auto& [gi, hi] : mapping) {
      const auto gpos = std::find(gt_here.begin(), gt_here.end(), gi);
      const auto hpos = std::find(hyp_here.begin(), hyp_here.end(), hi);
      if (gpos == gt_here.end() || hpos == hyp_here.end()) continue;
      prev_pairs.emplace_back(static_cast<int>(gpos - gt_here.begin()),
                              static_cast<int>(hpos - hyp_here.begin()));
    }

    const auto pairs = match_frame(gt_boxes, hyp_boxes, prev_pairs, cfg.match_floor);

    std::map<int, std::optional<int>> assignment;  // gt index -> hyp index
    for (const int i : gt_here) assignment[i] = std::nullopt;
    for (const auto& [gp, hp] : pairs) {
      const int gi = gt_here[static_cast<std::size_t>(gp)];
      const int hi = hyp_here[static_cast<std::size_t>(hp)];
      assignment[gi] = hi;
      motp_sum += iou_bev(gt_boxes[static_cast<std::size_t>(gp)],
                          hyp_boxes[static_cast<std::size_t>(hp)]);
      covered[static_cast<std::size_t>(gi)] += 1;
    }

    report.matches += static_cast<long>(pairs.size());
    report.fn += static_cast<long>(gt_here.size() - pairs.size());
    report.fp += static_cast<long>(hyp_here.size() - pairs.size());

    // ID switches and fragmentations against the previous frame's state.
    for (const auto& [gi, now] : assignment) {
      const auto prev = prev_assignment.find(gi);
      if (prev == prev_assignment.end() || !prev->second.has_value()) continue;
      if (now.has_value() && *now != *prev->second) {
        report.ids += 1;
        report.fm += 1;  // an identity handover also fragments the trajectory
      } else if (!now.has_value()) {
        report.fm += 1;
      }
    }

    mapping.clear();
    prev_assignment.clear();
    for (const auto& [gi, now] : assignment) {
      prev_assignment[gi] = now;
      if (now.has_value()) mapping[gi] = *now;
    }
  }

  report.mota = 1.0 - static_cast<double>(report.fn + report.fp + report.ids) /
                          static_cast<double>(report.gt);
  report.motp = report.matches > 0 ? motp_sum / static_cast<double>(report.matches) : 0.0;

  long mostly_tracked = 0;
  long mostly_lost = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double ratio = static_cast<double>(covered[i]) /
                         static_cast<double>(gt[i].states.size());
    if (ratio >= cfg.mt_threshold) ++mostly_tracked;
    if (ratio <= cfg.ml_threshold) ++mostly_lost;
  }
  report.mt = static_cast<double>(mostly_tracked) / static_cast<double>(gt.size());
  report.ml = static_cast<double>(mostly_lost) / static_cast<double>(gt.size());
  return report;
}

std::string report_to_text(const MotReport& r) {
  std::ostringstream out;
  out << "mota " << r.mota << '\n';
  out << "motp " << r.motp << '\n';
  out << "mt " << r.mt << '\n';
  out << "ml " << r.ml << '\n';
  out << "ids " << r.ids << '\n';
  out << "fm " << r.fm << '\n';
  out << "fp " << r.fp << '\n';
  out << "fn " << r.fn << '\n';
  out << "gt " << r.gt << '\n';
  out << "matches " << r.matches << '\n';
  return out.str();
}

std::string report_to_json(const MotReport& r) {
  nlohmann::json j;
  j["mota"] = r.mota;
  j["motp"] = r.motp;
  j["mt"] = r.mt;
  j["ml"] = r.ml;
  j["ids"] = r.ids;
  j["fm"] = r.fm;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["gt"] = r.gt;
  j["matches"] = r.matches;
  return j.dump(2);
}

}  // namespace streamtrack
