#include "streamtrack/moi.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <stdexcept>

namespace streamtrack {

namespace {

std::optional<std::size_t> best_match_masked(const Box3D& rectified,
                                             const std::vector<Detection>& pool,
                                             const std::vector<bool>& alive) {
  std::optional<std::size_t> best;
  double best_iou = -1.0;
  double best_score = -1.0;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (!alive[j]) continue;
    const double iou = iou_3d(rectified, pool[j].box);
    // Tie-break by higher score, then by lower index (ascending scan).
    if (iou > best_iou || (iou == best_iou && pool[j].score > best_score)) {
      best = j;
      best_iou = iou;
      best_score = pool[j].score;
    }
  }
  if (best_iou < kMatchIouFloor) return std::nullopt;
  return best;
}

Detection make_state(int frame, const Box3D& box, double score, const Detection& origin) {
  Detection d;
  d.frame = frame;
  d.box = box;
  d.score = score;
  d.co = origin.co;
  d.offsets = OffsetDelta{};
  return d;
}

// States between (exclusive) two endpoint detections, scores blended linearly.
void emit_intermediate(Tracklet& out, const Detection& a, const Box3D& b_box,
                       double b_score, int t, int tau) {
  const auto boxes = interpolate(a.box, b_box, tau);
  for (int k = 1; k < tau; ++k) {
    const double s = a.score + (b_score - a.score) * static_cast<double>(k) / tau;
    out.states.emplace(t + k, make_state(t + k, boxes[static_cast<std::size_t>(k - 1)], s, a));
  }
}

OffsetDelta negate(const OffsetDelta& d) { return OffsetDelta{-d.dx, -d.dz, -d.dry}; }

}  // namespace

std::vector<Box3D> interpolate(const Box3D& a, const Box3D& b, int tau) {
  if (tau < 1) throw std::invalid_argument("interpolate: tau must be >= 1");
  std::vector<Box3D> out;
  out.reserve(static_cast<std::size_t>(tau - 1));
  const double dry = angle_diff(b.ry, a.ry);
  for (int k = 1; k < tau; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(tau);
    out.emplace_back(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f, a.z + (b.z - a.z) * f,
                     a.w + (b.w - a.w) * f, a.l + (b.l - a.l) * f, a.h + (b.h - a.h) * f,
                     normalize_angle(a.ry + dry * f));
  }
  return out;
}

std::optional<std::size_t> get_matched(const Box3D& rectified,
                                       const std::vector<Detection>& pool) {
  return best_match_masked(rectified, pool, std::vector<bool>(pool.size(), true));
}

PropagationResult propagate(const KeyframePair& pair, const TrackContext& tracks) {
  if (pair.tau < 1) throw std::invalid_argument("propagate: tau must be >= 1");
  for (const auto& d : pair.first) {
    if (d.frame != pair.t) throw std::invalid_argument("propagate: first-keyframe frame mismatch");
  }
  for (const auto& d : pair.second) {
    if (d.frame != pair.t + pair.tau) {
      throw std::invalid_argument("propagate: second-keyframe frame mismatch");
    }
  }
  if (!tracks.first_velocity.empty() && tracks.first_velocity.size() != pair.first.size()) {
    throw std::invalid_argument("propagate: track context size mismatch");
  }

  const int t = pair.t;
  const int tau = pair.tau;

  PropagationResult result;
  result.t = t;
  result.tau = tau;

  // Greedy pass over the first keyframe in descending score order; ties keep
  // the original list order.
  std::vector<std::size_t> order(pair.first.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pair.first[a].score > pair.first[b].score;
  });

  std::vector<bool> alive(pair.second.size(), true);

  for (const std::size_t i : order) {
    const Detection& det = pair.first[i];
    const Box3D rectified = decode_offsets(det.box, det.offsets);
    const auto match = best_match_masked(rectified, pair.second, alive);

    Tracklet tracklet;
    tracklet.first_index = static_cast<int>(i);
    tracklet.states.emplace(t, det);

    if (match) {
      alive[*match] = false;
      const Detection& other = pair.second[*match];
      Detection end = other;
      end.box.ry = correct_orientation(det.box.ry, other.box.ry);
      tracklet.kind = Tracklet::Kind::kMatched;
      tracklet.second_index = static_cast<int>(*match);
      emit_intermediate(tracklet, det, end.box, end.score, t, tau);
      tracklet.states.emplace(t + tau, end);
      result.matches.emplace_back(static_cast<int>(i), static_cast<int>(*match));
    } else if (det.co.gate()) {
      // Mis-detection on the second keyframe: trust the offsets and carry the
      // object through frame t + tau.
      Box3D synth = rectified;
      synth.ry = correct_orientation(det.box.ry, synth.ry);
      tracklet.kind = Tracklet::Kind::kRescuedSecondMissing;
      emit_intermediate(tracklet, det, synth, det.score, t, tau);
      tracklet.states.emplace(t + tau, make_state(t + tau, synth, det.score, det));
    } else {
      // Track death: fill the clip interior with the motion model.
      const Velocity v = tracks.first_velocity.empty()
                             ? Velocity{}
                             : tracks.first_velocity[i];
      tracklet.kind = Tracklet::Kind::kDeath;
      for (int k = 1; k < tau; ++k) {
        tracklet.states.emplace(t + k,
                                make_state(t + k, extrapolate(det.box, v, k), det.score, det));
      }
      result.deaths.push_back(static_cast<int>(i));
    }
    result.tracklets.push_back(std::move(tracklet));
  }

  // Leftover second-keyframe detections.
  for (std::size_t j = 0; j < pair.second.size(); ++j) {
    if (!alive[j]) continue;
    const Detection& det = pair.second[j];

    Tracklet tracklet;
    tracklet.second_index = static_cast<int>(j);
    tracklet.states.emplace(t + tau, det);

    if (det.co.gate()) {
      // Mis-detection on the first keyframe: walk the offsets backwards.
      const Box3D synth = decode_offsets(det.box, negate(det.offsets));
      const Detection start = make_state(t, synth, det.score, det);
      tracklet.kind = Tracklet::Kind::kRescuedFirstMissing;
      tracklet.states.emplace(t, start);
      emit_intermediate(tracklet, start, det.box, det.score, t, tau);
    } else {
      // Track birth: no velocity history yet, back-fill with zero velocity.
      tracklet.kind = Tracklet::Kind::kBirth;
      for (int k = 1; k < tau; ++k) {
        tracklet.states.emplace(t + k,
                                make_state(t + k, extrapolate(det.box, Velocity{}, k - tau),
                                           det.score, det));
      }
      result.births.push_back(static_cast<int>(j));
    }
    result.tracklets.push_back(std::move(tracklet));
  }

  for (auto& tracklet : result.tracklets) {
    for (const auto& [frame, state] : tracklet.states) {
      result.per_frame[frame].push_back(state);
    }
  }

  // Working-copy removal guarantees one-to-one matching.
  assert(std::count(alive.begin(), alive.end(), false) ==
         static_cast<long>(result.matches.size()));
  return result;
}

std::vector<Box3D> extend_track(const Box3D& last_box, const Velocity& v,
                                const BevBounds& bounds, ExtendDirection direction) {
  const int sign = direction == ExtendDirection::kForward ? 1 : -1;
  std::vector<Box3D> out;
  double prev_ry = last_box.ry;
  for (int k = 1; k <= kExtensionFrames; ++k) {
    Box3D candidate = extrapolate(last_box, v, sign * k);
    if (!in_bounds(candidate, bounds)) break;
    candidate.ry = correct_orientation(prev_ry, candidate.ry);
    prev_ry = candidate.ry;
    out.push_back(candidate);
  }
  return out;
}

}  // namespace streamtrack
