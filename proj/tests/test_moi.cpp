#include "streamtrack/moi.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace streamtrack;
using namespace streamtrack::testing;

namespace {

Detection det_at(int frame, const Box3D& box, double score = 1.0, double p_co = 0.0,
                 OffsetDelta offsets = {}) {
  Detection d;
  d.frame = frame;
  d.box = box;
  d.score = score;
  d.co = CoOccurrence(p_co);
  d.offsets = offsets;
  return d;
}

const Box3D kCar(0.0, 0.75, 20.0, 1.8, 4.4, 1.5, 0.2);

}  // namespace

TEST_SUITE("moi") {

TEST_CASE("interpolate blends linearly with shortest-path yaw") {
  const auto constant = interpolate(kCar, kCar, 4);
  REQUIRE(constant.size() == 3);
  for (const auto& b : constant) {
    CHECK(b.x == doctest::Approx(kCar.x));
    CHECK(b.z == doctest::Approx(kCar.z));
    CHECK(b.ry == doctest::Approx(kCar.ry));
  }

  const Box3D a(0, 0, 0, 1, 1, 1, 0);
  const Box3D b(3, 0, 3, 1, 1, 1, 0);
  const auto mid = interpolate(a, b, 3);
  REQUIRE(mid.size() == 2);
  CHECK(mid[0].x == doctest::Approx(1.0));
  CHECK(mid[0].z == doctest::Approx(1.0));
  CHECK(mid[1].x == doctest::Approx(2.0));
  CHECK(mid[1].z == doctest::Approx(2.0));

  // Corrected pair: 0 -> -0.14159...; the blend must not swing through +1.5.
  const Box3D from(0, 0, 0, 1, 1, 1, 0.0);
  const Box3D to(0, 0, 0, 1, 1, 1, 3.0 - M_PI);
  const auto half = interpolate(from, to, 2);
  REQUIRE(half.size() == 1);
  CHECK(half[0].ry == doctest::Approx((3.0 - M_PI) / 2.0).epsilon(1e-9));
  CHECK(std::abs(half[0].ry) < 0.1);

  CHECK(interpolate(a, b, 1).empty());
}

TEST_CASE("get_matched picks the best candidate above the floor") {
  std::vector<Detection> pool;
  pool.push_back(det_at(3, Box3D(5.0, 0.75, 20.0, 1.8, 4.4, 1.5, 0.2)));
  pool.push_back(det_at(3, kCar));
  pool.push_back(det_at(3, Box3D(0.4, 0.75, 20.2, 1.8, 4.4, 1.5, 0.2)));
  const auto exact = get_matched(kCar, pool);
  REQUIRE(exact.has_value());
  CHECK(*exact == 1);

  CHECK_FALSE(get_matched(kCar, {}).has_value());

  // Brute-force argmax oracle over a pool with distinct overlaps.
  std::vector<Detection> graded;
  graded.push_back(det_at(3, Box3D(0.9, 0.75, 20.0, 1.8, 4.4, 1.5, 0.2)));
  graded.push_back(det_at(3, Box3D(0.3, 0.75, 20.0, 1.8, 4.4, 1.5, 0.2)));
  std::size_t oracle = 0;
  double best = -1.0;
  for (std::size_t j = 0; j < graded.size(); ++j) {
    const double iou = iou_3d(kCar, graded[j].box);
    if (iou > best) {
      best = iou;
      oracle = j;
    }
  }
  CHECK(best > kMatchIouFloor);
  const auto got = get_matched(kCar, graded);
  REQUIRE(got.has_value());
  CHECK(*got == oracle);
  // A pool far outside the floor yields no match.
  CHECK_FALSE(get_matched(kCar, {det_at(3, Box3D(30, 0.75, 60, 1.8, 4.4, 1.5, 0.0))})
                  .has_value());
}

TEST_CASE("propagate: matched pair interpolates exactly under linear motion") {
  const Velocity v{0.5, 0.25, 0.0};
  const int tau = 3;
  KeyframePair pair;
  pair.t = 0;
  pair.tau = tau;
  pair.first.push_back(linear_detection(kCar, v, 0, tau, 1.0));
  pair.second.push_back(det_at(tau, extrapolate(kCar, v, tau), 1.0, 1.0));

  const auto result = propagate(pair);
  REQUIRE(result.matches.size() == 1);
  CHECK(result.matches[0] == std::pair<int, int>(0, 0));
  CHECK(result.births.empty());
  CHECK(result.deaths.empty());
  for (int k = 0; k <= tau; ++k) {
    REQUIRE(result.per_frame.count(k) == 1);
    REQUIRE(result.per_frame.at(k).size() == 1);
    const Box3D expected = extrapolate(kCar, v, k);
    const Box3D& got = result.per_frame.at(k)[0].box;
    CHECK(std::abs(got.x - expected.x) < 1e-12);
    CHECK(std::abs(got.z - expected.z) < 1e-12);
    CHECK(std::abs(angle_diff(got.ry, expected.ry)) < 1e-12);
  }
}

TEST_CASE("propagate: co-occurrence rescue synthesizes the missing second box") {
  const int tau = 3;
  const OffsetDelta delta{0.5, 0.25, 0.1};
  KeyframePair pair;
  pair.t = 6;
  pair.tau = tau;
  pair.first.push_back(det_at(6, kCar, 0.9, 0.9, delta));

  const auto result = propagate(pair);
  CHECK(result.matches.empty());
  CHECK(result.deaths.empty());
  REQUIRE(result.tracklets.size() == 1);
  CHECK(result.tracklets[0].kind == Tracklet::Kind::kRescuedSecondMissing);

  const Box3D target = decode_offsets(kCar, delta);
  for (int k = 0; k <= tau; ++k) {
    REQUIRE(result.per_frame.count(6 + k) == 1);
    const Box3D& got = result.per_frame.at(6 + k)[0].box;
    const double f = static_cast<double>(k) / tau;
    CHECK(std::abs(got.x - (kCar.x + (target.x - kCar.x) * f)) < 1e-9);
    CHECK(std::abs(got.z - (kCar.z + (target.z - kCar.z) * f)) < 1e-9);
    CHECK(result.per_frame.at(6 + k)[0].score == doctest::Approx(0.9));
  }
  CHECK(std::abs(result.per_frame.at(9)[0].box.ry - target.ry) < 1e-12);
}

TEST_CASE("propagate: death branch fills the interior with the motion model") {
  const int tau = 4;
  KeyframePair pair;
  pair.t = 0;
  pair.tau = tau;
  pair.first.push_back(det_at(0, kCar, 1.0, 0.1));

  TrackContext context;
  context.first_velocity = {Velocity{0.3, -0.1, 0.0}};
  const auto result = propagate(pair, context);
  REQUIRE(result.deaths.size() == 1);
  CHECK(result.deaths[0] == 0);
  REQUIRE(result.tracklets.size() == 1);
  CHECK(result.tracklets[0].kind == Tracklet::Kind::kDeath);
  CHECK(result.per_frame.count(tau) == 0);  // the object is gone by t + tau
  for (int k = 1; k < tau; ++k) {
    const Box3D expected = extrapolate(kCar, context.first_velocity[0], k);
    const Box3D& got = result.per_frame.at(k)[0].box;
    CHECK(std::abs(got.x - expected.x) < 1e-12);
    CHECK(std::abs(got.z - expected.z) < 1e-12);
  }
}

TEST_CASE("propagate: leftover second detections rescue or open births") {
  const int tau = 3;
  const OffsetDelta delta{0.2, 0.5, 0.0};

  KeyframePair rescue;
  rescue.t = 0;
  rescue.tau = tau;
  rescue.second.push_back(det_at(tau, kCar, 0.8, 0.9, delta));
  const auto rescued = propagate(rescue);
  REQUIRE(rescued.tracklets.size() == 1);
  CHECK(rescued.tracklets[0].kind == Tracklet::Kind::kRescuedFirstMissing);
  CHECK(rescued.births.empty());
  const Box3D start = decode_offsets(kCar, OffsetDelta{-delta.dx, -delta.dz, -delta.dry});
  REQUIRE(rescued.per_frame.count(0) == 1);
  CHECK(std::abs(rescued.per_frame.at(0)[0].box.x - start.x) < 1e-12);
  CHECK(std::abs(rescued.per_frame.at(0)[0].box.z - start.z) < 1e-12);
  for (int k = 0; k <= tau; ++k) REQUIRE(rescued.per_frame.count(k) == 1);

  KeyframePair birth;
  birth.t = 0;
  birth.tau = tau;
  birth.second.push_back(det_at(tau, kCar, 0.8, 0.1));
  const auto born = propagate(birth);
  REQUIRE(born.births.size() == 1);
  CHECK(born.births[0] == 0);
  REQUIRE(born.tracklets.size() == 1);
  CHECK(born.tracklets[0].kind == Tracklet::Kind::kBirth);
  CHECK(born.per_frame.count(0) == 0);  // born strictly after the first keyframe
  for (int k = 1; k < tau; ++k) {
    // Zero velocity history: stationary copies.
    CHECK(std::abs(born.per_frame.at(k)[0].box.x - kCar.x) < 1e-12);
    CHECK(std::abs(born.per_frame.at(k)[0].box.z - kCar.z) < 1e-12);
  }
}

TEST_CASE("propagate is exact on linear motion for every stride") {
  RandomStream rng(211);
  for (int tau = 1; tau <= 6; ++tau) {
    for (int trial = 0; trial < 10; ++trial) {
      const Box3D start(rng.uniform(-20, 20), 0.75, rng.uniform(10, 60), 1.8, 4.4, 1.5,
                        rng.uniform(-M_PI, M_PI));
      const Velocity v{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.0};
      KeyframePair pair;
      pair.t = 0;
      pair.tau = tau;
      pair.first.push_back(linear_detection(start, v, 0, tau, 1.0));
      Detection second;
      second.frame = tau;
      second.box = extrapolate(start, v, tau);
      second.co = CoOccurrence(1.0);
      pair.second.push_back(second);
      const auto result = propagate(pair);
      REQUIRE(result.matches.size() == 1);
      for (int k = 0; k <= tau; ++k) {
        const Box3D truth = extrapolate(start, v, k);
        const Box3D& got = result.per_frame.at(k)[0].box;
        CHECK(std::hypot(got.x - truth.x, got.z - truth.z) < 1e-9);
      }
    }
  }
}

TEST_CASE("propagate validates frame indices and context size") {
  KeyframePair pair;
  pair.t = 0;
  pair.tau = 3;
  pair.first.push_back(det_at(1, kCar));  // wrong frame
  CHECK_THROWS_AS(propagate(pair), std::invalid_argument);

  KeyframePair bad_second;
  bad_second.t = 0;
  bad_second.tau = 3;
  bad_second.second.push_back(det_at(2, kCar));
  CHECK_THROWS_AS(propagate(bad_second), std::invalid_argument);

  KeyframePair ok;
  ok.t = 0;
  ok.tau = 3;
  ok.first.push_back(det_at(0, kCar));
  TrackContext wrong;
  wrong.first_velocity = {Velocity{}, Velocity{}};
  CHECK_THROWS_AS(propagate(ok, wrong), std::invalid_argument);
}

TEST_CASE("propagate keeps matching one-to-one and covers every frame") {
  RandomStream rng(111);
  for (int trial = 0; trial < 30; ++trial) {
    const int tau = rng.uniform_int(1, 6);
    KeyframePair pair;
    pair.t = 0;
    pair.tau = tau;
    const int n = rng.uniform_int(0, 6);
    for (int i = 0; i < n; ++i) {
      const Box3D box(rng.uniform(-30, 30), 0.75, rng.uniform(5, 65), 1.8, 4.4, 1.5,
                      rng.uniform(-M_PI, M_PI));
      const Velocity v{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.0};
      pair.first.push_back(linear_detection(box, v, 0, tau, rng.uniform(0.0, 1.0) < 0.7 ? 0.9 : 0.1,
                                            rng.uniform(0.3, 1.0)));
      if (rng.uniform() < 0.8) {
        pair.second.push_back(det_at(tau, extrapolate(box, v, tau), rng.uniform(0.3, 1.0),
                                     rng.uniform(0.0, 1.0)));
      }
    }
    const auto result = propagate(pair);

    std::set<int> seconds;
    for (const auto& [i, j] : result.matches) {
      CHECK(seconds.insert(j).second);  // one-to-one
    }
    for (const auto& [i, j] : result.matches) {
      const auto& tracklet = *std::find_if(
          result.tracklets.begin(), result.tracklets.end(), [&, ii = i](const Tracklet& t) {
            return t.kind == Tracklet::Kind::kMatched && t.first_index == ii;
          });
      for (int k = 0; k <= tau; ++k) CHECK(tracklet.states.count(k) == 1);
    }

    // Determinism: a second run yields identical output.
    const auto again = propagate(pair);
    CHECK(again.matches == result.matches);
    CHECK(again.births == result.births);
    CHECK(again.deaths == result.deaths);
    REQUIRE(again.tracklets.size() == result.tracklets.size());
    for (std::size_t t = 0; t < result.tracklets.size(); ++t) {
      REQUIRE(again.tracklets[t].states.size() == result.tracklets[t].states.size());
      for (const auto& [frame, state] : result.tracklets[t].states) {
        const auto& other = again.tracklets[t].states.at(frame);
        CHECK(other.box.x == state.box.x);
        CHECK(other.box.z == state.box.z);
        CHECK(other.box.ry == state.box.ry);
      }
    }
  }
}

TEST_CASE("propagate emits orientation-continuous tracklets") {
  RandomStream rng(121);
  for (int trial = 0; trial < 50; ++trial) {
    const int tau = rng.uniform_int(2, 6);
    const Box3D a(0, 0.75, 20, 1.8, 4.4, 1.5, rng.uniform(-M_PI, M_PI));
    Box3D b = a;
    b.ry = rng.uniform(-M_PI, M_PI);  // possibly flipped detector output
    KeyframePair pair;
    pair.t = 0;
    pair.tau = tau;
    pair.first.push_back(linear_detection(a, Velocity{}, 0, tau, 1.0));
    pair.second.push_back(det_at(tau, b, 1.0, 1.0));
    const auto result = propagate(pair);
    for (const auto& tracklet : result.tracklets) {
      double prev = std::numeric_limits<double>::quiet_NaN();
      for (const auto& [frame, state] : tracklet.states) {
        if (!std::isnan(prev)) {
          CHECK(std::abs(angle_diff(state.box.ry, prev)) <= M_PI / 2.0 + 1e-12);
        }
        prev = state.box.ry;
      }
    }
  }
}

TEST_CASE("extend_track walks the motion model and stops at the crop") {
  const BevBounds bounds;
  const Box3D still(5.0, 0.75, 35.0, 1.8, 4.4, 1.5, 0.1);
  const auto copies = extend_track(still, Velocity{}, bounds, ExtendDirection::kForward);
  REQUIRE(copies.size() == 3);
  for (const auto& b : copies) {
    CHECK(b.x == doctest::Approx(5.0));
    CHECK(b.z == doctest::Approx(35.0));
  }

  const Box3D edge(39.5, 0.75, 35.0, 1.8, 4.4, 1.5, 0.0);
  CHECK(extend_track(edge, Velocity{1.0, 0.0, 0.0}, bounds, ExtendDirection::kForward).empty());

  const Box3D mover(0.0, 0.75, 35.0, 1.8, 4.4, 1.5, 0.0);
  const auto steps = extend_track(mover, Velocity{0.2, 0.4, 0.0}, bounds,
                                  ExtendDirection::kForward);
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].x == doctest::Approx(0.2));
  CHECK(steps[0].z == doctest::Approx(35.4));
  CHECK(steps[1].x == doctest::Approx(0.4));
  CHECK(steps[1].z == doctest::Approx(35.8));
  CHECK(steps[2].x == doctest::Approx(0.6));
  CHECK(steps[2].z == doctest::Approx(36.2));

  const auto backwards = extend_track(mover, Velocity{0.2, 0.4, 0.0}, bounds,
                                      ExtendDirection::kBackward);
  REQUIRE(backwards.size() == 3);
  CHECK(backwards[0].x == doctest::Approx(-0.2));
  CHECK(backwards[0].z == doctest::Approx(34.6));
}

}  // TEST_SUITE
