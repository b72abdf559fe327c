#pragma once

#include "streamtrack/geometry.hpp"
#include "streamtrack/moi.hpp"
#include "streamtrack/tracker.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace streamtrack {

/// Parse failure carrying the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// One row of a KITTI tracking label file (17 fields, or 18 with a score).
/// location is the devkit convention: center of the bottom face, camera
/// coordinates. bbox2d is pass-through only.
struct LabelRow {
  int frame = 0;
  int track_id = -1;
  std::string category = "Car";
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox2d = {0.0, 0.0, 0.0, 0.0};
  double height = 0.0;  // dims in file order: h w l
  double width = 0.0;
  double length = 0.0;
  double x = 0.0;  // location
  double y = 0.0;
  double z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  bool dont_care() const { return category == "DontCare"; }
};

/// LabelRow <-> Box3D. The box center sits half a height above the devkit's
/// bottom-face location (camera y points down).
Box3D box_from_label(const LabelRow& row);
LabelRow label_from_box(const Box3D& box, int frame, int track_id,
                        const std::string& category, double score);

std::vector<LabelRow> parse_labels(std::istream& in);
void write_labels(std::ostream& out, const std::vector<LabelRow>& rows);

/// Tracking-submission writer: rows sorted by frame then id, score included.
void write_labels(std::ostream& out, const std::vector<Track>& tracks,
                  const std::string& category);

/// Groups label rows into tracks, keeping only the requested category and
/// rows with a non-negative track id.
std::vector<Track> tracks_from_labels(const std::vector<LabelRow>& rows,
                                      const std::string& category);

/// Per-frame ego-to-world poses, one row of 12 numbers (row-major 3x4).
/// Rotations off by at most 1e-6 are projected back onto SO(3); anything
/// worse is a ParseError.
std::map<int, Pose> parse_poses(std::istream& in);
void write_poses(std::ostream& out, const std::map<int, Pose>& poses);

/// Detection-interchange payload: the artifact's stand-in for a detector run.
struct DetectionData {
  std::string sequence_id = "0000";
  int tau = 1;
  int frames = 0;
  std::map<int, std::vector<Detection>> by_keyframe;
};

DetectionData parse_detections(std::istream& in);
void write_detections(std::ostream& out, const DetectionData& data);

/// Adds overlay rows (manually recovered labels) that have no base row of the
/// same frame and category within the given center distance. Source files are
/// never edited; the merge happens on the parsed rows.
std::vector<LabelRow> merge_label_overlay(const std::vector<LabelRow>& base,
                                          const std::vector<LabelRow>& overlay,
                                          double proximity_m = 2.0);

}  // namespace streamtrack
