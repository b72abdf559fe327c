#include "streamtrack/kitti_io.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

namespace streamtrack {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) out.push_back(token);
  return out;
}

double parse_double(const std::string& token, int line) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(line, "expected a number, got '" + token + "'");
  }
  return value;
}

int parse_int(const std::string& token, int line) {
  int value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(line, "expected an integer, got '" + token + "'");
  }
  return value;
}

std::string fmt(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  // Tiny negatives round to "-0.000000"; keep the zero unsigned.
  if (buf[0] == '-' && std::string_view(buf + 1).find_first_not_of("0.") == std::string_view::npos) {
    return buf + 1;
  }
  return buf;
}

}  // namespace

ParseError::ParseError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

Box3D box_from_label(const LabelRow& row) {
  return Box3D(row.x, row.y - 0.5 * row.height, row.z, row.width, row.length, row.height,
               row.rotation_y);
}

LabelRow label_from_box(const Box3D& box, int frame, int track_id,
                        const std::string& category, double score) {
  LabelRow row;
  row.frame = frame;
  row.track_id = track_id;
  row.category = category;
  row.alpha = normalize_angle(box.ry - std::atan2(box.x, box.z));
  row.height = box.h;
  row.width = box.w;
  row.length = box.l;
  row.x = box.x;
  row.y = box.y + 0.5 * box.h;
  row.z = box.z;
  row.rotation_y = box.ry;
  row.score = score;
  return row;
}

std::vector<LabelRow> parse_labels(std::istream& in) {
  std::vector<LabelRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 17 && tokens.size() != 18) {
      throw ParseError(line_no, "expected 17 or 18 fields, got " +
                                    std::to_string(tokens.size()));
    }
    LabelRow row;
    row.frame = parse_int(tokens[0], line_no);
    row.track_id = parse_int(tokens[1], line_no);
    row.category = tokens[2];
    row.truncated = parse_double(tokens[3], line_no);
    row.occluded = parse_int(tokens[4], line_no);
    row.alpha = parse_double(tokens[5], line_no);
    for (int b = 0; b < 4; ++b) {
      row.bbox2d[static_cast<std::size_t>(b)] = parse_double(tokens[static_cast<std::size_t>(6 + b)], line_no);
    }
    row.height = parse_double(tokens[10], line_no);
    row.width = parse_double(tokens[11], line_no);
    row.length = parse_double(tokens[12], line_no);
    row.x = parse_double(tokens[13], line_no);
    row.y = parse_double(tokens[14], line_no);
    row.z = parse_double(tokens[15], line_no);
    row.rotation_y = parse_double(tokens[16], line_no);
    if (tokens.size() == 18) row.score = parse_double(tokens[17], line_no);
    if (!row.dont_care()) {
      if (row.height <= 0.0 || row.width <= 0.0 || row.length <= 0.0) {
        throw ParseError(line_no, "non-positive dimensions for category " + row.category);
      }
      if (std::abs(row.rotation_y) > M_PI + 1e-9) {
        throw ParseError(line_no, "rotation_y outside [-pi, pi]");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_labels(std::ostream& out, const std::vector<LabelRow>& rows) {
  for (const auto& row : rows) {
    out << row.frame << ' ' << row.track_id << ' ' << row.category << ' '
        << fmt(row.truncated) << ' ' << row.occluded << ' ' << fmt(row.alpha);
    for (const double b : row.bbox2d) out << ' ' << fmt(b);
    out << ' ' << fmt(row.height) << ' ' << fmt(row.width) << ' ' << fmt(row.length) << ' '
        << fmt(row.x) << ' ' << fmt(row.y) << ' ' << fmt(row.z) << ' ' << fmt(row.rotation_y);
    if (row.score) out << ' ' << fmt(*row.score);
    out << '\n';
  }
}

void write_labels(std::ostream& out, const std::vector<Track>& tracks,
                  const std::string& category) {
  std::vector<LabelRow> rows;
  for (const auto& track : tracks) {
    for (const auto& [frame, state] : track.states) {
      rows.push_back(label_from_box(state.box, frame, track.id, category, state.score));
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const LabelRow& a, const LabelRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  write_labels(out, rows);
}

std::vector<Track> tracks_from_labels(const std::vector<LabelRow>& rows,
                                      const std::string& category) {
  std::map<int, Track> by_id;
  for (const auto& row : rows) {
    if (row.dont_care() || row.track_id < 0 || row.category != category) continue;
    Track& track = by_id[row.track_id];
    track.id = row.track_id;
    track.states[row.frame] = TrackState{box_from_label(row), row.score.value_or(1.0)};
  }
  std::vector<Track> out;
  out.reserve(by_id.size());
  for (auto& [id, track] : by_id) out.push_back(std::move(track));
  return out;
}

std::map<int, Pose> parse_poses(std::istream& in) {
  std::map<int, Pose> poses;
  std::string line;
  int line_no = 0;
  int frame = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 12) {
      throw ParseError(line_no, "expected 12 numbers, got " + std::to_string(tokens.size()));
    }
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        r(i, j) = parse_double(tokens[static_cast<std::size_t>(4 * i + j)], line_no);
      }
      t(i) = parse_double(tokens[static_cast<std::size_t>(4 * i + 3)], line_no);
    }
    const double defect = (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (defect > 1e-6 || r.determinant() <= 0.0) {
      throw ParseError(line_no, "rotation is not orthonormal (defect " + fmt(defect, 9) + ")");
    }
    if (defect > 1e-12) {
      // Nearest-rotation projection absorbs formatting round-off.
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::Matrix3d projected = svd.matrixU() * svd.matrixV().transpose();
      if (projected.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        projected = svd.matrixU() * flip * svd.matrixV().transpose();
      }
      r = projected;
    }
    poses.emplace(frame++, Pose(r, t));
  }
  return poses;
}

void write_poses(std::ostream& out, const std::map<int, Pose>& poses) {
  // 9 decimals: 6 would push the rotation's orthonormality defect past the
  // 1e-6 parse tolerance in the worst case.
  for (const auto& [frame, pose] : poses) {
    const auto& r = pose.rotation();
    const auto& t = pose.translation();
    for (int i = 0; i < 3; ++i) {
      out << fmt(r(i, 0), 9) << ' ' << fmt(r(i, 1), 9) << ' ' << fmt(r(i, 2), 9) << ' '
          << fmt(t(i), 9);
      out << (i == 2 ? '\n' : ' ');
    }
  }
}

namespace {

constexpr const char* kDetectionSchema = "streamtrack.detections.v1";

}  // namespace

DetectionData parse_detections(std::istream& in) {
  DetectionData data;
  std::string line;
  int line_no = 0;
  enum { kSchema, kSeq, kTau, kFrames, kRows } expect = kSchema;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string& tag = tokens[0];
    switch (expect) {
      case kSchema:
        if (tag != "schema" || tokens.size() != 2 || tokens[1] != kDetectionSchema) {
          throw ParseError(line_no, "expected 'schema " + std::string(kDetectionSchema) + "'");
        }
        expect = kSeq;
        continue;
      case kSeq:
        if (tag != "seq" || tokens.size() != 2) throw ParseError(line_no, "expected 'seq <id>'");
        data.sequence_id = tokens[1];
        expect = kTau;
        continue;
      case kTau:
        if (tag != "tau" || tokens.size() != 2) throw ParseError(line_no, "expected 'tau <n>'");
        data.tau = parse_int(tokens[1], line_no);
        if (data.tau < 1) throw ParseError(line_no, "tau must be >= 1");
        expect = kFrames;
        continue;
      case kFrames:
        if (tag != "frames" || tokens.size() != 2) {
          throw ParseError(line_no, "expected 'frames <n>'");
        }
        data.frames = parse_int(tokens[1], line_no);
        if (data.frames < 1) throw ParseError(line_no, "frames must be >= 1");
        expect = kRows;
        continue;
      case kRows:
        break;
    }
    if (tag != "det" || tokens.size() != 14) {
      throw ParseError(line_no, "expected 'det' row with 13 values");
    }
    Detection det;
    det.frame = parse_int(tokens[1], line_no);
    if (det.frame % data.tau != 0 || det.frame < 0 || det.frame >= data.frames) {
      throw ParseError(line_no, "keyframe " + std::to_string(det.frame) +
                                    " is not a multiple of tau inside the sequence");
    }
    const double x = parse_double(tokens[2], line_no);
    const double y = parse_double(tokens[3], line_no);
    const double z = parse_double(tokens[4], line_no);
    const double w = parse_double(tokens[5], line_no);
    const double l = parse_double(tokens[6], line_no);
    const double h = parse_double(tokens[7], line_no);
    const double ry = parse_double(tokens[8], line_no);
    if (w <= 0.0 || l <= 0.0 || h <= 0.0) throw ParseError(line_no, "non-positive dimensions");
    det.box = Box3D(x, y, z, w, l, h, ry);
    det.score = parse_double(tokens[9], line_no);
    if (det.score < 0.0 || det.score > 1.0) throw ParseError(line_no, "score outside [0, 1]");
    const double p_co = parse_double(tokens[10], line_no);
    if (p_co < 0.0 || p_co > 1.0) throw ParseError(line_no, "p_co outside [0, 1]");
    det.co = CoOccurrence(p_co);
    det.offsets.dx = parse_double(tokens[11], line_no);
    det.offsets.dz = parse_double(tokens[12], line_no);
    det.offsets.dry = parse_double(tokens[13], line_no);
    data.by_keyframe[det.frame].push_back(det);
  }
  if (expect != kRows) throw ParseError(line_no, "incomplete header");
  return data;
}

void write_detections(std::ostream& out, const DetectionData& data) {
  out << "schema " << kDetectionSchema << '\n';
  out << "seq " << data.sequence_id << '\n';
  out << "tau " << data.tau << '\n';
  out << "frames " << data.frames << '\n';
  for (const auto& [keyframe, dets] : data.by_keyframe) {
    for (const auto& det : dets) {
      out << "det " << keyframe << ' ' << fmt(det.box.x, 9) << ' ' << fmt(det.box.y, 9) << ' '
          << fmt(det.box.z, 9) << ' ' << fmt(det.box.w, 9) << ' ' << fmt(det.box.l, 9) << ' '
          << fmt(det.box.h, 9) << ' ' << fmt(det.box.ry, 9) << ' ' << fmt(det.score, 9) << ' '
          << fmt(det.co.p_co, 9) << ' ' << fmt(det.offsets.dx, 9) << ' '
          << fmt(det.offsets.dz, 9) << ' ' << fmt(det.offsets.dry, 9) << '\n';
    }
  }
}

std::vector<LabelRow> merge_label_overlay(const std::vector<LabelRow>& base,
                                          const std::vector<LabelRow>& overlay,
                                          double proximity_m) {
  std::vector<LabelRow> merged = base;
  for (const auto& row : overlay) {
    const bool duplicate = std::any_of(base.begin(), base.end(), [&](const LabelRow& b) {
      if (b.frame != row.frame || b.category != row.category) return false;
      const double dx = b.x - row.x;
      const double dy = b.y - row.y;
      const double dz = b.z - row.z;
      return std::sqrt(dx * dx + dy * dy + dz * dz) < proximity_m;
    });
    if (!duplicate) merged.push_back(row);
  }
  std::stable_sort(merged.begin(), merged.end(), [](const LabelRow& a, const LabelRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  return merged;
}

}  // namespace streamtrack
