#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "stlio/evaluation.hpp"
#include "stlio/preprocessing.hpp"
#include "stlio/scc.hpp"
#include "stlio/simulator.hpp"

namespace stlio {

/// One frame as stored on disk. Points carry absolute times in memory; the
/// file stores offsets from frame_time (the scan start).
struct FrameData {
  double frame_time = 0.0;
  std::vector<LabeledPoint> points;
};

inline constexpr std::uint32_t kFrameFormatVersion = 1;

void write_frame(const std::string& path, const FrameData& frame);
FrameData read_frame(const std::string& path);

void write_tum_trajectory(const std::string& path, const Trajectory& trajectory);
Trajectory read_tum_trajectory(const std::string& path);

void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples);
std::vector<ImuSample> read_imu_csv(const std::string& path);

/// Writes frames/<frame_NNNNNN.bin>, frames.idx, imu.csv, and
/// groundtruth_tum.txt under `dir` (created if needed).
void write_dataset(const std::string& dir, const SimDataset& data);

/// Dataset handle: frame files are read on demand.
struct Dataset {
  std::string dir;
  std::vector<std::string> frame_paths;  // absolute, in frame order
  std::vector<ImuSample> imu;
  std::optional<Trajectory> groundtruth;

  std::size_t size() const { return frame_paths.size(); }
  FrameData frame(std::size_t index) const;
};

Dataset open_dataset(const std::string& dir);

struct MapPoint {
  Vec3 position = Vec3::Zero();
  FinalLabel label = FinalLabel::Static;
};

/// Streaming "x y z label" writer for the full-resolution labeled map.
class MapWriter {
 public:
  explicit MapWriter(const std::string& path);
  void add(const Vec3& position, FinalLabel label);

 private:
  std::ofstream out_;
};

std::vector<MapPoint> read_map(const std::string& path);

/// Line-per-record JSON diagnostics stream.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  void write_line(const std::string& json_text);

 private:
  std::ofstream out_;
};

}  // namespace stlio
