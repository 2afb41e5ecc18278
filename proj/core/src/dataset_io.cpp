#include "stlio/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "stlio/errors.hpp"

namespace stlio {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'L', 'F'};
constexpr std::size_t kPointBytes = 21;  // 3*f32 + f32 + u16 + u8 + u16

// little-endian scalar packing, independent of host layout
template <typename T>
void put(std::string& buf, T value) {
  std::uint64_t bits = 0;
  static_assert(sizeof(T) <= 8);
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw DataError("truncated frame file");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failure: " + path);
}

}  // namespace

void write_frame(const std::string& path, const FrameData& frame) {
  std::string buf;
  buf.reserve(20 + frame.points.size() * kPointBytes);
  buf.append(kMagic, 4);
  put<std::uint32_t>(buf, kFrameFormatVersion);
  put<double>(buf, frame.frame_time);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(frame.points.size()));
  for (const auto& p : frame.points) {
    put<float>(buf, static_cast<float>(p.point.position.x()));
    put<float>(buf, static_cast<float>(p.point.position.y()));
    put<float>(buf, static_cast<float>(p.point.position.z()));
    put<float>(buf, static_cast<float>(p.point.time - frame.frame_time));
    put<std::uint16_t>(buf, p.ring);
    put<std::uint8_t>(buf, p.truth_label);
    put<std::uint16_t>(buf, p.mover_id);
  }
  spill(path, buf);
}

FrameData read_frame(const std::string& path) {
  const std::string buf = slurp(path);
  if (buf.size() < 20 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw DataError("bad frame magic: " + path);
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(buf, pos);
  if (version != kFrameFormatVersion) {
    throw DataError("unsupported frame version " + std::to_string(version) + ": " + path);
  }
  FrameData frame;
  frame.frame_time = take<double>(buf, pos);
  const auto count = take<std::uint32_t>(buf, pos);
  if (buf.size() != pos + count * kPointBytes) {
    throw DataError("frame size does not match its point count: " + path);
  }
  frame.points.resize(count);
  for (auto& p : frame.points) {
    const float x = take<float>(buf, pos);
    const float y = take<float>(buf, pos);
    const float z = take<float>(buf, pos);
    const float dt = take<float>(buf, pos);
    p.point.position = Vec3(x, y, z);
    p.point.time = frame.frame_time + dt;
    p.ring = take<std::uint16_t>(buf, pos);
    p.truth_label = take<std::uint8_t>(buf, pos);
    p.mover_id = take<std::uint16_t>(buf, pos);
  }
  return frame;
}

void write_tum_trajectory(const std::string& path, const Trajectory& trajectory) {
  std::string buf;
  char line[256];
  for (const auto& [t, pose] : trajectory.samples) {
    std::snprintf(line, sizeof(line), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", t,
                  pose.translation.x(), pose.translation.y(), pose.translation.z(),
                  pose.rotation.x(), pose.rotation.y(), pose.rotation.z(), pose.rotation.w());
    buf += line;
  }
  spill(path, buf);
}

Trajectory read_tum_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read trajectory: " + path);
  Trajectory out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw DataError("malformed trajectory line in " + path + ": " + line);
    }
    Pose pose;
    pose.translation = Vec3(tx, ty, tz);
    pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    out.samples.emplace_back(t, pose);
  }
  if (out.samples.empty()) throw DataError("empty trajectory: " + path);
  return out;
}

void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples) {
  std::string buf = "time,gx,gy,gz,ax,ay,az\n";
  char line[256];
  for (const auto& s : samples) {
    std::snprintf(line, sizeof(line), "%.9f,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n", s.time,
                  s.angular_velocity.x(), s.angular_velocity.y(), s.angular_velocity.z(),
                  s.linear_acceleration.x(), s.linear_acceleration.y(),
                  s.linear_acceleration.z());
    buf += line;
  }
  spill(path, buf);
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read IMU stream: " + path);
  std::vector<ImuSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("time", 0) == 0) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream ss(line);
    ImuSample s;
    if (!(ss >> s.time >> s.angular_velocity.x() >> s.angular_velocity.y() >>
          s.angular_velocity.z() >> s.linear_acceleration.x() >> s.linear_acceleration.y() >>
          s.linear_acceleration.z())) {
      throw DataError("malformed IMU line in " + path + ": " + line);
    }
    out.push_back(s);
  }
  if (out.empty()) throw DataError("empty IMU stream: " + path);
  return out;
}

void write_dataset(const std::string& dir, const SimDataset& data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "frames", ec);
  if (ec) throw DataError("cannot create dataset directory: " + dir);

  std::string index;
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    char name[64];
    std::snprintf(name, sizeof(name), "frames/frame_%06zu.bin", f);
    FrameData frame;
    frame.frame_time = data.frames[f].scan_start;
    frame.points = data.frames[f].points;
    write_frame((fs::path(dir) / name).string(), frame);
    index += name;
    index += '\n';
  }
  spill((fs::path(dir) / "frames.idx").string(), index);
  write_imu_csv((fs::path(dir) / "imu.csv").string(), data.imu);

  Trajectory gt;
  gt.samples = data.groundtruth;
  write_tum_trajectory((fs::path(dir) / "groundtruth_tum.txt").string(), gt);
}

FrameData Dataset::frame(std::size_t index) const { return read_frame(frame_paths.at(index)); }

Dataset open_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset out;
  out.dir = dir;

  std::ifstream idx(fs::path(dir) / "frames.idx");
  if (!idx) throw DataError("cannot read frames.idx under " + dir);
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    out.frame_paths.push_back((fs::path(dir) / line).string());
  }
  if (out.frame_paths.empty()) throw DataError("dataset lists no frames: " + dir);

  out.imu = read_imu_csv((fs::path(dir) / "imu.csv").string());
  const auto gt_path = fs::path(dir) / "groundtruth_tum.txt";
  if (fs::exists(gt_path)) out.groundtruth = read_tum_trajectory(gt_path.string());
  return out;
}

MapWriter::MapWriter(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw DataError("cannot write map file: " + path);
}

void MapWriter::add(const Vec3& position, FinalLabel label) {
  char line[128];
  std::snprintf(line, sizeof(line), "%.4f %.4f %.4f %d\n", position.x(), position.y(),
                position.z(), label == FinalLabel::Dynamic ? 1 : 0);
  out_ << line;
}

std::vector<MapPoint> read_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read map file: " + path);
  std::vector<MapPoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    MapPoint p;
    int label = 0;
    if (!(ss >> p.position.x() >> p.position.y() >> p.position.z() >> label)) {
      throw DataError("malformed map line in " + path + ": " + line);
    }
    p.label = label == 1 ? FinalLabel::Dynamic : FinalLabel::Static;
    out.push_back(p);
  }
  return out;
}

JsonlWriter::JsonlWriter(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw DataError("cannot write diagnostics file: " + path);
}

void JsonlWriter::write_line(const std::string& json_text) { out_ << json_text << '\n'; }

}  // namespace stlio
