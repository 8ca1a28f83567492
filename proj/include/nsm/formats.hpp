#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nsm/bev.hpp"
#include "nsm/common.hpp"
#include "nsm/image.hpp"

namespace nsm {

namespace fs = std::filesystem;

// Point-cloud: flat binary little-endian float32 (x,y,z,intensity) quadruples,
// KITTI velodyne-compatible.
inline PointCloud read_pointcloud_bin(const fs::path& path) {
  auto bytes = read_bytes(path);
  if (bytes.size() % 16 != 0)
    fail(ErrorKind::missing_input,
         "point-cloud file size not a multiple of 16: " + path.string());
  PointCloud pcl;
  const std::size_t n = bytes.size() / 16;
  pcl.points.reserve(n);
  const float* f = reinterpret_cast<const float*>(bytes.data());
  for (std::size_t i = 0; i < n; ++i)
    pcl.add(f[4 * i], f[4 * i + 1], f[4 * i + 2], f[4 * i + 3]);
  return pcl;
}

inline void write_pointcloud_bin(const PointCloud& pcl, const fs::path& path) {
  std::vector<std::uint8_t> bytes(pcl.points.size() * 16);
  float* f = reinterpret_cast<float*>(bytes.data());
  for (std::size_t i = 0; i < pcl.points.size(); ++i) {
    f[4 * i] = pcl.points[i].x;
    f[4 * i + 1] = pcl.points[i].y;
    f[4 * i + 2] = pcl.points[i].z;
    f[4 * i + 3] = pcl.points[i].intensity;
  }
  write_bytes(path, bytes);
}

// Label file: one box per line, `class_id cx cy width length yaw`
// (meters / radians).
inline std::vector<OrientedBox> read_labels(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot open labels: " + path.string());
  std::vector<OrientedBox> boxes;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    OrientedBox b;
    if (!(is >> b.class_id >> b.cx >> b.cy >> b.width >> b.length >> b.yaw))
      fail(ErrorKind::missing_input, "malformed label line in " + path.string() +
                                         ": " + line);
    b.yaw = normalize_yaw(b.yaw);
    boxes.push_back(b);
  }
  return boxes;
}

inline void write_labels(const std::vector<OrientedBox>& boxes,
                         const fs::path& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot write labels: " + path.string());
  f << std::setprecision(9);
  for (const auto& b : boxes)
    f << b.class_id << ' ' << b.cx << ' ' << b.cy << ' ' << b.width << ' '
      << b.length << ' ' << b.yaw << '\n';
}

// Detections file: `frame_id class_id score cx cy width length yaw`.
struct Detection {
  std::string frame_id;
  OrientedBox box;
};

inline std::vector<Detection> read_detections(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot open detections: " + path.string());
  std::vector<Detection> dets;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    Detection d;
    if (!(is >> d.frame_id >> d.box.class_id >> d.box.score >> d.box.cx >>
          d.box.cy >> d.box.width >> d.box.length >> d.box.yaw))
      fail(ErrorKind::missing_input,
           "malformed detection line in " + path.string() + ": " + line);
    d.box.yaw = normalize_yaw(d.box.yaw);
    dets.push_back(d);
  }
  return dets;
}

inline void write_detections(const std::vector<Detection>& dets,
                             const fs::path& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot write detections: " + path.string());
  f << std::setprecision(9);
  for (const auto& d : dets)
    f << d.frame_id << ' ' << d.box.class_id << ' ' << d.box.score << ' '
      << d.box.cx << ' ' << d.box.cy << ' ' << d.box.width << ' '
      << d.box.length << ' ' << d.box.yaw << '\n';
}

// Dataset manifest: tab-separated `frame_path  label_path  domain  mapping`.
struct ManifestEntry {
  std::string frame_path;
  std::string label_path;
  std::string domain;   // "real" | "sim"
  std::string mapping;  // "identity" | "cyclegan" | "nst:<k>" | "none"
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;

  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& e : entries) {
      h = fnv1a(e.frame_path, h);
      h = fnv1a(e.label_path, h);
      h = fnv1a(e.domain, h);
      h = fnv1a(e.mapping, h);
    }
    return h;
  }
};

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot open manifest: " + path.string());
  DatasetManifest m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    ManifestEntry e;
    if (!std::getline(is, e.frame_path, '\t') ||
        !std::getline(is, e.label_path, '\t') ||
        !std::getline(is, e.domain, '\t') || !std::getline(is, e.mapping))
      fail(ErrorKind::missing_input,
           "malformed manifest line in " + path.string() + ": " + line);
    m.entries.push_back(e);
  }
  return m;
}

inline void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot write manifest: " + path.string());
  for (const auto& e : m.entries)
    f << e.frame_path << '\t' << e.label_path << '\t' << e.domain << '\t'
      << e.mapping << '\n';
}

inline std::uint64_t file_hash(const fs::path& path) {
  auto bytes = read_bytes(path);
  return fnv1a(bytes.data(), bytes.size());
}

// KITTI 3D label line: `type trunc occl alpha bbox(4) h w l x y z ry`.
// Camera coords (x right, y down, z forward) are mapped into our BEV frame
// (x forward, y left): bev_x = z, bev_y = -x; yaw = -ry - pi/2.
inline std::vector<Box3d> read_kitti_labels(const fs::path& path,
                                            bool cars_only = true) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::missing_input, "cannot open KITTI labels: " + path.string());
  std::vector<Box3d> boxes;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string type;
    double trunc, occl, alpha, b0, b1, b2, b3, h, w, l, x, y, z, ry;
    if (!(is >> type >> trunc >> occl >> alpha >> b0 >> b1 >> b2 >> b3 >> h >>
          w >> l >> x >> y >> z >> ry))
      continue;
    if (cars_only && type != "Car") continue;
    Box3d box;
    box.cx = z;
    box.cy = -x;
    box.cz = -y + h / 2;
    box.width = w;
    box.length = l;
    box.height = h;
    box.yaw = normalize_yaw(-ry - std::numbers::pi / 2);
    box.class_id = 0;
    boxes.push_back(box);
  }
  return boxes;
}

}  // namespace nsm
