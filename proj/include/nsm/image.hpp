#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nsm/bev.hpp"
#include "nsm/common.hpp"

namespace nsm {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t& at(int row, int col) {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
};

// ---- PGM (P5, 8-bit) ----

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  std::string header = "P5\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  // Minimal P5 reader: magic, whitespace/comments, width height maxval, raster.
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_ws();
    int v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) fail(ErrorKind::missing_input, "malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(ErrorKind::missing_input, "not a P5 PGM file");
  pos = 2;
  GrayImage img;
  img.width = read_int();
  img.height = read_int();
  const int maxval = read_int();
  if (maxval != 255) fail(ErrorKind::missing_input, "PGM maxval must be 255");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos < n)
    fail(ErrorKind::missing_input, "truncated PGM raster");
  img.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + n);
  return img;
}

// ---- PNG (8-bit grayscale, zlib-deflated) ----

namespace detail {

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back((v >> 24) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc = crc32(0, out.data() + crc_start, out.size() - crc_start);
  put_be32(out, crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  detail::png_chunk(out, "IHDR", ihdr);

  // Filter byte 0 per scanline.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (img.width + 1));
  for (int r = 0; r < img.height; ++r) {
    raw.push_back(0);
    raw.insert(raw.end(),
               img.pixels.begin() + static_cast<std::size_t>(r) * img.width,
               img.pixels.begin() + static_cast<std::size_t>(r + 1) * img.width);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    fail(ErrorKind::internal, "PNG deflate failed");
  comp.resize(comp_len);
  detail::png_chunk(out, "IDAT", comp);
  detail::png_chunk(out, "IEND", {});
  return out;
}

// ---- grid <-> image ----

inline GrayImage grid_to_image(const BevGrid& grid) {
  GrayImage img;
  img.width = grid.config.resolution;
  img.height = grid.config.resolution;
  img.pixels.resize(grid.cells.size());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    float v = std::clamp(grid.cells[i], 0.0f, 1.0f);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

inline BevGrid image_to_grid(const GrayImage& img, const BevConfig& cfg) {
  if (img.width != cfg.resolution || img.height != cfg.resolution)
    fail(ErrorKind::missing_input,
         "frame image size " + std::to_string(img.width) + "x" +
             std::to_string(img.height) + " does not match resolution " +
             std::to_string(cfg.resolution));
  BevGrid grid(cfg);
  for (std::size_t i = 0; i < grid.cells.size(); ++i)
    grid.cells[i] = img.pixels[i] / 255.0f;
  return grid;
}

// Boxes drawn as 1-pixel outlines at 255; meters -> pixels at render time.
inline GrayImage render_grid(const BevGrid& grid,
                             const std::vector<OrientedBox>& boxes = {}) {
  GrayImage img = grid_to_image(grid);
  const BevConfig& cfg = grid.config;
  const float cell = cfg.cell_size();
  auto to_pixel = [&](double x, double y, int& row, int& col) {
    row = cfg.resolution - 1 -
          static_cast<int>(std::floor((x - cfg.x_min) / cell));
    col = static_cast<int>(std::floor((y - cfg.y_min) / cell));
  };
  for (const auto& box : boxes) {
    auto cs = box.corners();
    for (int e = 0; e < 4; ++e) {
      const auto& a = cs[e];
      const auto& b = cs[(e + 1) % 4];
      const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
      const int steps = std::max(1, static_cast<int>(std::ceil(len / (cell * 0.5))));
      for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        int row, col;
        to_pixel(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), row, col);
        if (row >= 0 && row < img.height && col >= 0 && col < img.width)
          img.at(row, col) = 255;
      }
    }
  }
  return img;
}

// ---- file helpers ----

inline void write_bytes(const std::filesystem::path& path,
                        const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_input, "cannot open for write: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_input, "cannot open: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

inline void save_grid_pgm(const BevGrid& grid, const std::filesystem::path& p) {
  write_bytes(p, encode_pgm(grid_to_image(grid)));
}

inline BevGrid load_grid_pgm(const std::filesystem::path& p,
                             const BevConfig& cfg) {
  return image_to_grid(decode_pgm(read_bytes(p)), cfg);
}

}  // namespace nsm
