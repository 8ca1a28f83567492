#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nsm/adam.hpp"
#include "nsm/common.hpp"
#include "nsm/layers.hpp"
#include "nsm/tensor.hpp"

namespace nsm {

// Little-endian binary checkpoint: magic `NSMCKPT1`, metadata, then
// length-prefixed named float32 tensors. Save -> load -> save is
// byte-identical.
struct Checkpoint {
  static constexpr char kMagic[9] = "NSMCKPT1";
  static constexpr std::uint32_t kVersion = 1;

  std::string task;        // cyclegan | nst | encoder | detector
  std::string arch;        // architecture descriptor
  std::uint64_t config_hash = 0;
  std::int64_t epoch = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<float>>>>
      tensors;  // insertion-ordered

  void put(const std::string& name, const Shape& shape,
           const std::vector<float>& data) {
    tensors.emplace_back(name, std::make_pair(shape, data));
  }

  void put(const std::string& name, const Tensor<float>& t) {
    put(name, t.shape(), t.data());
  }

  const std::pair<Shape, std::vector<float>>& get(const std::string& name) const {
    for (const auto& [n, v] : tensors)
      if (n == name) return v;
    fail(ErrorKind::checkpoint, "checkpoint missing tensor: " + name);
  }

  bool has(const std::string& name) const {
    for (const auto& [n, v] : tensors)
      if (n == name) return true;
    return false;
  }

  void load_into(const std::string& name, Tensor<float>& t) const {
    const auto& [shape, data] = get(name);
    if (shape != t.shape())
      fail(ErrorKind::checkpoint, "checkpoint tensor " + name +
                                      " has shape " + shape_str(shape) +
                                      ", expected " + shape_str(t.shape()));
    t.data() = data;
  }
};

namespace detail {

template <typename V>
void write_pod(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) fail(ErrorKind::checkpoint, "truncated checkpoint");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  auto len = read_pod<std::uint32_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) fail(ErrorKind::checkpoint, "truncated checkpoint string");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt,
                            const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_input, "cannot write checkpoint: " + path.string());
  f.write(Checkpoint::kMagic, 8);
  detail::write_pod<std::uint32_t>(f, Checkpoint::kVersion);
  detail::write_string(f, ckpt.task);
  detail::write_string(f, ckpt.arch);
  detail::write_pod<std::uint64_t>(f, ckpt.config_hash);
  detail::write_pod<std::int64_t>(f, ckpt.epoch);
  detail::write_string(f, ckpt.rng_state);
  detail::write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, sv] : ckpt.tensors) {
    detail::write_string(f, name);
    detail::write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(sv.first.size()));
    for (int d : sv.first) detail::write_pod<std::int32_t>(f, d);
    detail::write_pod<std::uint64_t>(f, sv.second.size());
    f.write(reinterpret_cast<const char*>(sv.second.data()),
            static_cast<std::streamsize>(sv.second.size() * sizeof(float)));
  }
  if (!f) fail(ErrorKind::internal, "checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_input, "cannot open checkpoint: " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, Checkpoint::kMagic, 8) != 0)
    fail(ErrorKind::checkpoint, "bad checkpoint magic in " + path.string());
  auto version = detail::read_pod<std::uint32_t>(f);
  if (version != Checkpoint::kVersion)
    fail(ErrorKind::checkpoint, "unsupported checkpoint version " +
                                    std::to_string(version));
  Checkpoint ckpt;
  ckpt.task = detail::read_string(f);
  ckpt.arch = detail::read_string(f);
  ckpt.config_hash = detail::read_pod<std::uint64_t>(f);
  ckpt.epoch = detail::read_pod<std::int64_t>(f);
  ckpt.rng_state = detail::read_string(f);
  auto count = detail::read_pod<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = detail::read_string(f);
    auto ndim = detail::read_pod<std::uint32_t>(f);
    Shape shape(ndim);
    for (auto& d : shape) d = detail::read_pod<std::int32_t>(f);
    auto n = detail::read_pod<std::uint64_t>(f);
    std::vector<float> data(n);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(n * sizeof(float)));
    if (!f) fail(ErrorKind::checkpoint, "truncated checkpoint tensor " + name);
    ckpt.put(name, shape, data);
  }
  return ckpt;
}

// Optimizer state round-trips as three entries per parameter.
inline void put_optimizer(Checkpoint& ckpt, const std::string& prefix,
                          const Optimizer<float>& opt) {
  for (std::size_t i = 0; i < opt.params.size(); ++i) {
    const auto& name = opt.params[i].first;
    const auto& st = opt.states[i];
    const int n = static_cast<int>(opt.params[i].second.size());
    ckpt.put(prefix + "/" + name + "/m", {n},
             st.first_moment.empty() ? std::vector<float>(n, 0.0f)
                                     : st.first_moment);
    ckpt.put(prefix + "/" + name + "/v", {n},
             st.second_moment.empty() ? std::vector<float>(n, 0.0f)
                                      : st.second_moment);
    ckpt.put(prefix + "/" + name + "/step", {1},
             {static_cast<float>(st.step_count)});
  }
}

inline void load_optimizer(const Checkpoint& ckpt, const std::string& prefix,
                           Optimizer<float>& opt) {
  for (std::size_t i = 0; i < opt.params.size(); ++i) {
    const auto& name = opt.params[i].first;
    auto& st = opt.states[i];
    st.first_moment = ckpt.get(prefix + "/" + name + "/m").second;
    st.second_moment = ckpt.get(prefix + "/" + name + "/v").second;
    st.step_count =
        static_cast<std::int64_t>(ckpt.get(prefix + "/" + name + "/step").second[0]);
  }
}

inline void put_params(Checkpoint& ckpt, const NamedParams<float>& params) {
  for (const auto& [name, t] : params) ckpt.put(name, t);
}

inline void load_params(const Checkpoint& ckpt, NamedParams<float>& params) {
  for (auto& [name, t] : params) ckpt.load_into(name, t);
}

}  // namespace nsm
