#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsm/augmentation.hpp"
#include "nsm/toyworld.hpp"
#include "nsm/training.hpp"

namespace nsm {

inline constexpr const char* kToolVersion = "nsm 1.0.0";

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// INI-style key/value configuration. All keys carry defaults; a config file
// may override any of them and nothing else — unknown sections or keys are
// hard errors. The effective configuration echoes back canonically
// (comment-stripped, sorted) so two configs can be diffed textually.
class RunConfig {
 public:
  RunConfig() { set_defaults(); }

  void load_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::missing_input, "cannot read config: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    load_text(ss.str());
  }

  void load_text(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          fail(ErrorKind::usage, "config line " + std::to_string(line_no) +
                                     ": malformed section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorKind::usage,
             "config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key =
          section + "." + detail::trim(line.substr(0, eq));
      if (!values_.count(key))
        fail(ErrorKind::usage, "config: unknown key '" + key + "'");
      values_[key] = detail::trim(line.substr(eq + 1));
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) fail(ErrorKind::usage, "config: unknown key '" + key + "'");
    values_[key] = value;
  }

  std::string canonical_text() const {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, value] : values_) {  // std::map: already sorted
      const auto dot = key.find('.');
      const std::string sec = key.substr(0, dot);
      if (sec != section) {
        section = sec;
        out << '[' << section << "]\n";
      }
      out << key.substr(dot + 1) << " = " << value << '\n';
    }
    return out.str();
  }

  std::uint64_t hash() const { return fnv1a(canonical_text()); }

  const std::string& str(const std::string& key) const { return values_.at(key); }
  double num(const std::string& key) const {
    try {
      return std::stod(values_.at(key));
    } catch (const std::exception&) {
      fail(ErrorKind::usage, "config: key '" + key + "' is not numeric: '" +
                                 values_.at(key) + "'");
    }
  }
  int integer(const std::string& key) const {
    return static_cast<int>(std::llround(num(key)));
  }
  std::uint64_t seed_value(const std::string& key) const {
    return static_cast<std::uint64_t>(std::stoull(values_.at(key)));
  }

  // ---- typed views ----

  BevConfig bev() const {
    BevConfig b;
    b.x_min = static_cast<float>(num("bev.x_min"));
    b.x_max = static_cast<float>(num("bev.x_max"));
    b.y_min = static_cast<float>(num("bev.y_min"));
    b.y_max = static_cast<float>(num("bev.y_max"));
    b.z_min = static_cast<float>(num("bev.z_min"));
    b.z_max = static_cast<float>(num("bev.z_max"));
    b.resolution = integer("bev.resolution");
    const std::string& enc = str("bev.encoding");
    if (enc == "binary")
      b.encoding = BevEncoding::binary_occupancy;
    else if (enc == "density")
      b.encoding = BevEncoding::density;
    else
      fail(ErrorKind::usage, "config: bev.encoding must be binary or density");
    b.validate();
    return b;
  }

  TrainConfig cyclegan_train() const {
    TrainConfig c;
    c.task = "cyclegan";
    c.scale = str("cyclegan.scale");
    c.learning_rate = static_cast<float>(num("cyclegan.learning_rate"));
    c.batch_size = integer("cyclegan.batch_size");
    c.epochs = integer("cyclegan.epochs");
    c.lambda_cycle = static_cast<float>(num("cyclegan.lambda_cycle"));
    c.seed = seed_value("cyclegan.seed");
    c.bev = bev();
    c.config_hash = hash();
    return c;
  }

  TrainConfig nst_train() const {
    TrainConfig c;
    c.task = "nst";
    c.scale = str("nst.scale");
    c.learning_rate = static_cast<float>(num("nst.learning_rate"));
    c.batch_size = integer("nst.batch_size");
    c.epochs = integer("nst.epochs");
    c.lambda_s = static_cast<float>(num("nst.lambda_s"));
    c.lambda_c = static_cast<float>(num("nst.lambda_c"));
    c.n_styles = integer("nst.n_styles");
    c.seed = seed_value("nst.seed");
    c.bev = bev();
    c.config_hash = hash();
    return c;
  }

  TrainConfig encoder_train() const {
    TrainConfig c = nst_train();
    c.task = "encoder";
    c.learning_rate = static_cast<float>(num("nst.encoder_learning_rate"));
    c.batch_size = integer("nst.encoder_batch_size");
    c.epochs = integer("nst.encoder_epochs");
    return c;
  }

  TrainConfig detector_train() const {
    TrainConfig c;
    c.task = "detector";
    c.scale = str("detector.scale");
    c.learning_rate = static_cast<float>(num("detector.learning_rate"));
    c.batch_size = integer("detector.batch_size");
    c.epochs = integer("detector.epochs");
    c.seed = seed_value("detector.seed");
    c.bev = bev();
    c.detector = c.scale == "desk" ? DetectorConfig::desk(c.bev) : DetectorConfig{};
    c.detector.bev = c.bev;
    c.detector.input_resolution = c.bev.resolution;
    c.detector.confidence_threshold =
        static_cast<float>(num("detector.confidence_threshold"));
    c.detector.nms_iou_threshold =
        static_cast<float>(num("detector.nms_iou_threshold"));
    c.config_hash = hash();
    return c;
  }

  double eval_iou() const { return num("eval.iou_threshold"); }

  SceneSpec toyworld_scene() const {
    SceneSpec s;
    s.min_cars = integer("toyworld.n_cars_min");
    s.max_cars = integer("toyworld.n_cars_max");
    s.min_walls = integer("toyworld.n_walls_min");
    s.max_walls = integer("toyworld.n_walls_max");
    s.bev = bev();
    s.bev.resolution = integer("toyworld.resolution");
    s.bev.validate();
    return s;
  }

  CorruptionModel toyworld_corruption() const {
    CorruptionModel m;
    m.dropout_p = num("toyworld.dropout_p");
    m.jitter_sigma = num("toyworld.jitter_sigma");
    m.ray_shadow = num("toyworld.ray_shadow");
    m.speckle_rate = num("toyworld.speckle_rate");
    m.validate();
    return m;
  }

  std::vector<int> augmentation_ratios() const {
    std::vector<int> out;
    std::istringstream in(str("augmentation.ratios"));
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!detail::trim(tok).empty()) out.push_back(std::stoi(detail::trim(tok)));
    return out;
  }

  std::vector<std::string> augmentation_mappings() const {
    std::vector<std::string> out;
    std::istringstream in(str("augmentation.mappings"));
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!detail::trim(tok).empty()) out.push_back(detail::trim(tok));
    return out;
  }

 private:
  std::map<std::string, std::string> values_;

  void set_defaults() {
    auto d = [&](const std::string& k, const std::string& v) { values_[k] = v; };
    d("bev.x_min", "0");
    d("bev.x_max", "40");
    d("bev.y_min", "-20");
    d("bev.y_max", "20");
    d("bev.z_min", "-2.5");
    d("bev.z_max", "1.0");
    d("bev.resolution", "64");
    d("bev.encoding", "binary");

    d("cyclegan.scale", "desk");
    d("cyclegan.learning_rate", "0.0002");
    d("cyclegan.batch_size", "1");
    d("cyclegan.epochs", "5");
    d("cyclegan.lambda_cycle", "50");
    d("cyclegan.seed", "1");

    d("nst.scale", "desk");
    d("nst.learning_rate", "0.001");
    d("nst.batch_size", "4");
    d("nst.epochs", "5");
    d("nst.lambda_s", "1");
    d("nst.lambda_c", "1");
    d("nst.n_styles", "2");
    d("nst.seed", "1");
    d("nst.encoder_learning_rate", "0.001");
    d("nst.encoder_batch_size", "8");
    d("nst.encoder_epochs", "3");

    d("detector.scale", "desk");
    d("detector.learning_rate", "0.001");
    d("detector.batch_size", "8");
    d("detector.epochs", "30");
    d("detector.confidence_threshold", "0.5");
    d("detector.nms_iou_threshold", "0.45");
    d("detector.seed", "1");

    d("eval.iou_threshold", "0.5");

    d("augmentation.ratios", "2");
    d("augmentation.mappings", "identity,cyclegan");
    d("augmentation.seed", "1");

    d("toyworld.resolution", "64");
    d("toyworld.n_cars_min", "1");
    d("toyworld.n_cars_max", "4");
    d("toyworld.n_walls_min", "1");
    d("toyworld.n_walls_max", "3");
    d("toyworld.dropout_p", "0.3");
    d("toyworld.jitter_sigma", "0.7");
    d("toyworld.ray_shadow", "0.5");
    d("toyworld.speckle_rate", "0.002");
    d("toyworld.n_sim", "50");
    d("toyworld.n_real", "50");
    d("toyworld.n_test", "20");
    d("toyworld.seed", "1");
  }
};

// Every CLI run emits a run.json provenance record: command, tool version,
// config hash, seeds, and content hashes of the inputs and outputs it touched.
struct RunRecord {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, hash
  std::vector<std::pair<std::string, std::string>> outputs;  // path, hash

  void add_input(const fs::path& p) {
    if (fs::exists(p) && fs::is_regular_file(p))
      inputs.emplace_back(p.string(), hash_hex(file_hash(p)));
  }
  void add_output(const fs::path& p) {
    if (fs::exists(p) && fs::is_regular_file(p))
      outputs.emplace_back(p.string(), hash_hex(file_hash(p)));
  }

  void save(const fs::path& path) const {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["config_hash"] = hash_hex(config_hash);
    j["seed"] = seed;
    j["inputs"] = nlohmann::json::object();
    for (const auto& [p, h] : inputs) j["inputs"][p] = h;
    j["outputs"] = nlohmann::json::object();
    for (const auto& [p, h] : outputs) j["outputs"][p] = h;
    std::ofstream f(path);
    if (!f) fail(ErrorKind::missing_input, "cannot write " + path.string());
    f << j.dump(2) << '\n';
  }
};

}  // namespace nsm
