#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsm/training.hpp"

namespace nsm {

enum class MappingKind { identity, cyclegan, nst };

struct MappingSpec {
  MappingKind kind = MappingKind::identity;
  int style_index = 0;  // nst only

  std::string str() const {
    switch (kind) {
      case MappingKind::identity: return "identity";
      case MappingKind::cyclegan: return "cyclegan";
      case MappingKind::nst: return "nst:" + std::to_string(style_index);
    }
    return "identity";
  }
};

inline MappingSpec parse_mapping(const std::string& s) {
  MappingSpec spec;
  if (s == "identity") {
    spec.kind = MappingKind::identity;
  } else if (s == "cyclegan") {
    spec.kind = MappingKind::cyclegan;
  } else if (s == "nst" || s.rfind("nst:", 0) == 0) {
    spec.kind = MappingKind::nst;
    if (s.size() > 4) {
      std::size_t used = 0;
      try {
        spec.style_index = std::stoi(s.substr(4), &used);
      } catch (const std::exception&) {
        fail(ErrorKind::usage, "bad style index in mapping: " + s);
      }
      if (used != s.size() - 4)
        fail(ErrorKind::usage, "bad style index in mapping: " + s);
    }
    if (spec.style_index < 0) fail(ErrorKind::usage, "negative style index: " + s);
  } else {
    fail(ErrorKind::usage, "unknown mapping: " + s +
                               " (expected identity|cyclegan|nst[:k])");
  }
  return spec;
}

// A sim->real mapping function over BEV grids. Identity copies bitwise;
// learned mappings clamp to [0,1] and, for binary grids, re-threshold so the
// output lives in the same value domain as the input corpus.
class SensorMapper {
 public:
  MappingSpec spec;

  static SensorMapper identity() { return SensorMapper{}; }

  static SensorMapper from_cyclegan(const fs::path& checkpoint) {
    SensorMapper m;
    m.spec.kind = MappingKind::cyclegan;
    m.gan_ = std::make_shared<CycleGanModel<float>>(load_cyclegan_model(checkpoint));
    return m;
  }

  static SensorMapper from_nst(const fs::path& checkpoint, int style_index) {
    SensorMapper m;
    m.spec.kind = MappingKind::nst;
    m.spec.style_index = style_index;
    m.nst_ = std::make_shared<NstModel<float>>(load_nst_model(checkpoint));
    if (style_index < 0 ||
        style_index >= static_cast<int>(m.nst_->style_bank.size()))
      fail(ErrorKind::usage,
           "style index " + std::to_string(style_index) + " out of range (bank has " +
               std::to_string(m.nst_->style_bank.size()) + " styles)");
    return m;
  }

  NstModel<float>* nst_model() { return nst_.get(); }

  BevGrid apply(const BevGrid& grid) const {
    if (spec.kind == MappingKind::identity) return grid;
    Tensor<float> out;
    if (spec.kind == MappingKind::cyclegan) {
      out = gan_->g.forward(grid_to_tensor(grid));
    } else {
      out = nst_->transformer.forward(grid_to_tensor(grid), spec.style_index);
    }
    BevGrid mapped(grid.config);
    const auto& v = out.data();
    if (v.size() != mapped.cells.size())
      fail(ErrorKind::shape, "mapped grid has wrong size");
    const bool binary = grid.config.encoding == BevEncoding::binary_occupancy;
    for (std::size_t i = 0; i < v.size(); ++i) {
      float x = std::clamp(v[i], 0.0f, 1.0f);
      mapped.cells[i] = binary ? (x > 0.5f ? 1.0f : 0.0f) : x;
    }
    return mapped;
  }

 private:
  std::shared_ptr<CycleGanModel<float>> gan_;
  std::shared_ptr<NstModel<float>> nst_;
};

// Materializes mapped copies of `manifest`'s frames into out_dir. Labels are
// byte-copied: the mapping alters appearance, never geometry.
inline DatasetManifest materialize_mapped(const DatasetManifest& manifest,
                                          const SensorMapper& mapper,
                                          const BevConfig& bev,
                                          const fs::path& out_dir) {
  fs::create_directories(out_dir);
  DatasetManifest out;
  out.seed = manifest.seed;
  char name[64];
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    std::snprintf(name, sizeof name, "mapped_%05zu", i);
    const fs::path frame = out_dir / (std::string(name) + ".pgm");
    const fs::path label = out_dir / (std::string(name) + ".txt");
    if (mapper.spec.kind == MappingKind::identity) {
      write_bytes(frame, read_bytes(e.frame_path));
    } else {
      save_grid_pgm(mapper.apply(load_grid_pgm(e.frame_path, bev)), frame);
    }
    write_bytes(label, read_bytes(e.label_path));
    out.entries.push_back({frame.string(), label.string(), "sim", mapper.spec.str()});
  }
  return out;
}

// Mixes `ratio` mapped sim frames per real frame into one training manifest.
// Sim frames are drawn without replacement from a seeded shuffle; the final
// entry order is itself a seeded shuffle so domains interleave.
inline DatasetManifest build_augmented_manifest(const DatasetManifest& real_manifest,
                                                const DatasetManifest& sim_manifest,
                                                int ratio,
                                                const SensorMapper& mapper,
                                                const BevConfig& bev,
                                                const fs::path& out_dir,
                                                std::uint64_t seed) {
  if (ratio < 0) fail(ErrorKind::usage, "augmentation ratio must be >= 0");
  if (ratio == 0) {
    DatasetManifest out = real_manifest;
    out.seed = seed;
    return out;
  }
  const std::size_t need = static_cast<std::size_t>(
      std::llround(static_cast<double>(ratio) * real_manifest.entries.size()));
  if (sim_manifest.entries.size() < need)
    fail(ErrorKind::usage,
         "augment: need " + std::to_string(need) + " sim frames, manifest has " +
             std::to_string(sim_manifest.entries.size()));

  Rng pick_rng = substream(seed, "augment/pick");
  auto order = detail::shuffled_indices(
      static_cast<int>(sim_manifest.entries.size()), pick_rng);
  DatasetManifest picked;
  picked.seed = seed;
  for (std::size_t i = 0; i < need; ++i)
    picked.entries.push_back(sim_manifest.entries[order[i]]);
  DatasetManifest mapped = materialize_mapped(picked, mapper, bev, out_dir);

  DatasetManifest out;
  out.seed = seed;
  out.entries = real_manifest.entries;
  out.entries.insert(out.entries.end(), mapped.entries.begin(), mapped.entries.end());
  Rng mix_rng = substream(seed, "augment/mix");
  auto mix = detail::shuffled_indices(static_cast<int>(out.entries.size()), mix_rng);
  std::vector<ManifestEntry> shuffled;
  shuffled.reserve(out.entries.size());
  for (int i : mix) shuffled.push_back(out.entries[i]);
  out.entries = std::move(shuffled);
  return out;
}

namespace detail {

// Cell-downsampled 13x13 mean-occupancy descriptor.
inline std::vector<double> occupancy_descriptor(const BevGrid& grid) {
  constexpr int kCells = 13;
  const int res = grid.config.resolution;
  std::vector<double> desc(kCells * kCells, 0.0);
  std::vector<int> counts(kCells * kCells, 0);
  for (int r = 0; r < res; ++r) {
    const int dr = std::min(r * kCells / res, kCells - 1);
    for (int c = 0; c < res; ++c) {
      const int dc = std::min(c * kCells / res, kCells - 1);
      desc[dr * kCells + dc] += grid.at(r, c);
      ++counts[dr * kCells + dc];
    }
  }
  for (std::size_t i = 0; i < desc.size(); ++i)
    if (counts[i] > 0) desc[i] /= counts[i];
  return desc;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

struct StyleBank {
  std::vector<BevGrid> frames;
  std::vector<std::string> frame_paths;  // provenance of each pick
};

// Groups the corpus into drives (frames sharing a parent directory; if the
// whole manifest lives in one directory every frame is its own drive),
// k-means-clusters per-drive mean descriptors, and picks the frame nearest
// each centroid.
inline StyleBank build_style_bank(const DatasetManifest& manifest, int n,
                                  const BevConfig& bev, std::uint64_t seed) {
  if (n < 1) fail(ErrorKind::usage, "style bank size must be >= 1");
  if (manifest.entries.empty())
    fail(ErrorKind::missing_input, "style bank: empty manifest");

  // drive id -> frame indices
  std::map<std::string, std::vector<int>> by_dir;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    by_dir[fs::path(manifest.entries[i].frame_path).parent_path().string()]
        .push_back(static_cast<int>(i));
  std::vector<std::vector<int>> drives;
  if (by_dir.size() > 1) {
    for (auto& [dir, idx] : by_dir) drives.push_back(idx);
  } else {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
      drives.push_back({static_cast<int>(i)});
  }
  if (static_cast<int>(drives.size()) < n)
    fail(ErrorKind::usage, "style bank: " + std::to_string(drives.size()) +
                               " drives available, " + std::to_string(n) +
                               " requested");

  std::vector<std::vector<double>> frame_desc(manifest.entries.size());
  std::vector<BevGrid> grids;
  grids.reserve(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    grids.push_back(load_grid_pgm(manifest.entries[i].frame_path, bev));
    frame_desc[i] = detail::occupancy_descriptor(grids.back());
  }
  std::vector<std::vector<double>> drive_desc;
  for (const auto& d : drives) {
    std::vector<double> mean(frame_desc[0].size(), 0.0);
    for (int f : d)
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += frame_desc[f][k];
    for (auto& v : mean) v /= d.size();
    drive_desc.push_back(std::move(mean));
  }

  // k-means, seeded init with distinct drives, fixed iteration budget
  Rng rng = substream(seed, "stylebank/kmeans");
  auto init_order = detail::shuffled_indices(static_cast<int>(drives.size()), rng);
  std::vector<std::vector<double>> centroids;
  for (int k = 0; k < n; ++k) centroids.push_back(drive_desc[init_order[k]]);
  std::vector<int> assign(drives.size(), 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t d = 0; d < drives.size(); ++d) {
      int best = 0;
      double best_d = detail::sq_dist(drive_desc[d], centroids[0]);
      for (int k = 1; k < n; ++k) {
        const double dist = detail::sq_dist(drive_desc[d], centroids[k]);
        if (dist < best_d) { best_d = dist; best = k; }
      }
      if (assign[d] != best) { assign[d] = best; changed = true; }
    }
    for (int k = 0; k < n; ++k) {
      std::vector<double> mean(drive_desc[0].size(), 0.0);
      int count = 0;
      for (std::size_t d = 0; d < drives.size(); ++d)
        if (assign[d] == k) {
          for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += drive_desc[d][j];
          ++count;
        }
      if (count == 0) {
        // re-seed empty cluster with the drive farthest from its centroid
        std::size_t far = 0;
        double far_d = -1;
        for (std::size_t d = 0; d < drives.size(); ++d) {
          const double dist = detail::sq_dist(drive_desc[d], centroids[assign[d]]);
          if (dist > far_d) { far_d = dist; far = d; }
        }
        centroids[k] = drive_desc[far];
        assign[far] = k;
        changed = true;
        continue;
      }
      for (auto& v : mean) v /= count;
      centroids[k] = std::move(mean);
    }
    if (!changed) break;
  }

  StyleBank bank;
  for (int k = 0; k < n; ++k) {
    int best_frame = -1;
    double best_d = 0;
    for (std::size_t d = 0; d < drives.size(); ++d) {
      if (assign[d] != k) continue;
      for (int f : drives[d]) {
        const double dist = detail::sq_dist(frame_desc[f], centroids[k]);
        if (best_frame < 0 || dist < best_d) { best_d = dist; best_frame = f; }
      }
    }
    if (best_frame < 0)
      fail(ErrorKind::internal, "style bank: empty cluster after k-means");
    bank.frames.push_back(grids[best_frame]);
    bank.frame_paths.push_back(manifest.entries[best_frame].frame_path);
  }
  return bank;
}

struct StyleRanking {
  int best_index = 0;
  std::vector<double> map_per_style;  // indexed by style
};

// Extrinsic style selection: map the probe set with each style, score a
// real-only probe detector's mAP against the probe labels, take the argmax
// (ties resolve to the lowest index).
inline StyleRanking select_best_style(NstModel<float>& nst,
                                      LoadedDetector& probe,
                                      const DatasetManifest& probe_set,
                                      double iou_threshold = 0.5) {
  const int n_styles = static_cast<int>(nst.style_bank.size());
  if (n_styles == 0) fail(ErrorKind::usage, "select_best_style: empty style bank");
  if (probe_set.entries.empty())
    fail(ErrorKind::missing_input, "select_best_style: empty probe set");

  std::vector<BevGrid> grids;
  std::vector<std::vector<OrientedBox>> gt;
  for (const auto& e : probe_set.entries) {
    grids.push_back(load_grid_pgm(e.frame_path, probe.config.bev));
    gt.push_back(read_labels(e.label_path));
  }

  StyleRanking rank;
  probe.net.set_training(false);
  const bool binary = probe.config.bev.encoding == BevEncoding::binary_occupancy;
  for (int s = 0; s < n_styles; ++s) {
    std::vector<FrameDetection> dets;
    for (std::size_t f = 0; f < grids.size(); ++f) {
      auto out = nst.transformer.forward(grid_to_tensor(grids[f]), s);
      BevGrid mapped(grids[f].config);
      const auto& v = out.data();
      for (std::size_t i = 0; i < v.size(); ++i) {
        float x = std::clamp(v[i], 0.0f, 1.0f);
        mapped.cells[i] = binary ? (x > 0.5f ? 1.0f : 0.0f) : x;
      }
      auto pred = probe.net.forward(grid_to_tensor(mapped));
      for (auto& box : decode_predictions(pred, probe.config))
        dets.push_back({static_cast<int>(f), box});
    }
    auto report = evaluate_map(dets, gt, iou_threshold);
    rank.map_per_style.push_back(report.map);
    if (report.map > rank.map_per_style[rank.best_index] + 1e-12)
      rank.best_index = s;
  }
  return rank;
}

// ---- experiment matrix ----

struct MatrixCell {
  std::string training_data;  // table row label
  int ratio = 0;              // -1 for the non-grid rows
  std::string mapping;
  double map_percent = 0;
  bool ok = false;
  std::string error;
};

struct MatrixConfig {
  std::vector<int> ratios = {2};
  std::vector<std::string> mappings = {"identity", "cyclegan"};
  fs::path cyclegan_checkpoint;  // required when mappings include cyclegan
  fs::path nst_checkpoint;       // required when mappings include nst
  TrainConfig detector;          // template; task/seed reused per cell
  double iou_threshold = 0.5;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;
};

// Full-scale reference results for this experiment design (KITTI real
// frames, ~100k CARLA sim frames, ratio-8 augmentation, days of training).
// Desk-scale toy runs reproduce the ordering of these rows, never the
// magnitudes; they are emitted next to table1.csv for side-by-side reading.
inline constexpr std::pair<const char*, double> kFullScaleReference[] = {
    {"sim_only", 12.1},
    {"real_only", 63.1},
    {"real+identity_x8", 65.3},
    {"real+nst_x8", 69.3},
    {"real+cyclegan_x8", 71.5},
};

inline double eval_detector_on(const fs::path& ckpt,
                               const DatasetManifest& test_manifest,
                               double iou_threshold) {
  auto det = load_detector_model(ckpt);
  auto [dets, gt] = run_detector(det, test_manifest);
  return evaluate_map(dets, gt, iou_threshold).map * 100.0;
}

inline MatrixCell run_matrix_cell(const MatrixConfig& cfg,
                                  const DatasetManifest& train_manifest,
                                  const DatasetManifest& test_manifest,
                                  const fs::path& cell_dir,
                                  const std::string& label, int ratio,
                                  const std::string& mapping) {
  MatrixCell cell;
  cell.training_data = label;
  cell.ratio = ratio;
  cell.mapping = mapping;
  try {
    TrainConfig det_cfg = cfg.detector;
    det_cfg.task = "detector";
    auto res = train_detector(det_cfg, train_manifest, cell_dir);
    cell.map_percent =
        eval_detector_on(res.checkpoint_path, test_manifest, cfg.iou_threshold);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

// Trains one detector per cell — pure-sim, real-only, and the ratio x mapping
// grid — and evaluates each on the fixed real test split. Cell failures are
// recorded and the matrix continues.
inline MatrixResult run_experiment_matrix(const MatrixConfig& cfg,
                                          const DatasetManifest& sim_manifest,
                                          const DatasetManifest& real_train,
                                          const DatasetManifest& real_test,
                                          const fs::path& out_dir) {
  fs::create_directories(out_dir);
  MatrixResult result;
  result.cells.push_back(run_matrix_cell(cfg, sim_manifest, real_test,
                                         out_dir / "cell_sim_only", "sim_only", -1,
                                         "identity"));
  result.cells.push_back(run_matrix_cell(cfg, real_train, real_test,
                                         out_dir / "cell_real_only", "real_only", -1,
                                         "none"));

  std::map<std::string, SensorMapper> mappers;
  for (const auto& m : cfg.mappings) {
    MappingSpec spec = parse_mapping(m);
    try {
      switch (spec.kind) {
        case MappingKind::identity:
          mappers.emplace(m, SensorMapper::identity());
          break;
        case MappingKind::cyclegan:
          mappers.emplace(m, SensorMapper::from_cyclegan(cfg.cyclegan_checkpoint));
          break;
        case MappingKind::nst:
          mappers.emplace(m, SensorMapper::from_nst(cfg.nst_checkpoint,
                                                    spec.style_index));
          break;
      }
    } catch (const std::exception& e) {
      for (int ratio : cfg.ratios) {
        MatrixCell cell;
        cell.training_data = "real+" + m + "_x" + std::to_string(ratio);
        cell.ratio = ratio;
        cell.mapping = m;
        cell.error = e.what();
        result.cells.push_back(cell);
      }
    }
  }

  for (int ratio : cfg.ratios) {
    for (const auto& m : cfg.mappings) {
      auto it = mappers.find(m);
      if (it == mappers.end()) continue;  // load failure already recorded
      const std::string label = "real+" + m + "_x" + std::to_string(ratio);
      const fs::path cell_dir =
          out_dir / ("cell_" + m + "_x" + std::to_string(ratio));
      MatrixCell cell;
      try {
        auto aug = build_augmented_manifest(real_train, sim_manifest, ratio,
                                            it->second, cfg.detector.bev,
                                            cell_dir / "mapped",
                                            cfg.detector.seed);
        cell = run_matrix_cell(cfg, aug, real_test, cell_dir, label, ratio, m);
      } catch (const std::exception& e) {
        cell.training_data = label;
        cell.ratio = ratio;
        cell.mapping = m;
        cell.error = e.what();
      }
      result.cells.push_back(cell);
    }
  }

  std::ofstream table(out_dir / "table1.csv");
  table << "training_data,map_percent\n" << std::setprecision(6);
  for (const auto& c : result.cells)
    table << c.training_data << ','
          << (c.ok ? std::to_string(c.map_percent) : "failed:" + c.error) << '\n';

  std::ofstream ref(out_dir / "reference.csv");
  ref << "training_data,map_percent\n";
  for (const auto& [row, value] : kFullScaleReference)
    ref << row << ',' << value << '\n';

  std::ofstream curve(out_dir / "curve.csv");
  curve << "ratio,mapping,map_percent\n" << std::setprecision(6);
  for (const auto& c : result.cells) {
    if (c.ratio < 0) continue;
    curve << c.ratio << ',' << c.mapping << ','
          << (c.ok ? std::to_string(c.map_percent) : "failed:" + c.error) << '\n';
  }
  return result;
}

}  // namespace nsm
