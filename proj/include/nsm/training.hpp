#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "nsm/checkpoint.hpp"
#include "nsm/cyclegan.hpp"
#include "nsm/detector.hpp"
#include "nsm/evaluation.hpp"
#include "nsm/formats.hpp"
#include "nsm/nst.hpp"
#include "nsm/rng.hpp"

namespace nsm {

struct TrainConfig {
  std::string task;          // cyclegan | nst | encoder | detector
  std::string scale = "desk";  // full | desk: fully determines architecture
  float learning_rate = 2e-4f;
  int batch_size = 1;
  int epochs = 5;
  std::uint64_t seed = 1;
  float lambda_cycle = 50.0f;
  float lambda_s = 1.0f;
  float lambda_c = 1.0f;
  int n_styles = 2;
  BevConfig bev;
  DetectorConfig detector;
  std::uint64_t config_hash = 0;

  void validate() const {
    if (batch_size < 1 || epochs < 1)
      fail(ErrorKind::usage, "train config: batch_size and epochs must be >= 1");
    if (scale != "full" && scale != "desk")
      fail(ErrorKind::usage, "train config: scale must be full or desk");
  }

  // Full-scale presets: CycleGAN lr 2e-4, batch 1, 200 epochs, lambda 50;
  // NST lr 1e-3, batch 4, 40 epochs, 20 styles.
  static TrainConfig cyclegan_full() {
    TrainConfig c;
    c.task = "cyclegan";
    c.scale = "full";
    c.learning_rate = 2e-4f;
    c.batch_size = 1;
    c.epochs = 200;
    c.lambda_cycle = 50.0f;
    return c;
  }
  static TrainConfig nst_full() {
    TrainConfig c;
    c.task = "nst";
    c.scale = "full";
    c.learning_rate = 1e-3f;
    c.batch_size = 4;
    c.epochs = 40;
    c.n_styles = 20;
    return c;
  }
};

struct LossLog {
  std::vector<std::tuple<int, std::string, double>> rows;

  void add(int epoch, const std::string& component, double value) {
    rows.emplace_back(epoch, component, value);
  }

  double last(const std::string& component) const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
      if (std::get<1>(*it) == component) return std::get<2>(*it);
    return 0.0;
  }

  void save(const fs::path& path) const {
    std::ofstream f(path);
    if (!f) fail(ErrorKind::missing_input, "cannot write loss log: " + path.string());
    f << "epoch,component,value\n";
    f << std::setprecision(9);
    for (const auto& [e, c, v] : rows) f << e << ',' << c << ',' << v << '\n';
  }
};

inline std::vector<BevGrid> load_grids(const DatasetManifest& manifest,
                                       const BevConfig& bev) {
  std::vector<BevGrid> grids;
  grids.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries)
    grids.push_back(load_grid_pgm(e.frame_path, bev));
  return grids;
}

inline Tensor<float> grids_to_tensor(const std::vector<BevGrid>& grids,
                                     const std::vector<int>& indices) {
  const int res = grids.at(indices.at(0)).config.resolution;
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(indices.size()) * res * res);
  for (int idx : indices) {
    const auto& g = grids[idx];
    data.insert(data.end(), g.cells.begin(), g.cells.end());
  }
  return Tensor<float>::from_data(
      {static_cast<int>(indices.size()), 1, res, res}, std::move(data));
}

inline Tensor<float> grid_to_tensor(const BevGrid& g) {
  return Tensor<float>::from_data({1, 1, g.config.resolution, g.config.resolution},
                                  g.cells);
}

namespace detail {

inline std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> d(0, i);
    std::swap(idx[i], idx[d(rng)]);
  }
  return idx;
}

}  // namespace detail

struct TrainResult {
  fs::path checkpoint_path;
  LossLog log;
  double final_metric = 0;  // task-dependent (accuracy, last loss, ...)
};

// ---- CycleGAN ----

inline CycleGanArch cyclegan_arch(const TrainConfig& cfg) {
  return cfg.scale == "full" ? CycleGanArch::full() : CycleGanArch::desk();
}

inline void cyclegan_to_checkpoint(CycleGanModel<float>& model,
                                   Optimizer<float>& gen_opt,
                                   Optimizer<float>& disc_opt,
                                   Checkpoint& ckpt) {
  NamedParams<float> params = model.generator_params();
  auto disc = model.discriminator_params();
  params.insert(params.end(), disc.begin(), disc.end());
  put_params(ckpt, params);
  ckpt.put("meta/lambda_cycle", {1}, {model.lambda_cycle});
  put_optimizer(ckpt, "adam_gen", gen_opt);
  put_optimizer(ckpt, "adam_disc", disc_opt);
}

inline void cyclegan_from_checkpoint(const Checkpoint& ckpt,
                                     CycleGanModel<float>& model,
                                     Optimizer<float>* gen_opt = nullptr,
                                     Optimizer<float>* disc_opt = nullptr) {
  NamedParams<float> params = model.generator_params();
  auto disc = model.discriminator_params();
  params.insert(params.end(), disc.begin(), disc.end());
  load_params(ckpt, params);
  model.lambda_cycle = ckpt.get("meta/lambda_cycle").second[0];
  if (gen_opt) load_optimizer(ckpt, "adam_gen", *gen_opt);
  if (disc_opt) load_optimizer(ckpt, "adam_disc", *disc_opt);
}

inline CycleGanArch parse_cyclegan_descriptor(const std::string& d) {
  CycleGanArch arch;
  if (std::sscanf(d.c_str(), "cyclegan:base=%d,res=%d,disc=%d", &arch.base_width,
                  &arch.n_res_blocks, &arch.disc_base) != 3)
    fail(ErrorKind::checkpoint, "bad cyclegan descriptor: " + d);
  return arch;
}

inline CycleGanModel<float> load_cyclegan_model(const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.task != "cyclegan")
    fail(ErrorKind::checkpoint, "expected cyclegan checkpoint, got task " + ckpt.task);
  Rng dummy(0);
  CycleGanModel<float> model(parse_cyclegan_descriptor(ckpt.arch), dummy);
  cyclegan_from_checkpoint(ckpt, model);
  return model;
}

// Alternates generator and discriminator updates per batch; epoch ordering is
// a seeded shuffle; every loss component is logged per epoch. A non-finite
// loss aborts with the last good checkpoint retained on disk.
inline TrainResult train_cyclegan(const TrainConfig& cfg,
                                  const DatasetManifest& sim_manifest,
                                  const DatasetManifest& real_manifest,
                                  const fs::path& out_dir,
                                  const fs::path& resume = {}) {
  cfg.validate();
  if (sim_manifest.entries.empty() || real_manifest.entries.empty())
    fail(ErrorKind::missing_input, "train_cyclegan: both manifests must be non-empty");
  fs::create_directories(out_dir);
  auto sim_grids = load_grids(sim_manifest, cfg.bev);
  auto real_grids = load_grids(real_manifest, cfg.bev);

  Rng init_rng = substream(cfg.seed, "cyclegan/init");
  CycleGanModel<float> model(cyclegan_arch(cfg), init_rng);
  model.lambda_cycle = cfg.lambda_cycle;
  // GAN convention: Adam beta1 = 0.5.
  Optimizer<float> gen_opt(model.generator_params(), cfg.learning_rate, 0.5f);
  Optimizer<float> disc_opt(model.discriminator_params(), cfg.learning_rate, 0.5f);
  Rng loop_rng = substream(cfg.seed, "cyclegan/loop");
  std::int64_t start_epoch = 0;
  LossLog log;

  if (!resume.empty()) {
    Checkpoint ckpt = load_checkpoint(resume);
    if (ckpt.config_hash != cfg.config_hash)
      fail(ErrorKind::checkpoint, "resume config hash mismatch");
    if (ckpt.arch != model.arch.descriptor())
      fail(ErrorKind::checkpoint, "resume architecture mismatch");
    cyclegan_from_checkpoint(ckpt, model, &gen_opt, &disc_opt);
    loop_rng = deserialize_rng(ckpt.rng_state);
    start_epoch = ckpt.epoch;
  }

  const fs::path ckpt_path = out_dir / "checkpoint.nsmckpt";
  const int steps = static_cast<int>(
      std::min(sim_grids.size(), real_grids.size()) / cfg.batch_size);
  if (steps < 1) fail(ErrorKind::usage, "train_cyclegan: batch larger than dataset");

  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto sim_order = detail::shuffled_indices(static_cast<int>(sim_grids.size()),
                                              loop_rng);
    auto real_order = detail::shuffled_indices(static_cast<int>(real_grids.size()),
                                               loop_rng);
    CycleGanLossRecord<float> epoch_sum;
    for (int step = 0; step < steps; ++step) {
      std::vector<int> xs(sim_order.begin() + step * cfg.batch_size,
                          sim_order.begin() + (step + 1) * cfg.batch_size);
      std::vector<int> ys(real_order.begin() + step * cfg.batch_size,
                          real_order.begin() + (step + 1) * cfg.batch_size);
      auto batch_x = grids_to_tensor(sim_grids, xs);
      auto batch_y = grids_to_tensor(real_grids, ys);
      auto graph = cyclegan_total_loss(model, batch_x, batch_y);

      gen_opt.zero_grad();
      disc_opt.zero_grad();
      graph.gen_total.backward();
      gen_opt.step();
      // Discriminator loss subgraphs keep the fakes detached, so stepping
      // the generators first leaves them consistent.
      gen_opt.zero_grad();
      disc_opt.zero_grad();
      graph.d_x_loss.backward();
      graph.d_y_loss.backward();
      disc_opt.step();

      epoch_sum.loss_g_adv += graph.record.loss_g_adv;
      epoch_sum.loss_f_adv += graph.record.loss_f_adv;
      epoch_sum.loss_cycle += graph.record.loss_cycle;
      epoch_sum.loss_d_x += graph.record.loss_d_x;
      epoch_sum.loss_d_y += graph.record.loss_d_y;
      epoch_sum.total += graph.record.total;
    }
    const double inv = 1.0 / steps;
    log.add(static_cast<int>(epoch), "loss_g_adv", epoch_sum.loss_g_adv * inv);
    log.add(static_cast<int>(epoch), "loss_f_adv", epoch_sum.loss_f_adv * inv);
    log.add(static_cast<int>(epoch), "loss_cycle", epoch_sum.loss_cycle * inv);
    log.add(static_cast<int>(epoch), "loss_d_x", epoch_sum.loss_d_x * inv);
    log.add(static_cast<int>(epoch), "loss_d_y", epoch_sum.loss_d_y * inv);
    log.add(static_cast<int>(epoch), "total", epoch_sum.total * inv);

    Checkpoint ckpt;
    ckpt.task = "cyclegan";
    ckpt.arch = model.arch.descriptor();
    ckpt.config_hash = cfg.config_hash;
    ckpt.epoch = epoch + 1;
    ckpt.rng_state = serialize_rng(loop_rng);
    cyclegan_to_checkpoint(model, gen_opt, disc_opt, ckpt);
    save_checkpoint(ckpt, ckpt_path);
  }
  log.save(out_dir / "loss_log.csv");
  TrainResult res;
  res.checkpoint_path = ckpt_path;
  res.final_metric = log.last("total");
  res.log = std::move(log);
  return res;
}

// ---- encoder pre-train ----

inline NstArch nst_arch(const TrainConfig& cfg) {
  NstArch a = cfg.scale == "full" ? NstArch::full() : NstArch::desk();
  a.n_styles = cfg.n_styles;
  return a;
}

// Binary sim-vs-real classifier on the 4-block encoder; the head is kept in
// the checkpoint for inspection but discarded by NST training. Reports final
// training accuracy.
inline TrainResult pretrain_encoder(const TrainConfig& cfg,
                                    const DatasetManifest& sim_manifest,
                                    const DatasetManifest& real_manifest,
                                    const fs::path& out_dir) {
  cfg.validate();
  if (sim_manifest.entries.empty() || real_manifest.entries.empty())
    fail(ErrorKind::training,
         "pretrain_encoder: degenerate single-class input rejected");
  fs::create_directories(out_dir);
  auto sim_grids = load_grids(sim_manifest, cfg.bev);
  auto real_grids = load_grids(real_manifest, cfg.bev);

  NstArch arch = nst_arch(cfg);
  Rng init_rng = substream(cfg.seed, "encoder/init");
  FeatureExtractor<float> extractor(arch, init_rng);
  EncoderClassifierHead<float> head(arch, init_rng);
  extractor.set_training(true);

  NamedParams<float> params;
  extractor.collect("encoder", params);
  head.collect("head", params);
  Optimizer<float> opt(params, cfg.learning_rate);
  Rng loop_rng = substream(cfg.seed, "encoder/loop");

  // Sample list: (grid index, domain label), label 1 = real.
  std::vector<std::pair<int, int>> samples;
  for (int i = 0; i < static_cast<int>(sim_grids.size()); ++i)
    samples.emplace_back(i, 0);
  for (int i = 0; i < static_cast<int>(real_grids.size()); ++i)
    samples.emplace_back(i, 1);

  LossLog log;
  double accuracy = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = detail::shuffled_indices(static_cast<int>(samples.size()), loop_rng);
    double loss_sum = 0;
    int correct = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const std::size_t end = std::min(pos + cfg.batch_size, order.size());
      opt.zero_grad();
      Tensor<float> batch_loss = Tensor<float>::scalar(0.0f);
      for (std::size_t k = pos; k < end; ++k) {
        const auto& [idx, label] = samples[order[k]];
        const auto& grid = label == 1 ? real_grids[idx] : sim_grids[idx];
        auto acts = extractor.forward(grid_to_tensor(grid));
        auto p = head.forward(acts.back());
        // binary cross-entropy
        auto one_minus = add_scalar(scale(p, -1.0f), 1.0f);
        auto bce = label == 1 ? scale(log_op(p), -1.0f)
                              : scale(log_op(one_minus), -1.0f);
        batch_loss = add(batch_loss, bce);
        if ((p.item() > 0.5f) == (label == 1)) ++correct;
      }
      batch_loss = scale(batch_loss, 1.0f / static_cast<float>(end - pos));
      if (!std::isfinite(static_cast<double>(batch_loss.item())))
        fail(ErrorKind::training, "encoder pre-train loss is non-finite");
      loss_sum += batch_loss.item() * static_cast<double>(end - pos);
      batch_loss.backward();
      opt.step();
    }
    accuracy = static_cast<double>(correct) / samples.size();
    log.add(epoch, "bce", loss_sum / samples.size());
    log.add(epoch, "accuracy", accuracy);
  }

  Checkpoint ckpt;
  ckpt.task = "encoder";
  ckpt.arch = arch.descriptor();
  ckpt.config_hash = cfg.config_hash;
  ckpt.epoch = cfg.epochs;
  ckpt.rng_state = serialize_rng(loop_rng);
  put_params(ckpt, params);
  NamedParams<float> buffers;
  extractor.collect_buffers("encoder", buffers);
  put_params(ckpt, buffers);
  put_optimizer(ckpt, "adam", opt);
  ckpt.put("meta/accuracy", {1}, {static_cast<float>(accuracy)});
  const fs::path ckpt_path = out_dir / "checkpoint.nsmckpt";
  save_checkpoint(ckpt, ckpt_path);
  log.save(out_dir / "loss_log.csv");

  TrainResult res;
  res.checkpoint_path = ckpt_path;
  res.log = std::move(log);
  res.final_metric = accuracy;
  return res;
}

inline NstArch parse_nst_descriptor(const std::string& d) {
  NstArch arch;
  if (std::sscanf(d.c_str(), "nst:enc=%d,trans=%d,styles=%d", &arch.encoder_base,
                  &arch.transformer_base, &arch.n_styles) != 3)
    fail(ErrorKind::checkpoint, "bad nst descriptor: " + d);
  return arch;
}

inline void load_extractor_from_encoder_ckpt(const Checkpoint& ckpt,
                                             FeatureExtractor<float>& extractor) {
  NamedParams<float> params;
  extractor.collect("encoder", params);
  load_params(ckpt, params);
  for (std::size_t i = 0; i < extractor.bns.size(); ++i) {
    const std::string p = "encoder.bn" + std::to_string(i);
    extractor.bns[i].running_mean = ckpt.get(p + ".running_mean").second;
    extractor.bns[i].running_var = ckpt.get(p + ".running_var").second;
  }
  extractor.set_training(false);
}

// ---- NST ----

inline void nst_to_checkpoint(NstModel<float>& model, Optimizer<float>& opt,
                              Checkpoint& ckpt) {
  NamedParams<float> trans_params;
  model.transformer.collect("transformer", trans_params);
  put_params(ckpt, trans_params);
  NamedParams<float> enc;
  model.feature_extractor.collect("encoder", enc);
  put_params(ckpt, enc);
  NamedParams<float> buffers;
  model.feature_extractor.collect_buffers("encoder", buffers);
  put_params(ckpt, buffers);
  put_optimizer(ckpt, "adam", opt);
  for (std::size_t i = 0; i < model.style_bank.size(); ++i)
    ckpt.put("style_bank/" + std::to_string(i), model.style_bank[i]);
  ckpt.put("meta/lambda", {2}, {model.lambda_s, model.lambda_c});
  ckpt.put("meta/localized_grid",
           {model.localized_weights.grid_rows, model.localized_weights.grid_cols},
           model.localized_weights.grid);
  if (!model.localized_weights.slice.empty())
    ckpt.put("meta/localized_slice",
             {static_cast<int>(model.localized_weights.slice.size())},
             model.localized_weights.slice);
}

inline NstModel<float> load_nst_model(const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.task != "nst")
    fail(ErrorKind::checkpoint, "expected nst checkpoint, got task " + ckpt.task);
  Rng dummy(0);
  NstModel<float> model(parse_nst_descriptor(ckpt.arch), dummy);
  NamedParams<float> params;
  model.transformer.collect("transformer", params);
  model.feature_extractor.collect("encoder", params);
  load_params(ckpt, params);
  for (std::size_t i = 0; i < model.feature_extractor.bns.size(); ++i) {
    const std::string p = "encoder.bn" + std::to_string(i);
    model.feature_extractor.bns[i].running_mean = ckpt.get(p + ".running_mean").second;
    model.feature_extractor.bns[i].running_var = ckpt.get(p + ".running_var").second;
  }
  model.feature_extractor.set_training(false);
  for (int i = 0; ckpt.has("style_bank/" + std::to_string(i)); ++i) {
    const auto& [shape, data] = ckpt.get("style_bank/" + std::to_string(i));
    model.style_bank.push_back(Tensor<float>::from_data(shape, data));
  }
  const auto& lam = ckpt.get("meta/lambda").second;
  model.lambda_s = lam[0];
  model.lambda_c = lam[1];
  const auto& grid = ckpt.get("meta/localized_grid");
  model.localized_weights.grid_rows = grid.first[0];
  model.localized_weights.grid_cols = grid.first[1];
  model.localized_weights.grid = grid.second;
  model.localized_weights.slice =
      ckpt.has("meta/localized_slice") ? ckpt.get("meta/localized_slice").second
                                       : std::vector<float>{};
  return model;
}

// Frozen pre-trained extractor; each batch samples one style index uniformly
// (seeded) and optimizes the weighted content + style objective.
inline TrainResult train_nst(const TrainConfig& cfg,
                             const DatasetManifest& content_manifest,
                             const std::vector<BevGrid>& style_bank,
                             const fs::path& encoder_ckpt_path,
                             const fs::path& out_dir,
                             const fs::path& resume = {}) {
  cfg.validate();
  if (content_manifest.entries.empty())
    fail(ErrorKind::missing_input, "train_nst: empty content manifest");
  if (style_bank.empty()) fail(ErrorKind::usage, "train_nst: style bank is empty");
  fs::create_directories(out_dir);
  auto content = load_grids(content_manifest, cfg.bev);

  NstArch arch = nst_arch(cfg);
  arch.n_styles = static_cast<int>(style_bank.size());
  Rng init_rng = substream(cfg.seed, "nst/init");
  NstModel<float> model(arch, init_rng);
  model.lambda_s = cfg.lambda_s;
  model.lambda_c = cfg.lambda_c;
  for (const auto& g : style_bank) model.style_bank.push_back(grid_to_tensor(g));

  Checkpoint enc_ckpt = load_checkpoint(encoder_ckpt_path);
  if (enc_ckpt.task != "encoder")
    fail(ErrorKind::checkpoint, "train_nst: expected an encoder checkpoint");
  load_extractor_from_encoder_ckpt(enc_ckpt, model.feature_extractor);

  NamedParams<float> params;
  model.transformer.collect("transformer", params);
  Optimizer<float> opt(params, cfg.learning_rate);
  Rng loop_rng = substream(cfg.seed, "nst/loop");
  std::int64_t start_epoch = 0;
  LossLog log;

  if (!resume.empty()) {
    Checkpoint ckpt = load_checkpoint(resume);
    if (ckpt.config_hash != cfg.config_hash)
      fail(ErrorKind::checkpoint, "resume config hash mismatch");
    load_params(ckpt, params);
    load_optimizer(ckpt, "adam", opt);
    loop_rng = deserialize_rng(ckpt.rng_state);
    start_epoch = ckpt.epoch;
  }

  auto style_acts = model.style_activations();
  const fs::path ckpt_path = out_dir / "checkpoint.nsmckpt";
  const int steps = static_cast<int>(content.size()) / cfg.batch_size;
  if (steps < 1) fail(ErrorKind::usage, "train_nst: batch larger than dataset");
  std::uniform_int_distribution<int> style_dist(
      0, static_cast<int>(style_bank.size()) - 1);

  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto order = detail::shuffled_indices(static_cast<int>(content.size()), loop_rng);
    NstLossRecord<float> epoch_sum;
    for (int step = 0; step < steps; ++step) {
      std::vector<int> idx(order.begin() + step * cfg.batch_size,
                           order.begin() + (step + 1) * cfg.batch_size);
      const int style = style_dist(loop_rng);
      auto batch = grids_to_tensor(content, idx);
      auto graph = nst_total_loss(model, batch, style, &style_acts[style]);
      opt.zero_grad();
      graph.total.backward();
      opt.step();
      epoch_sum.style += graph.record.style;
      epoch_sum.content += graph.record.content;
      epoch_sum.total += graph.record.total;
    }
    const double inv = 1.0 / steps;
    log.add(static_cast<int>(epoch), "style", epoch_sum.style * inv);
    log.add(static_cast<int>(epoch), "content", epoch_sum.content * inv);
    log.add(static_cast<int>(epoch), "total", epoch_sum.total * inv);

    Checkpoint ckpt;
    ckpt.task = "nst";
    ckpt.arch = arch.descriptor();
    ckpt.config_hash = cfg.config_hash;
    ckpt.epoch = epoch + 1;
    ckpt.rng_state = serialize_rng(loop_rng);
    nst_to_checkpoint(model, opt, ckpt);
    save_checkpoint(ckpt, ckpt_path);
  }
  log.save(out_dir / "loss_log.csv");
  TrainResult res;
  res.checkpoint_path = ckpt_path;
  res.final_metric = log.last("total");
  res.log = std::move(log);
  return res;
}

// ---- detector ----

inline DetectorConfig detector_config_for(const TrainConfig& cfg) {
  DetectorConfig det = cfg.detector;
  det.bev = cfg.bev;
  det.input_resolution = cfg.bev.resolution;
  det.validate();
  return det;
}

inline void detector_to_checkpoint(DetectorNet<float>& net,
                                   const DetectorConfig& det, Optimizer<float>& opt,
                                   Checkpoint& ckpt) {
  NamedParams<float> params;
  net.collect("detector", params);
  put_params(ckpt, params);
  NamedParams<float> buffers;
  net.collect_buffers("detector", buffers);
  put_params(ckpt, buffers);
  put_optimizer(ckpt, "adam", opt);
  std::vector<float> anchors;
  for (auto& [w, l] : det.anchors) {
    anchors.push_back(static_cast<float>(w));
    anchors.push_back(static_cast<float>(l));
  }
  ckpt.put("meta/anchors", {det.num_anchors(), 2}, anchors);
  ckpt.put("meta/detector",
           {6},
           {static_cast<float>(det.input_resolution),
            static_cast<float>(det.grid_cells),
            static_cast<float>(det.class_count),
            static_cast<float>(det.confidence_threshold),
            static_cast<float>(det.nms_iou_threshold), 0.0f});
  ckpt.put("meta/bev", {7},
           {det.bev.x_min, det.bev.x_max, det.bev.y_min, det.bev.y_max,
            det.bev.z_min, det.bev.z_max, static_cast<float>(det.bev.resolution)});
}

struct LoadedDetector {
  DetectorNet<float> net;
  DetectorConfig config;
};

inline LoadedDetector load_detector_model(const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.task != "detector")
    fail(ErrorKind::checkpoint, "expected detector checkpoint, got task " + ckpt.task);
  DetectorConfig det;
  const auto& meta = ckpt.get("meta/detector").second;
  det.input_resolution = static_cast<int>(meta[0]);
  det.grid_cells = static_cast<int>(meta[1]);
  det.class_count = static_cast<int>(meta[2]);
  det.confidence_threshold = meta[3];
  det.nms_iou_threshold = meta[4];
  const auto& anchors = ckpt.get("meta/anchors");
  det.anchors.clear();
  for (int i = 0; i < anchors.first[0]; ++i)
    det.anchors.emplace_back(anchors.second[2 * i], anchors.second[2 * i + 1]);
  const auto& bev = ckpt.get("meta/bev").second;
  det.bev.x_min = bev[0];
  det.bev.x_max = bev[1];
  det.bev.y_min = bev[2];
  det.bev.y_max = bev[3];
  det.bev.z_min = bev[4];
  det.bev.z_max = bev[5];
  det.bev.resolution = static_cast<int>(bev[6]);

  LoadedDetector out;
  out.config = det;
  Rng dummy(0);
  out.net = DetectorNet<float>(det, dummy);
  NamedParams<float> params;
  out.net.collect("detector", params);
  load_params(ckpt, params);
  for (std::size_t i = 0; i < out.net.bns.size(); ++i) {
    const std::string p = "detector.bn" + std::to_string(i);
    out.net.bns[i].running_mean = ckpt.get(p + ".running_mean").second;
    out.net.bns[i].running_var = ckpt.get(p + ".running_var").second;
  }
  out.net.set_training(false);
  return out;
}

inline TrainResult train_detector(const TrainConfig& cfg,
                                  const DatasetManifest& manifest,
                                  const fs::path& out_dir,
                                  const fs::path& resume = {}) {
  cfg.validate();
  if (manifest.entries.empty())
    fail(ErrorKind::missing_input, "train_detector: empty manifest");
  fs::create_directories(out_dir);
  DetectorConfig det = detector_config_for(cfg);
  auto grids = load_grids(manifest, cfg.bev);
  std::vector<TargetTensor> targets;
  targets.reserve(grids.size());
  for (const auto& e : manifest.entries)
    targets.push_back(encode_targets(read_labels(e.label_path), det));

  Rng init_rng = substream(cfg.seed, "detector/init");
  DetectorNet<float> net(det, init_rng);
  net.set_training(true);
  NamedParams<float> params;
  net.collect("detector", params);
  Optimizer<float> opt(params, cfg.learning_rate);
  Rng loop_rng = substream(cfg.seed, "detector/loop");
  std::int64_t start_epoch = 0;
  LossLog log;

  if (!resume.empty()) {
    Checkpoint ckpt = load_checkpoint(resume);
    if (ckpt.config_hash != cfg.config_hash)
      fail(ErrorKind::checkpoint, "resume config hash mismatch");
    load_params(ckpt, params);
    load_optimizer(ckpt, "adam", opt);
    for (std::size_t i = 0; i < net.bns.size(); ++i) {
      const std::string p = "detector.bn" + std::to_string(i);
      net.bns[i].running_mean = ckpt.get(p + ".running_mean").second;
      net.bns[i].running_var = ckpt.get(p + ".running_var").second;
    }
    loop_rng = deserialize_rng(ckpt.rng_state);
    start_epoch = ckpt.epoch;
  }

  const fs::path ckpt_path = out_dir / "checkpoint.nsmckpt";
  const int steps = static_cast<int>(grids.size()) / cfg.batch_size;
  if (steps < 1) fail(ErrorKind::usage, "train_detector: batch larger than dataset");

  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto order = detail::shuffled_indices(static_cast<int>(grids.size()), loop_rng);
    DetectorLossRecord<float> epoch_sum;
    for (int step = 0; step < steps; ++step) {
      std::vector<int> idx(order.begin() + step * cfg.batch_size,
                           order.begin() + (step + 1) * cfg.batch_size);
      auto batch = grids_to_tensor(grids, idx);
      std::vector<TargetTensor> batch_targets;
      for (int i : idx) batch_targets.push_back(targets[i]);
      auto pred = net.forward(batch);
      auto [loss, rec] = detector_loss(pred, batch_targets, det);
      if (!std::isfinite(static_cast<double>(rec.total)))
        fail(ErrorKind::training, "detector loss is non-finite");
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_sum.coord += rec.coord;
      epoch_sum.size += rec.size;
      epoch_sum.orient += rec.orient;
      epoch_sum.obj += rec.obj;
      epoch_sum.noobj += rec.noobj;
      epoch_sum.cls += rec.cls;
      epoch_sum.total += rec.total;
    }
    const double inv = 1.0 / steps;
    log.add(static_cast<int>(epoch), "coord", epoch_sum.coord * inv);
    log.add(static_cast<int>(epoch), "size", epoch_sum.size * inv);
    log.add(static_cast<int>(epoch), "orient", epoch_sum.orient * inv);
    log.add(static_cast<int>(epoch), "obj", epoch_sum.obj * inv);
    log.add(static_cast<int>(epoch), "noobj", epoch_sum.noobj * inv);
    log.add(static_cast<int>(epoch), "class", epoch_sum.cls * inv);
    log.add(static_cast<int>(epoch), "total", epoch_sum.total * inv);

    Checkpoint ckpt;
    ckpt.task = "detector";
    ckpt.arch = net.descriptor();
    ckpt.config_hash = cfg.config_hash;
    ckpt.epoch = epoch + 1;
    ckpt.rng_state = serialize_rng(loop_rng);
    detector_to_checkpoint(net, det, opt, ckpt);
    save_checkpoint(ckpt, ckpt_path);
  }
  log.save(out_dir / "loss_log.csv");
  TrainResult res;
  res.checkpoint_path = ckpt_path;
  res.final_metric = log.last("total");
  res.log = std::move(log);
  return res;
}

// Run a loaded detector over a manifest; returns per-frame detections plus
// ground truth aligned by index.
inline std::pair<std::vector<FrameDetection>, std::vector<std::vector<OrientedBox>>>
run_detector(LoadedDetector& det, const DatasetManifest& manifest) {
  det.net.set_training(false);
  std::vector<FrameDetection> dets;
  std::vector<std::vector<OrientedBox>> gt;
  for (std::size_t f = 0; f < manifest.entries.size(); ++f) {
    const auto& e = manifest.entries[f];
    auto grid = load_grid_pgm(e.frame_path, det.config.bev);
    auto pred = det.net.forward(grid_to_tensor(grid));
    for (auto& box : decode_predictions(pred, det.config))
      dets.push_back({static_cast<int>(f), box});
    gt.push_back(read_labels(e.label_path));
  }
  return {std::move(dets), std::move(gt)};
}

}  // namespace nsm
