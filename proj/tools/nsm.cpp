// nsm — sim-to-real LiDAR sensor-model toolkit over BEV occupancy grids.
//
// Workflow: project (or toyworld) -> pretrain-encoder / train-nsm ->
// stylebank / select-style -> generate / augment -> train-detector -> eval /
// matrix. Every command writes a run.json provenance record next to its
// outputs.

#include <iostream>

#include <CLI11.hpp>

#include "nsm/augmentation.hpp"
#include "nsm/config.hpp"
#include "nsm/toyworld.hpp"
#include "nsm/training.hpp"

namespace {

using namespace nsm;

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::missing_input: return "missing_input";
    case ErrorKind::checkpoint: return "checkpoint";
    case ErrorKind::shape: return "shape";
    case ErrorKind::training: return "training";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

constexpr const char* kExitCodeTable = R"(Exit codes:
  0  success
  2  usage / config violation
  3  missing input
  4  checkpoint mismatch or corruption
  5  tensor shape error
  6  training failure (non-finite loss, degenerate data)
  7  internal error
)";

struct Cli {
  std::string config_path;
  RunConfig config;

  void load() {
    if (!config_path.empty()) config.load_file(config_path);
  }
};

void finish_run(const RunConfig& cfg, RunRecord& rec, const fs::path& out_dir) {
  rec.config_hash = cfg.hash();
  fs::create_directories(out_dir);
  rec.save(out_dir / "run.json");
}

// ---- project ----

int cmd_project(Cli& cli, const std::string& input, const std::string& labels,
                const std::string& out) {
  cli.load();
  const BevConfig bev = cli.config.bev();
  fs::create_directories(out);
  RunRecord rec;
  rec.command = "project";

  std::vector<fs::path> clouds;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.path().extension() == ".bin") clouds.push_back(e.path());
    std::sort(clouds.begin(), clouds.end());
  } else {
    clouds.push_back(input);
  }
  if (clouds.empty()) fail(ErrorKind::missing_input, "no .bin point clouds in " + input);

  DatasetManifest manifest;
  for (const auto& cloud_path : clouds) {
    rec.add_input(cloud_path);
    auto grid = project_to_bev(read_pointcloud_bin(cloud_path), bev);
    const std::string stem = cloud_path.stem().string();
    const fs::path frame = fs::path(out) / (stem + ".pgm");
    save_grid_pgm(grid, frame);

    std::vector<OrientedBox> boxes;
    if (!labels.empty()) {
      const fs::path label_src = fs::is_directory(labels)
                                     ? fs::path(labels) / (stem + ".txt")
                                     : fs::path(labels);
      if (!fs::exists(label_src))
        fail(ErrorKind::missing_input, "label file not found: " + label_src.string());
      rec.add_input(label_src);
      for (const auto& b3 : read_kitti_labels(label_src))
        if (auto bb = box3d_to_bev(b3, bev)) boxes.push_back(*bb);
    }
    const fs::path label = fs::path(out) / (stem + ".txt");
    write_labels(boxes, label);
    manifest.entries.push_back({frame.string(), label.string(), "real", "none"});
    rec.add_output(frame);
    rec.add_output(label);
  }
  const fs::path mpath = fs::path(out) / "projected.manifest";
  write_manifest(manifest, mpath);
  rec.add_output(mpath);
  finish_run(cli.config, rec, out);
  std::cout << "projected " << clouds.size() << " frame(s) -> " << mpath.string()
            << "\n";
  return 0;
}

// ---- toyworld ----

int cmd_toyworld(Cli& cli, const std::string& out) {
  cli.load();
  const SceneSpec spec = cli.config.toyworld_scene();
  const CorruptionModel model = cli.config.toyworld_corruption();
  const std::uint64_t seed = cli.config.seed_value("toyworld.seed");
  RunRecord rec;
  rec.command = "toyworld";
  rec.seed = seed;
  auto corpus = gen_corpus(spec, model, cli.config.integer("toyworld.n_sim"),
                           cli.config.integer("toyworld.n_real"),
                           cli.config.integer("toyworld.n_test"), seed, out);
  for (const char* name : {"sim.manifest", "real_train.manifest",
                           "real_test.manifest"})
    rec.add_output(fs::path(out) / name);
  finish_run(cli.config, rec, out);
  std::cout << "toy corpus: " << corpus.sim.entries.size() << " sim, "
            << corpus.real_train.entries.size() << " real train, "
            << corpus.real_test.entries.size() << " real test -> " << out << "\n";
  return 0;
}

// ---- training commands ----

int cmd_train_nsm(Cli& cli, const std::string& kind, const std::string& sim,
                  const std::string& real, const std::string& content,
                  const std::string& stylebank, const std::string& encoder,
                  const std::string& out, const std::string& resume) {
  cli.load();
  RunRecord rec;
  rec.command = "train-nsm:" + kind;
  if (kind == "cyclegan") {
    if (sim.empty() || real.empty())
      fail(ErrorKind::usage, "train-nsm --kind cyclegan needs --sim and --real");
    TrainConfig cfg = cli.config.cyclegan_train();
    rec.seed = cfg.seed;
    rec.add_input(sim);
    rec.add_input(real);
    auto res = train_cyclegan(cfg, read_manifest(sim), read_manifest(real), out,
                              resume.empty() ? fs::path{} : fs::path(resume));
    rec.add_output(res.checkpoint_path);
    rec.add_output(fs::path(out) / "loss_log.csv");
    finish_run(cli.config, rec, out);
    std::cout << "cyclegan trained, final loss " << res.final_metric << " -> "
              << res.checkpoint_path.string() << "\n";
  } else if (kind == "nst") {
    if (content.empty() || stylebank.empty() || encoder.empty())
      fail(ErrorKind::usage,
           "train-nsm --kind nst needs --content, --stylebank and --encoder");
    TrainConfig cfg = cli.config.nst_train();
    rec.seed = cfg.seed;
    rec.add_input(content);
    rec.add_input(stylebank);
    rec.add_input(encoder);
    auto bank_manifest = read_manifest(stylebank);
    std::vector<BevGrid> bank;
    for (const auto& e : bank_manifest.entries)
      bank.push_back(load_grid_pgm(e.frame_path, cfg.bev));
    auto res = train_nst(cfg, read_manifest(content), bank, encoder, out,
                         resume.empty() ? fs::path{} : fs::path(resume));
    rec.add_output(res.checkpoint_path);
    rec.add_output(fs::path(out) / "loss_log.csv");
    finish_run(cli.config, rec, out);
    std::cout << "nst trained, final loss " << res.final_metric << " -> "
              << res.checkpoint_path.string() << "\n";
  } else {
    fail(ErrorKind::usage, "train-nsm: --kind must be cyclegan or nst");
  }
  return 0;
}

int cmd_pretrain_encoder(Cli& cli, const std::string& sim, const std::string& real,
                         const std::string& out) {
  cli.load();
  TrainConfig cfg = cli.config.encoder_train();
  RunRecord rec;
  rec.command = "pretrain-encoder";
  rec.seed = cfg.seed;
  rec.add_input(sim);
  rec.add_input(real);
  auto res = pretrain_encoder(cfg, read_manifest(sim), read_manifest(real), out);
  rec.add_output(res.checkpoint_path);
  finish_run(cli.config, rec, out);
  std::cout << "encoder pre-trained, accuracy " << res.final_metric << " -> "
            << res.checkpoint_path.string() << "\n";
  return 0;
}

int cmd_stylebank(Cli& cli, const std::string& real, int n, const std::string& out) {
  cli.load();
  const BevConfig bev = cli.config.bev();
  const std::uint64_t seed = cli.config.seed_value("augmentation.seed");
  RunRecord rec;
  rec.command = "stylebank";
  rec.seed = seed;
  rec.add_input(real);
  auto bank = build_style_bank(read_manifest(real), n, bev, seed);
  fs::create_directories(out);
  DatasetManifest manifest;
  manifest.seed = seed;
  for (std::size_t i = 0; i < bank.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "style_%02zu.pgm", i);
    const fs::path frame = fs::path(out) / name;
    save_grid_pgm(bank.frames[i], frame);
    manifest.entries.push_back({frame.string(), "-", "real", "none"});
    rec.add_output(frame);
    std::cout << "style " << i << " <- " << bank.frame_paths[i] << "\n";
  }
  const fs::path mpath = fs::path(out) / "stylebank.manifest";
  write_manifest(manifest, mpath);
  rec.add_output(mpath);
  finish_run(cli.config, rec, out);
  return 0;
}

int cmd_select_style(Cli& cli, const std::string& nst_ckpt,
                     const std::string& detector_ckpt, const std::string& probe,
                     const std::string& out) {
  cli.load();
  RunRecord rec;
  rec.command = "select-style";
  rec.add_input(nst_ckpt);
  rec.add_input(detector_ckpt);
  rec.add_input(probe);
  auto nst = load_nst_model(nst_ckpt);
  auto det = load_detector_model(detector_ckpt);
  auto rank = select_best_style(nst, det, read_manifest(probe),
                                cli.config.eval_iou());
  fs::create_directories(out);
  nlohmann::json j;
  j["best_style"] = rank.best_index;
  j["map_per_style"] = rank.map_per_style;
  const fs::path rpath = fs::path(out) / "style_ranking.json";
  std::ofstream(rpath) << j.dump(2) << '\n';
  rec.add_output(rpath);
  finish_run(cli.config, rec, out);
  for (std::size_t i = 0; i < rank.map_per_style.size(); ++i)
    std::cout << "style " << i << ": mAP " << rank.map_per_style[i] * 100 << "%\n";
  std::cout << "best style: " << rank.best_index << "\n";
  return 0;
}

SensorMapper make_mapper(const std::string& mapping, const std::string& gan_ckpt,
                         const std::string& nst_ckpt) {
  MappingSpec spec = parse_mapping(mapping);
  switch (spec.kind) {
    case MappingKind::identity:
      return SensorMapper::identity();
    case MappingKind::cyclegan:
      if (gan_ckpt.empty())
        fail(ErrorKind::usage, "mapping cyclegan needs --cyclegan <checkpoint>");
      return SensorMapper::from_cyclegan(gan_ckpt);
    case MappingKind::nst:
      if (nst_ckpt.empty())
        fail(ErrorKind::usage, "mapping nst needs --nst <checkpoint>");
      return SensorMapper::from_nst(nst_ckpt, spec.style_index);
  }
  fail(ErrorKind::internal, "unreachable");
}

int cmd_generate(Cli& cli, const std::string& input, const std::string& mapping,
                 const std::string& gan_ckpt, const std::string& nst_ckpt,
                 const std::string& out) {
  cli.load();
  RunRecord rec;
  rec.command = "generate:" + mapping;
  rec.add_input(input);
  if (!gan_ckpt.empty()) rec.add_input(gan_ckpt);
  if (!nst_ckpt.empty()) rec.add_input(nst_ckpt);
  SensorMapper mapper = make_mapper(mapping, gan_ckpt, nst_ckpt);
  auto mapped = materialize_mapped(read_manifest(input), mapper, cli.config.bev(),
                                   out);
  const fs::path mpath = fs::path(out) / "mapped.manifest";
  write_manifest(mapped, mpath);
  rec.add_output(mpath);
  for (const auto& e : mapped.entries) rec.add_output(e.frame_path);
  finish_run(cli.config, rec, out);
  std::cout << "mapped " << mapped.entries.size() << " frame(s) -> "
            << mpath.string() << "\n";
  return 0;
}

int cmd_augment(Cli& cli, const std::string& real, const std::string& sim,
                int ratio, const std::string& mapping, const std::string& gan_ckpt,
                const std::string& nst_ckpt, const std::string& out) {
  cli.load();
  const std::uint64_t seed = cli.config.seed_value("augmentation.seed");
  RunRecord rec;
  rec.command = "augment";
  rec.seed = seed;
  rec.add_input(real);
  rec.add_input(sim);
  SensorMapper mapper = make_mapper(mapping, gan_ckpt, nst_ckpt);
  auto aug = build_augmented_manifest(read_manifest(real), read_manifest(sim),
                                      ratio, mapper, cli.config.bev(),
                                      fs::path(out) / "mapped", seed);
  const fs::path mpath = fs::path(out) / "augmented.manifest";
  fs::create_directories(out);
  write_manifest(aug, mpath);
  rec.add_output(mpath);
  finish_run(cli.config, rec, out);
  std::cout << "augmented manifest: " << aug.entries.size() << " entries -> "
            << mpath.string() << "\n";
  return 0;
}

int cmd_train_detector(Cli& cli, const std::string& train, const std::string& out,
                       const std::string& resume) {
  cli.load();
  TrainConfig cfg = cli.config.detector_train();
  RunRecord rec;
  rec.command = "train-detector";
  rec.seed = cfg.seed;
  rec.add_input(train);
  auto res = train_detector(cfg, read_manifest(train), out,
                            resume.empty() ? fs::path{} : fs::path(resume));
  rec.add_output(res.checkpoint_path);
  rec.add_output(fs::path(out) / "loss_log.csv");
  finish_run(cli.config, rec, out);
  std::cout << "detector trained, final loss " << res.final_metric << " -> "
            << res.checkpoint_path.string() << "\n";
  return 0;
}

void write_eval_report(const EvalReport& report, const fs::path& out_dir) {
  // Protocol choices are stated in every report header: Pascal-style
  // all-point interpolation at a single IoU threshold.
  std::ofstream csv(out_dir / "report.csv");
  csv << "# protocol: pascal all-point interpolation, oriented IoU >= "
      << report.iou_threshold << "\n";
  csv << "class,ap,n_gt,n_det\n" << std::setprecision(9);
  for (const auto& [cls, ap] : report.per_class)
    csv << cls << ',' << ap.ap << ',' << ap.n_gt << ',' << ap.n_det << '\n';

  nlohmann::json j;
  j["protocol"] = {{"interpolation", "all-point"},
                   {"iou_threshold", report.iou_threshold}};
  j["map"] = report.map;
  j["n_frames"] = report.n_frames;
  j["per_class"] = nlohmann::json::object();
  for (const auto& [cls, ap] : report.per_class) {
    nlohmann::json c;
    c["ap"] = ap.ap;
    c["n_gt"] = ap.n_gt;
    c["n_det"] = ap.n_det;
    c["pr_curve"] = nlohmann::json::array();
    for (const auto& p : ap.curve)
      c["pr_curve"].push_back({{"recall", p.recall}, {"precision", p.precision}});
    j["per_class"][std::to_string(cls)] = c;
  }
  std::ofstream(out_dir / "report.json") << j.dump(2) << '\n';
}

int cmd_eval(Cli& cli, const std::string& detector_ckpt,
             const std::string& detections_path, const std::string& test,
             const std::string& out) {
  cli.load();
  RunRecord rec;
  rec.command = "eval";
  rec.add_input(test);
  auto manifest = read_manifest(test);

  std::vector<FrameDetection> dets;
  std::vector<std::vector<OrientedBox>> gt;
  if (!detector_ckpt.empty()) {
    rec.add_input(detector_ckpt);
    auto det = load_detector_model(detector_ckpt);
    std::tie(dets, gt) = run_detector(det, manifest);
  } else if (!detections_path.empty()) {
    rec.add_input(detections_path);
    // Detection frame ids match the manifest frame stems (falling back to a
    // plain 0-based index).
    std::map<std::string, int> stem_to_index;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
      stem_to_index[fs::path(manifest.entries[i].frame_path).stem().string()] =
          static_cast<int>(i);
    for (const auto& d : read_detections(detections_path)) {
      int frame;
      if (auto it = stem_to_index.find(d.frame_id); it != stem_to_index.end()) {
        frame = it->second;
      } else {
        try {
          frame = std::stoi(d.frame_id);
        } catch (const std::exception&) {
          fail(ErrorKind::usage, "unknown detection frame id: " + d.frame_id);
        }
        if (frame < 0 || frame >= static_cast<int>(manifest.entries.size()))
          fail(ErrorKind::usage, "detection frame id out of range: " + d.frame_id);
      }
      dets.push_back({frame, d.box});
    }
    for (const auto& e : manifest.entries) gt.push_back(read_labels(e.label_path));
  } else {
    fail(ErrorKind::usage, "eval needs --detector or --detections");
  }

  auto report = evaluate_map(dets, gt, cli.config.eval_iou());
  fs::create_directories(out);
  write_eval_report(report, out);
  rec.add_output(fs::path(out) / "report.csv");
  rec.add_output(fs::path(out) / "report.json");
  finish_run(cli.config, rec, out);
  std::cout << "mAP " << report.map * 100 << "% over " << report.n_frames
            << " frame(s)\n";
  return 0;
}

int cmd_matrix(Cli& cli, const std::string& sim, const std::string& real,
               const std::string& test, const std::string& gan_ckpt,
               const std::string& nst_ckpt, const std::string& out) {
  cli.load();
  MatrixConfig cfg;
  cfg.ratios = cli.config.augmentation_ratios();
  cfg.mappings = cli.config.augmentation_mappings();
  cfg.cyclegan_checkpoint = gan_ckpt;
  cfg.nst_checkpoint = nst_ckpt;
  cfg.detector = cli.config.detector_train();
  cfg.iou_threshold = cli.config.eval_iou();
  RunRecord rec;
  rec.command = "matrix";
  rec.seed = cfg.detector.seed;
  rec.add_input(sim);
  rec.add_input(real);
  rec.add_input(test);
  if (!gan_ckpt.empty()) rec.add_input(gan_ckpt);
  if (!nst_ckpt.empty()) rec.add_input(nst_ckpt);
  auto result = run_experiment_matrix(cfg, read_manifest(sim), read_manifest(real),
                                      read_manifest(test), out);
  rec.add_output(fs::path(out) / "table1.csv");
  rec.add_output(fs::path(out) / "curve.csv");
  finish_run(cli.config, rec, out);
  for (const auto& c : result.cells)
    std::cout << c.training_data << ": "
              << (c.ok ? std::to_string(c.map_percent) + "%" : "FAILED " + c.error)
              << "\n";
  return 0;
}

int cmd_render(Cli& cli, const std::string& input, const std::string& labels,
               const std::string& detections_path, const std::string& frame_id,
               const std::string& out) {
  cli.load();
  RunRecord rec;
  rec.command = "render";
  rec.add_input(input);
  auto grid = load_grid_pgm(input, cli.config.bev());
  std::vector<OrientedBox> boxes;
  if (!labels.empty()) {
    rec.add_input(labels);
    boxes = read_labels(labels);
  }
  if (!detections_path.empty()) {
    rec.add_input(detections_path);
    for (const auto& d : read_detections(detections_path))
      if (d.frame_id == frame_id) boxes.push_back(d.box);
  }
  auto img = render_grid(grid, boxes);
  const fs::path out_path(out);
  if (out_path.extension() == ".png")
    write_bytes(out_path, encode_png(img));
  else
    write_bytes(out_path, encode_pgm(img));
  rec.add_output(out_path);
  finish_run(cli.config, rec, out_path.parent_path().empty()
                                  ? fs::path(".")
                                  : out_path.parent_path());
  std::cout << "rendered " << boxes.size() << " box(es) -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nsm — LiDAR sensor-model toolkit over BEV occupancy grids"};
  app.footer(kExitCodeTable);
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "key = value configuration file")
      ->configurable(false);

  std::string input, labels, out, sim, real, content, stylebank, encoder, resume,
      mapping = "identity", kind, nst_ckpt, gan_ckpt, detector_ckpt,
      detections_path, test, probe;
  int n = 1, ratio = 1;
  std::string frame_id = "0";

  auto* project = app.add_subcommand("project", "point clouds -> BEV frames");
  project->add_option("--input", input, "velodyne .bin file or directory")
      ->required();
  project->add_option("--labels", labels, "3D label file or directory");
  project->add_option("--out", out, "output directory")->required();

  auto* toyworld = app.add_subcommand("toyworld", "generate toy corpora");
  toyworld->add_option("--out", out, "output directory")->required();

  auto* train_nsm = app.add_subcommand("train-nsm", "train a sensor model");
  train_nsm->add_option("--kind", kind, "cyclegan | nst")->required();
  train_nsm->add_option("--sim", sim, "sim manifest (cyclegan)");
  train_nsm->add_option("--real", real, "real manifest (cyclegan)");
  train_nsm->add_option("--content", content, "content manifest (nst)");
  train_nsm->add_option("--stylebank", stylebank, "style bank manifest (nst)");
  train_nsm->add_option("--encoder", encoder, "encoder checkpoint (nst)");
  train_nsm->add_option("--resume", resume, "checkpoint to resume from");
  train_nsm->add_option("--out", out, "output directory")->required();

  auto* pretrain = app.add_subcommand("pretrain-encoder",
                                      "binary sim-vs-real encoder pre-train");
  pretrain->add_option("--sim", sim, "sim manifest")->required();
  pretrain->add_option("--real", real, "real manifest")->required();
  pretrain->add_option("--out", out, "output directory")->required();

  auto* bank = app.add_subcommand("stylebank", "cluster a corpus into style frames");
  bank->add_option("--real", real, "real manifest")->required();
  bank->add_option("--n", n, "number of styles")->required();
  bank->add_option("--out", out, "output directory")->required();

  auto* select = app.add_subcommand("select-style",
                                    "rank styles by probe-detector mAP");
  select->add_option("--nst", nst_ckpt, "nst checkpoint")->required();
  select->add_option("--detector", detector_ckpt, "probe detector checkpoint")
      ->required();
  select->add_option("--probe", probe, "sim probe manifest")->required();
  select->add_option("--out", out, "output directory")->required();

  auto* generate = app.add_subcommand("generate", "materialize mapped frames");
  generate->add_option("--input", input, "manifest to map")->required();
  generate->add_option("--mapping", mapping, "identity | cyclegan | nst[:k]");
  generate->add_option("--cyclegan", gan_ckpt, "cyclegan checkpoint");
  generate->add_option("--nst", nst_ckpt, "nst checkpoint");
  generate->add_option("--out", out, "output directory")->required();

  auto* augment = app.add_subcommand("augment", "build a mixed training manifest");
  augment->add_option("--real", real, "real manifest")->required();
  augment->add_option("--sim", sim, "sim manifest")->required();
  augment->add_option("--ratio", ratio, "sim:real ratio")->required();
  augment->add_option("--mapping", mapping, "identity | cyclegan | nst[:k]");
  augment->add_option("--cyclegan", gan_ckpt, "cyclegan checkpoint");
  augment->add_option("--nst", nst_ckpt, "nst checkpoint");
  augment->add_option("--out", out, "output directory")->required();

  auto* train_det = app.add_subcommand("train-detector", "train the BEV detector");
  train_det->add_option("--train", input, "training manifest")->required();
  train_det->add_option("--resume", resume, "checkpoint to resume from");
  train_det->add_option("--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "mAP report on a test manifest");
  eval->add_option("--detector", detector_ckpt, "detector checkpoint");
  eval->add_option("--detections", detections_path, "pre-computed detections file");
  eval->add_option("--test", test, "test manifest")->required();
  eval->add_option("--out", out, "output directory")->required();

  auto* matrix = app.add_subcommand("matrix", "full experiment grid");
  matrix->add_option("--sim", sim, "sim manifest")->required();
  matrix->add_option("--real", real, "real train manifest")->required();
  matrix->add_option("--test", test, "real test manifest")->required();
  matrix->add_option("--cyclegan", gan_ckpt, "cyclegan checkpoint");
  matrix->add_option("--nst", nst_ckpt, "nst checkpoint");
  matrix->add_option("--out", out, "output directory")->required();

  auto* render = app.add_subcommand("render", "frame + box overlay panel");
  render->add_option("--input", input, "frame (.pgm)")->required();
  render->add_option("--labels", labels, "label file to overlay");
  render->add_option("--detections", detections_path, "detections file to overlay");
  render->add_option("--frame", frame_id, "frame id within --detections");
  render->add_option("--out", out, "output image (.pgm or .png)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (project->parsed()) return cmd_project(cli, input, labels, out);
    if (toyworld->parsed()) return cmd_toyworld(cli, out);
    if (train_nsm->parsed())
      return cmd_train_nsm(cli, kind, sim, real, content, stylebank, encoder, out,
                           resume);
    if (pretrain->parsed()) return cmd_pretrain_encoder(cli, sim, real, out);
    if (bank->parsed()) return cmd_stylebank(cli, real, n, out);
    if (select->parsed())
      return cmd_select_style(cli, nst_ckpt, detector_ckpt, probe, out);
    if (generate->parsed())
      return cmd_generate(cli, input, mapping, gan_ckpt, nst_ckpt, out);
    if (augment->parsed())
      return cmd_augment(cli, real, sim, ratio, mapping, gan_ckpt, nst_ckpt, out);
    if (train_det->parsed()) return cmd_train_detector(cli, input, out, resume);
    if (eval->parsed())
      return cmd_eval(cli, detector_ckpt, detections_path, test, out);
    if (matrix->parsed())
      return cmd_matrix(cli, sim, real, test, gan_ckpt, nst_ckpt, out);
    if (render->parsed())
      return cmd_render(cli, input, labels, detections_path, frame_id, out);
  } catch (const nsm::Error& e) {
    std::cerr << "NSM_ERROR kind=" << kind_name(e.kind()) << " msg=" << e.what()
              << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "NSM_ERROR kind=internal msg=" << e.what() << "\n";
    return static_cast<int>(nsm::ErrorKind::internal);
  }
  return 0;
}
