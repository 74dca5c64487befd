#include "srender/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "srender/checkpoint.hpp"
#include "srender/config.hpp"
#include "srender/error.hpp"
#include "srender/evaluation.hpp"
#include "srender/synthetic.hpp"

namespace srender {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
  Profile resolved_profile() const { return profile_by_name(profile.value_or("toy_64")); }
};

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::Io, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(Errc::EmptySet, "no .png files in " + dir.string());
  return out;
}

fs::path parent_or_cwd(const fs::path& file) {
  const fs::path p = file.parent_path();
  return p.empty() ? fs::path(".") : p;
}

RunManifest manifest_for(const std::string& command, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.seed = seed;
  m.started_at = utc_timestamp();
  return m;
}

void write_json(const fs::path& path, const json& j) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<PseudoPair> pairs_from_manifest(const fs::path& manifest) {
  std::vector<PseudoPair> pairs = load_pairs(manifest);
  if (pairs.empty()) throw Error(Errc::EmptySet, "manifest " + manifest.string() + " lists no pairs");
  return pairs;
}

TrainConfig resolve_config(const std::string& config_path, const Globals& g) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.profile) cfg.profile = *g.profile;
  cfg.validate();
  return cfg;
}

// ---- commands ---------------------------------------------------------------

struct BuildPairsArgs {
  std::string sketch_dir, out_dir, op = "dog";
  double sigma = 1.0, k = 1.6, threshold = 0.005;
};

void run_build_pairs(const BuildPairsArgs& a, const Globals& g, std::ostream& out) {
  const LineDrawingOperator op =
      LineDrawingOperator::from_name(a.op, {{"sigma", a.sigma}, {"k", a.k}, {"threshold", a.threshold}});
  const std::vector<fs::path> files = list_pngs(a.sketch_dir);
  const fs::path out_dir = a.out_dir;
  RunManifest m = manifest_for("build-pairs", g.seed_or(0));
  m.config = {{"operator", a.op}, {"sigma", a.sigma}, {"k", a.k}, {"threshold", a.threshold}};
  m.data = {{"sketch_dir", content_hash(a.sketch_dir)}};
  m.operator_fingerprint = op.fingerprint();
  write_run_manifest(out_dir, m);

  fs::create_directories(out_dir / "lines");
  std::vector<PairRecord> records;
  for (const fs::path& f : files) {
    const Image sketch = read_png(f, DomainTag::sketch);
    const Image line = op(sketch);
    const fs::path line_rel = fs::path("lines") / f.filename();
    write_png(line, out_dir / line_rel);
    records.push_back(PairRecord{f.stem().string(), fs::absolute(f).lexically_normal().string(), line_rel.string(),
                                 op.fingerprint()});
  }
  write_pair_manifest(out_dir / "pairs.jsonl", records);
  out << "wrote " << records.size() << " pairs to " << (out_dir / "pairs.jsonl").string() << '\n';
}

struct ExtractArgs {
  std::string sketch_dir, mask_dir, out_dir;
  int patch_size = 0;  // 0: the profile's stroke patch size
  int per_class = 200;
  double purity = 0.7;
};

void run_extract_patches(const ExtractArgs& a, const Globals& g, std::ostream& out) {
  const Profile profile = g.resolved_profile();
  PatchExtractConfig cfg{a.patch_size > 0 ? a.patch_size : profile.stroke.patch_size, a.per_class, a.purity};
  RunManifest m = manifest_for("extract-patches", g.seed_or(0));
  m.config = {{"patch_size", cfg.patch_size}, {"per_class", cfg.per_class}, {"purity", cfg.purity},
              {"profile", profile.name}};
  m.data = {{"sketch_dir", content_hash(a.sketch_dir)}, {"mask_dir", content_hash(a.mask_dir)}};
  write_run_manifest(a.out_dir, m);

  Rng rng(g.seed_or(0));
  std::size_t total = 0;
  for (const fs::path& f : list_pngs(a.sketch_dir)) {
    const Image sketch = read_png(f, DomainTag::sketch);
    const SemanticMask mask = read_mask_png(fs::path(a.mask_dir) / f.filename());
    const PatchExtraction ex = extract_stroke_patches(sketch, mask, cfg, rng);
    std::map<StrokeLabel, int> counter;
    for (const StrokePatch& p : ex.patches) {
      const fs::path dir = fs::path(a.out_dir) / std::string(stroke_label_name(p.label));
      fs::create_directories(dir);
      char name[64];
      std::snprintf(name, sizeof name, "_%04d.png", counter[p.label]++);
      write_png(p.patch, dir / (f.stem().string() + name));
      ++total;
    }
  }
  out << "wrote " << total << " patches to " << a.out_dir << '\n';
}

std::vector<StrokePatch> read_patch_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::Io, dir.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<StrokePatch> patches;
  for (const fs::path& cd : class_dirs) {
    const StrokeLabel label = stroke_label_from_name(cd.filename().string());
    for (const fs::path& f : list_pngs(cd)) patches.push_back(StrokePatch{read_png(f, DomainTag::sketch), label, 0, 0});
  }
  if (patches.empty()) throw Error(Errc::EmptySet, "no patches under " + dir.string());
  return patches;
}

struct StrokeNetArgs {
  std::string patches_dir, out;
  int epochs = 8;
  double lr = 1e-3;
  double held_out = 0.2;
};

void run_train_stroke_net(const StrokeNetArgs& a, const Globals& g, std::ostream& out) {
  const Profile profile = g.resolved_profile();
  StrokeTrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.seed = g.seed_or(0);
  RunManifest m = manifest_for("train-stroke-net", cfg.seed);
  m.config = {{"epochs", cfg.epochs}, {"lr", cfg.lr},           {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},   {"held_out", a.held_out}, {"stroke_spec", profile.stroke.to_json()}};
  m.data = {{"patches", content_hash(a.patches_dir)}};
  write_run_manifest(parent_or_cwd(a.out), m);

  Rng split_rng(cfg.seed);
  const StrokePatchDataset ds = split_patches(read_patch_dir(a.patches_dir), a.held_out, split_rng);
  const StrokeTrainResult r = train_stroke_classifier(ds, profile.stroke, cfg);
  save_stroke_classifier(a.out, r.psi,
                         {{"train_accuracy", r.train_accuracy},
                          {"held_out_accuracy", r.held_out_accuracy},
                          {"train_patches", ds.train.size()},
                          {"held_out_patches", ds.held_out.size()}});
  char line[160];
  std::snprintf(line, sizeof line, "train accuracy %.4f, held-out accuracy %.4f\n", r.train_accuracy,
                r.held_out_accuracy);
  out << line;
}

struct TrainArgs {
  std::string pairs, config, out, psi;
  bool resume = false;
  long max_steps = -1;
};

void run_train(const TrainArgs& a, const Globals& g, std::ostream& out) {
  TrainConfig cfg = resolve_config(a.config, g);
  if (a.max_steps >= 0) cfg.max_steps = a.max_steps;
  const std::vector<PseudoPair> pairs = pairs_from_manifest(a.pairs);
  std::optional<StrokeClassifier> psi;
  if (!a.psi.empty()) psi = load_stroke_classifier(a.psi);

  RunManifest m = manifest_for("train", cfg.seed);
  m.config = config_to_json(cfg);
  m.config["resume"] = a.resume;
  m.data = {{"pairs_manifest", content_hash(a.pairs)}, {"pairs", pairs_fingerprint(pairs)}};
  if (!a.psi.empty()) m.data["psi"] = content_hash(a.psi);
  m.operator_fingerprint = pairs.front().operator_fingerprint;
  write_run_manifest(a.out, m);

  TrainOptions opts;
  opts.checkpoint_dir = a.out;
  opts.resume = a.resume;
  opts.psi = psi ? &*psi : nullptr;
  const TrainResult r = train(pairs, cfg, opts);
  out << "trained " << r.log.size() << " steps (global step " << r.global_step << ", epoch " << r.bundle.epoch
      << ") into " << a.out << '\n';
}

struct InferArgs {
  std::string photo, checkpoint, out_line, out_sketch, landmarks;
  double sigma = 1.0, k = 1.6, threshold = 0.005;
};

void run_infer(const InferArgs& a, const Globals& g, std::ostream& out) {
  const fs::path ckpt = fs::is_directory(a.checkpoint) ? fs::path(a.checkpoint) / "latest.ckpt" : fs::path(a.checkpoint);
  const LineDrawingOperator op = LineDrawingOperator::dog(a.sigma, a.k, a.threshold);
  RunManifest m = manifest_for("infer", g.seed_or(0));
  m.config = {{"sigma", a.sigma}, {"k", a.k}, {"threshold", a.threshold}, {"aligned", !a.landmarks.empty()}};
  m.data = {{"photo", content_hash(a.photo)}, {"checkpoint", content_hash(ckpt)}};
  m.operator_fingerprint = op.fingerprint();
  write_run_manifest(parent_or_cwd(a.out_sketch), m);

  ModelBundle bundle = load_bundle(ckpt);
  Image photo = read_png(a.photo, DomainTag::photo);
  if (!a.landmarks.empty()) photo = align_face(photo, read_landmarks(a.landmarks), bundle.profile.image_size);
  const InferResult r = infer(bundle, op, photo);
  for (const std::string& p : {a.out_line, a.out_sketch}) {
    if (!fs::path(p).parent_path().empty()) fs::create_directories(fs::path(p).parent_path());
  }
  write_png(r.line, a.out_line);
  write_png(r.sketch, a.out_sketch);
  out << "wrote " << a.out_line << " and " << a.out_sketch << '\n';
}

struct EvalArgs {
  std::string real, fake, metrics = "fid,scoot,acc", out;
  int patches = 10000, patch_size = 256;
};

std::vector<LabeledImage> labeled_dir(const fs::path& dir) {
  std::vector<LabeledImage> out;
  for (const fs::path& f : list_pngs(dir)) out.push_back(LabeledImage{read_png(f, DomainTag::sketch), f.stem().string()});
  return out;
}

void run_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  std::set<std::string> wanted;
  std::stringstream list(a.metrics);
  for (std::string item; std::getline(list, item, ',');) {
    if (item != "fid" && item != "scoot" && item != "acc") throw CLI::ValidationError("--metrics", "unknown metric " + item);
    wanted.insert(item);
  }
  const PatchSampleConfig sample{a.patches, a.patch_size, g.seed_or(0)};
  const FeatureEmbedder embedder = FeatureEmbedder::bundled();
  RunManifest m = manifest_for("eval", sample.seed);
  m.config = {{"metrics", a.metrics}, {"sample_config", sample.to_json()}, {"embedder", embedder.fingerprint()}};
  m.data = {{"real", content_hash(a.real)}, {"fake", content_hash(a.fake)}};
  write_run_manifest(parent_or_cwd(a.out), m);

  std::vector<LabeledImage> real = labeled_dir(a.real);
  std::vector<LabeledImage> fake = labeled_dir(a.fake);
  // Align fakes to reals by file name so scoot and recognition compare matching images.
  std::map<std::string, const LabeledImage*> by_id;
  for (const LabeledImage& f : fake) by_id[f.id] = &f;
  std::vector<LabeledImage> aligned;
  for (const LabeledImage& r : real) {
    if (auto it = by_id.find(r.id); it != by_id.end()) aligned.push_back(*it->second);
  }
  if (aligned.size() == real.size()) fake = std::move(aligned);
  MetricsReport report = evaluate(real, fake, sample, embedder);
  if (!wanted.contains("scoot")) report.scoot.reset();
  if (!wanted.contains("acc")) report.acc.reset();
  const json j = report.to_json();
  validate_metrics_report(j);
  write_json(a.out, j);
  out << j.dump() << '\n';
}

struct AblateArgs {
  std::string pairs, config, psi, out;
  int patches = 1000, patch_size = 32;
  double held_out = 0.2;
  long max_steps = -1;
};

void run_ablate(const AblateArgs& a, const Globals& g, std::ostream& out) {
  TrainConfig cfg = resolve_config(a.config, g);
  if (a.max_steps >= 0) cfg.max_steps = a.max_steps;
  const std::vector<PseudoPair> pairs = pairs_from_manifest(a.pairs);
  std::optional<StrokeClassifier> psi;
  if (!a.psi.empty()) psi = load_stroke_classifier(a.psi);
  AblationOptions opts;
  opts.held_out_fraction = a.held_out;
  opts.sample = PatchSampleConfig{a.patches, a.patch_size, cfg.seed};
  opts.psi = psi ? &*psi : nullptr;

  RunManifest m = manifest_for("ablate", cfg.seed);
  m.config = config_to_json(cfg);
  m.config["held_out"] = a.held_out;
  m.config["sample_config"] = opts.sample.to_json();
  m.data = {{"pairs_manifest", content_hash(a.pairs)}, {"pairs", pairs_fingerprint(pairs)}};
  if (!a.psi.empty()) m.data["psi"] = content_hash(a.psi);
  m.operator_fingerprint = pairs.front().operator_fingerprint;
  write_run_manifest(a.out, m);

  const std::vector<AblationRow> rows = run_ablation(pairs, cfg, opts);
  const json table = ablation_table(rows);
  write_json(fs::path(a.out) / "ablation.json", table);
  for (const AblationRow& r : rows) {
    char line[200];
    std::snprintf(line, sizeof line, "%-10s fid %.4f  scoot %s  acc %s\n", std::string(variant_name(r.variant)).c_str(),
                  r.metrics.fid, r.metrics.scoot ? std::to_string(*r.metrics.scoot).c_str() : "-",
                  r.metrics.acc ? std::to_string(*r.metrics.acc).c_str() : "-");
    out << line;
  }
}

struct SyntheticArgs {
  std::string out;
  int identities = 6, per_identity = 4, size = 0, textures = 0;
};

void run_make_synthetic(const SyntheticArgs& a, const Globals& g, std::ostream& out) {
  const Profile profile = g.resolved_profile();
  const int size = a.size > 0 ? a.size : profile.augment.resize_to;
  const std::uint64_t seed = g.seed_or(0);
  RunManifest m = manifest_for("make-synthetic", seed);
  m.config = {{"identities", a.identities}, {"per_identity", a.per_identity}, {"size", size},
              {"textures", a.textures},     {"profile", profile.name}};
  write_run_manifest(a.out, m);

  const fs::path root = a.out;
  for (const char* sub : {"sketches", "masks", "landmarks"}) fs::create_directories(root / sub);
  const std::vector<SyntheticFace> faces = synthetic_faces(a.identities, a.per_identity, size, seed);
  for (const SyntheticFace& f : faces) {
    write_png(f.sketch, root / "sketches" / (f.id + ".png"));
    write_mask_png(f.mask, root / "masks" / (f.id + ".png"));
    write_landmarks(f.landmarks, root / "landmarks" / (f.id + ".json"));
  }
  std::size_t n_textures = 0;
  if (a.textures > 0) {
    std::map<StrokeLabel, int> counter;
    for (const StrokePatch& p : texture_dataset(a.textures, profile.stroke.patch_size, seed)) {
      const fs::path dir = root / "textures" / std::string(stroke_label_name(p.label));
      fs::create_directories(dir);
      char name[32];
      std::snprintf(name, sizeof name, "%04d.png", counter[p.label]++);
      write_png(p.patch, dir / name);
      ++n_textures;
    }
  }
  out << "wrote " << faces.size() << " faces and " << n_textures << " texture patches to " << a.out << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sketch rendering: pseudo pairs, training, inference and evaluation", "srender"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  std::string profile;
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Run seed (overrides the config file)");
  CLI::Option* profile_opt = app.add_option("--profile", profile, "Network profile")
                                 ->check(CLI::IsMember({"paper_512", "toy_64", "micro_8"}));

  BuildPairsArgs bp;
  CLI::App* c_bp = app.add_subcommand("build-pairs", "Line-draw every sketch and write a pair manifest");
  c_bp->add_option("--sketch-dir", bp.sketch_dir, "Directory of sketch PNGs")->required();
  c_bp->add_option("--out-dir", bp.out_dir, "Output directory")->required();
  c_bp->add_option("--operator", bp.op, "Line-drawing operator")->capture_default_str();
  c_bp->add_option("--sigma", bp.sigma)->capture_default_str();
  c_bp->add_option("--k", bp.k)->capture_default_str();
  c_bp->add_option("--threshold", bp.threshold)->capture_default_str();

  ExtractArgs ex;
  CLI::App* c_ex = app.add_subcommand("extract-patches", "Cut labelled stroke patches from sketches and masks");
  c_ex->add_option("--sketch-dir", ex.sketch_dir)->required();
  c_ex->add_option("--mask-dir", ex.mask_dir, "Masks named like the sketches")->required();
  c_ex->add_option("--out", ex.out_dir, "Output directory, one folder per label")->required();
  c_ex->add_option("--patch-size", ex.patch_size, "Default: the profile's stroke patch size");
  c_ex->add_option("--per-class", ex.per_class)->capture_default_str();
  c_ex->add_option("--purity", ex.purity)->capture_default_str();

  StrokeNetArgs sn;
  CLI::App* c_sn = app.add_subcommand("train-stroke-net", "Train the stroke classifier on labelled patches");
  c_sn->add_option("--patches", sn.patches_dir, "Directory with one folder per stroke label")->required();
  c_sn->add_option("--out", sn.out, "Classifier archive to write")->required();
  c_sn->add_option("--epochs", sn.epochs)->capture_default_str();
  c_sn->add_option("--lr", sn.lr)->capture_default_str();
  c_sn->add_option("--held-out", sn.held_out)->capture_default_str();

  TrainArgs tr;
  CLI::App* c_tr = app.add_subcommand("train", "Train the sketch generator on pseudo pairs");
  c_tr->add_option("--pairs", tr.pairs, "Pair manifest (JSON lines)")->required();
  c_tr->add_option("--config", tr.config, "Config file; absent keys keep the defaults");
  c_tr->add_option("--out", tr.out, "Checkpoint and log directory")->required();
  c_tr->add_option("--psi", tr.psi, "Trained stroke classifier archive");
  c_tr->add_option("--max-steps", tr.max_steps, "Stop after this many steps");
  c_tr->add_flag("--resume", tr.resume, "Continue from <out>/latest.ckpt");

  InferArgs in;
  CLI::App* c_in = app.add_subcommand("infer", "Render a photo as a sketch");
  c_in->add_option("--photo", in.photo)->required();
  c_in->add_option("--checkpoint", in.checkpoint, "Checkpoint file or training directory")->required();
  c_in->add_option("--out-line", in.out_line)->required();
  c_in->add_option("--out-sketch", in.out_sketch)->required();
  c_in->add_option("--landmarks", in.landmarks, "Eye landmarks JSON; aligns the photo first");
  c_in->add_option("--sigma", in.sigma)->capture_default_str();
  c_in->add_option("--k", in.k)->capture_default_str();
  c_in->add_option("--threshold", in.threshold)->capture_default_str();

  EvalArgs ev;
  CLI::App* c_ev = app.add_subcommand("eval", "Compare generated sketches with real ones");
  c_ev->add_option("--real", ev.real)->required();
  c_ev->add_option("--fake", ev.fake)->required();
  c_ev->add_option("--metrics", ev.metrics, "Comma-separated subset of fid,scoot,acc")->capture_default_str();
  c_ev->add_option("--patches", ev.patches)->capture_default_str();
  c_ev->add_option("--patch-size", ev.patch_size)->capture_default_str();
  c_ev->add_option("--out", ev.out, "Report JSON")->required();

  AblateArgs ab;
  CLI::App* c_ab = app.add_subcommand("ablate", "Train with and without the stroke loss and compare");
  c_ab->add_option("--pairs", ab.pairs)->required();
  c_ab->add_option("--config", ab.config);
  c_ab->add_option("--psi", ab.psi);
  c_ab->add_option("--out", ab.out)->required();
  c_ab->add_option("--patches", ab.patches)->capture_default_str();
  c_ab->add_option("--patch-size", ab.patch_size)->capture_default_str();
  c_ab->add_option("--held-out", ab.held_out)->capture_default_str();
  c_ab->add_option("--max-steps", ab.max_steps, "Steps per variant");

  SyntheticArgs sy;
  CLI::App* c_sy = app.add_subcommand("make-synthetic", "Write procedural face sketches, masks and textures");
  c_sy->add_option("--out", sy.out)->required();
  c_sy->add_option("--identities", sy.identities)->capture_default_str();
  c_sy->add_option("--per-identity", sy.per_identity)->capture_default_str();
  c_sy->add_option("--size", sy.size, "Image side; default: the profile's pre-crop size");
  c_sy->add_option("--textures", sy.textures, "Texture patches per class (0 = none)")->capture_default_str();

  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--seed" || args[i] == "--profile") {
      ++i;
    } else if (!args[i].empty() && args[i][0] != '-') {
      if (app.get_subcommand_no_throw(args[i]) == nullptr) {
        err << "srender: unknown command '" << args[i] << "'\n" << app.help();
        return kExitUsage;
      }
      break;
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "srender: " << e.what() << '\n' << sub->help();
    return kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;
  if (profile_opt->count() > 0) g.profile = profile;

  try {
    if (c_bp->parsed()) run_build_pairs(bp, g, out);
    if (c_ex->parsed()) run_extract_patches(ex, g, out);
    if (c_sn->parsed()) run_train_stroke_net(sn, g, out);
    if (c_tr->parsed()) run_train(tr, g, out);
    if (c_in->parsed()) run_infer(in, g, out);
    if (c_ev->parsed()) run_eval(ev, g, out);
    if (c_ab->parsed()) run_ablate(ab, g, out);
    if (c_sy->parsed()) run_make_synthetic(sy, g, out);
  } catch (const CLI::ValidationError& e) {
    err << "srender: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "srender: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace srender
