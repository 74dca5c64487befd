#include "srender/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "srender/checkpoint.hpp"
#include "srender/error.hpp"

namespace srender {

namespace {

constexpr std::uint64_t kPsiInitStream = 0x707369;

void check_finite(const LossBreakdown& b, const char* phase) {
  const std::pair<const char*, double> terms[] = {{"adv_d", b.adv_d}, {"adv_g", b.adv_g}, {"fm", b.fm},
                                                  {"rec", b.rec},     {"stroke", b.stroke}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s produced non-finite %s (adv_d=%g adv_g=%g fm=%g rec=%g stroke=%g)", phase,
                    name, b.adv_d, b.adv_g, b.fm, b.rec, b.stroke);
      throw Error(Errc::NonFiniteLoss, buf);
    }
  }
}

Var batch_mean(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return affine(acc, 1.0 / static_cast<double>(terms.size()), 0.0);
}

int argmax(const Tensor& logits) {
  return static_cast<int>(std::max_element(logits.values().begin(), logits.values().end()) - logits.values().begin());
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs_const < 0 || epochs_decay < 0) throw Error(Errc::BadConfig, "epoch counts must be nonnegative");
  if (!(lr0 > 0.0)) throw Error(Errc::BadConfig, "lr0 must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(Errc::BadConfig, "Adam betas must lie in [0,1)");
  }
  if (batch_size < 1) throw Error(Errc::BadConfig, "batch_size must be at least 1");
  if (checkpoint_every < 1) throw Error(Errc::BadConfig, "checkpoint_every must be at least 1");
  if (max_steps < 0) throw Error(Errc::BadConfig, "max_steps must be nonnegative");
  weights.validate();
  layers.validate();
  profile_by_name(profile);
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.total_epochs()) {
    throw Error(Errc::EpochOutOfRange, "epoch " + std::to_string(epoch) + " outside [1, " +
                                           std::to_string(cfg.total_epochs()) + "]");
  }
  if (epoch <= cfg.epochs_const) return cfg.lr0;
  return cfg.lr0 * (1.0 - static_cast<double>(epoch - cfg.epochs_const) / cfg.epochs_decay);
}

std::optional<StrokeLabel> stroke_label_of(Region region) noexcept {
  if (region == Region::background) return std::nullopt;
  return static_cast<StrokeLabel>(static_cast<int>(region) - 1);
}

SemanticMask::SemanticMask(int rows, int cols, Region fill)
    : rows_(rows), cols_(cols), labels_(static_cast<std::size_t>(rows) * cols, static_cast<std::uint8_t>(fill)) {
  if (rows <= 0 || cols <= 0) throw Error(Errc::BadShape, "mask must be nonempty");
}

std::size_t SemanticMask::index(int r, int c) const {
  if (r < 0 || c < 0 || r >= rows_ || c >= cols_) throw Error(Errc::OutOfBounds, "mask index out of range");
  return static_cast<std::size_t>(r) * cols_ + c;
}

SemanticMask SemanticMask::from_gray_levels(const std::vector<std::uint8_t>& levels, int rows, int cols) {
  if (levels.size() != static_cast<std::size_t>(rows) * cols) throw Error(Errc::BadShape, "mask size mismatch");
  SemanticMask m(rows, cols);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] >= kRegions) throw Error(Errc::InvalidImage, "mask value " + std::to_string(levels[i]) + " is not a region id");
    m.labels_[i] = levels[i];
  }
  return m;
}

SemanticMask read_mask_png(const std::filesystem::path& path) {
  const Image img = read_png(path, DomainTag::sketch);
  if (img.channels() != 1) throw Error(Errc::InvalidImage, "mask " + path.string() + " must be grayscale");
  std::vector<std::uint8_t> levels(static_cast<std::size_t>(img.rows()) * img.cols());
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c)
      levels[static_cast<std::size_t>(r) * img.cols() + c] = static_cast<std::uint8_t>(std::lround(img.at(0, r, c) * 255.0));
  return SemanticMask::from_gray_levels(levels, img.rows(), img.cols());
}

void write_mask_png(const SemanticMask& mask, const std::filesystem::path& path) {
  Tensor px = Tensor::chw(1, mask.rows(), mask.cols());
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) px.at(0, r, c) = static_cast<int>(mask.at(r, c)) / 255.0;
  write_png(Image(std::move(px), DomainTag::sketch), path);
}

PatchExtraction extract_stroke_patches(const Image& sketch, const SemanticMask& mask, const PatchExtractConfig& cfg,
                                       Rng& rng) {
  if (mask.rows() != sketch.rows() || mask.cols() != sketch.cols()) {
    throw Error(Errc::ShapeMismatch, "mask and sketch differ in size");
  }
  if (cfg.patch_size < 1 || cfg.per_class < 0 || !(cfg.purity > 0.0 && cfg.purity <= 1.0)) {
    throw Error(Errc::BadConfig, "invalid patch extraction settings");
  }
  const int p = cfg.patch_size;
  const int rows = mask.rows(), cols = mask.cols();
  PatchExtraction out;
  if (p > rows || p > cols) {
    for (int k = 0; k < kStrokeClasses; ++k) out.empty_classes.push_back(static_cast<StrokeLabel>(k));
    return out;
  }
  const Image gray = to_grayscale(sketch);
  // Summed-area table per region.
  const std::size_t stride = static_cast<std::size_t>(cols) + 1;
  std::vector<std::vector<int>> sat(kRegions, std::vector<int>(stride * (rows + 1), 0));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int here = static_cast<int>(mask.at(r, c));
      for (int k = 0; k < kRegions; ++k) {
        auto& s = sat[static_cast<std::size_t>(k)];
        s[(r + 1) * stride + c + 1] = s[r * stride + c + 1] + s[(r + 1) * stride + c] - s[r * stride + c] + (k == here);
      }
    }
  const double need = cfg.purity * p * p;
  for (int k = 0; k < kStrokeClasses; ++k) {
    const auto& s = sat[static_cast<std::size_t>(k + 1)];
    std::vector<std::pair<int, int>> windows;
    for (int t = 0; t + p <= rows; ++t)
      for (int l = 0; l + p <= cols; ++l) {
        const int count = s[(t + p) * stride + l + p] - s[t * stride + l + p] - s[(t + p) * stride + l] + s[t * stride + l];
        if (count >= need) windows.emplace_back(t, l);
      }
    if (windows.empty()) {
      out.empty_classes.push_back(static_cast<StrokeLabel>(k));
      continue;
    }
    const std::size_t take = std::min(windows.size(), static_cast<std::size_t>(cfg.per_class));
    for (std::size_t i = 0; i < take; ++i) std::swap(windows[i], windows[i + rng.below(windows.size() - i)]);
    for (std::size_t i = 0; i < take; ++i) {
      const auto [t, l] = windows[i];
      out.patches.push_back(StrokePatch{crop(gray, t, l, p, p), static_cast<StrokeLabel>(k), t, l});
    }
  }
  return out;
}

StrokePatchDataset split_patches(std::vector<StrokePatch> patches, double held_out_fraction, Rng& rng) {
  if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) {
    throw Error(Errc::BadConfig, "held_out_fraction must lie in [0,1)");
  }
  std::vector<std::vector<StrokePatch>> by_class(kStrokeClasses);
  for (StrokePatch& p : patches) by_class[static_cast<std::size_t>(p.label)].push_back(std::move(p));
  StrokePatchDataset ds;
  for (auto& group : by_class) {
    rng.shuffle(std::span<StrokePatch>(group));
    auto hold = static_cast<std::size_t>(std::lround(held_out_fraction * static_cast<double>(group.size())));
    if (hold == 0 && held_out_fraction > 0.0 && group.size() >= 2) hold = 1;
    for (std::size_t i = 0; i < group.size(); ++i) (i < hold ? ds.held_out : ds.train).push_back(std::move(group[i]));
  }
  return ds;
}

double stroke_accuracy(StrokeClassifier& psi, std::span<const StrokePatch> patches) {
  if (patches.empty()) return 0.0;
  std::size_t hits = 0;
  for (const StrokePatch& p : patches) {
    Tape tape;
    const Tensor& logits = psi.forward(tape, tape.constant_ref(p.patch.pixels()), false).logits.value();
    hits += argmax(logits) == static_cast<int>(p.label);
  }
  return static_cast<double>(hits) / static_cast<double>(patches.size());
}

StrokeTrainResult train_stroke_classifier(const StrokePatchDataset& ds, const StrokeClassifierSpec& spec,
                                          const StrokeTrainConfig& cfg) {
  std::vector<bool> seen(kStrokeClasses, false);
  for (const StrokePatch& p : ds.train) seen[static_cast<std::size_t>(p.label)] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw Error(Errc::DegenerateDataset, "stroke classifier needs at least two classes");
  }
  for (const auto* split : {&ds.train, &ds.held_out})
    for (const StrokePatch& p : *split) {
      if (p.patch.rows() != spec.patch_size || p.patch.cols() != spec.patch_size || p.patch.channels() != 1) {
        throw Error(Errc::BadShape, "stroke patch is not " + std::to_string(spec.patch_size) + "x" +
                                        std::to_string(spec.patch_size) + " grayscale");
      }
    }
  if (cfg.epochs < 0 || !(cfg.lr > 0.0)) throw Error(Errc::BadConfig, "invalid stroke training settings");

  Rng init(cfg.seed, kPsiInitStream);
  StrokeTrainResult result{StrokeClassifier(spec, init, "psi"), 0.0, 0.0};
  StrokeClassifier& psi = result.psi;
  Adam opt(cfg.beta1, cfg.beta2);
  const std::vector<Parameter*> params = psi.parameters();
  std::vector<std::size_t> order(ds.train.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const StrokePatch& p = ds.train[i];
      zero_grads(params);
      Tape tape;
      const Var logits = psi.forward(tape, tape.constant_ref(p.patch.pixels()), true).logits;
      const Var loss = softmax_cross_entropy(logits, static_cast<int>(p.label));
      if (!std::isfinite(loss.value()[0])) throw Error(Errc::NonFiniteLoss, "stroke classifier loss is not finite");
      tape.backward(loss);
      opt.step(params, cfg.lr);
    }
  }
  psi.freeze();
  result.train_accuracy = stroke_accuracy(psi, ds.train);
  result.held_out_accuracy = stroke_accuracy(psi, ds.held_out);
  return result;
}

TrainingSample to_sample(const PseudoPair& pair) {
  return TrainingSample{to_grayscale(pair.z).pixels(), to_grayscale(pair.y).pixels()};
}

double discriminator_step(ModelBundle& bundle, std::span<const TrainingSample> batch, double lr) {
  if (batch.empty()) throw Error(Errc::EmptySet, "empty batch");
  const std::vector<Parameter*> params = bundle.discriminator_parameters();
  zero_grads(params);
  Tape tape;
  std::vector<Var> terms;
  for (const TrainingSample& s : batch) {
    const Var z = tape.constant_ref(s.z);
    const Var fake = tape.constant(bundle.g.forward(s.z));
    terms.push_back(adv_loss_d(tape, bundle.d1, bundle.d2, z, tape.constant_ref(s.y), fake));
  }
  const Var loss = batch_mean(terms);
  LossBreakdown b;
  b.adv_d = loss.value()[0];
  check_finite(b, "discriminator step");
  tape.backward(loss);
  bundle.d_opt.step(params, lr);
  return b.adv_d;
}

LossBreakdown generator_step(ModelBundle& bundle, std::span<const TrainingSample> batch, const TrainConfig& cfg,
                             double lr) {
  if (batch.empty()) throw Error(Errc::EmptySet, "empty batch");
  if (!bundle.psi.frozen()) throw Error(Errc::PsiNotFrozen, "stroke classifier must be frozen during GAN training");
  const std::vector<Parameter*> params = bundle.g.parameters();
  zero_grads(params);
  Tape tape;
  std::vector<Var> adv, fm, rec, str;
  for (const TrainingSample& s : batch) {
    const Var z = tape.constant_ref(s.z);
    const Var real = tape.constant_ref(s.y);
    const Var fake = bundle.g.forward(tape, z, true);
    adv.push_back(adv_loss_g(tape, bundle.d1, bundle.d2, z, fake));
    fm.push_back(fm_loss(tape, bundle.d1, bundle.d2, z, real, fake));
    rec.push_back(rec_loss(tape, bundle.phi, real, fake, cfg.layers));
    if (cfg.weights.lambda_str > 0.0) {
      str.push_back(stroke_loss(tape, bundle.psi, real, fake, cfg.layers));
    } else {
      str.push_back(tape.constant(Tensor(fm.back().value().dims(), 0.0)));
    }
  }
  const Var a = batch_mean(adv), f = batch_mean(fm), r = batch_mean(rec), s = batch_mean(str);
  LossBreakdown b;
  b.adv_g = a.value()[0];
  b.fm = f.value()[0];
  b.rec = r.value()[0];
  b.stroke = s.value()[0];
  b.total_g = total_g_loss(LossComponents{b.adv_g, b.fm, b.rec, b.stroke}, cfg.weights);
  check_finite(b, "generator step");
  tape.backward(total_g_loss(a, f, r, s, cfg.weights));
  bundle.g_opt.step(params, lr);
  return b;
}

LossBreakdown train_step(ModelBundle& bundle, std::span<const PseudoPair> batch, const TrainConfig& cfg) {
  const double lr = lr_at(bundle.epoch + 1, cfg);
  std::vector<TrainingSample> samples;
  for (const PseudoPair& p : batch) samples.push_back(to_sample(p));
  const double adv_d = discriminator_step(bundle, samples, lr);
  LossBreakdown b = generator_step(bundle, samples, cfg, lr);
  b.adv_d = adv_d;
  return b;
}

std::string format_log_row(const LossLogRow& row) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", row.epoch, row.step,
                row.loss.adv_d, row.loss.adv_g, row.loss.fm, row.loss.rec, row.loss.stroke, row.loss.total_g, row.lr);
  return buf;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04d.ckpt", epoch);
  return dir / name;
}

TrainResult train(std::span<const PseudoPair> pairs, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (pairs.empty()) throw Error(Errc::EmptySet, "no training pairs");
  const Profile profile = profile_by_name(cfg.profile);
  TrainResult result{ModelBundle::create(profile, cfg.seed, cfg.beta1, cfg.beta2), {}, 0};
  ModelBundle& bundle = result.bundle;
  if (options.psi != nullptr) {
    if (spec_fingerprint(options.psi->spec().to_json()) != spec_fingerprint(profile.stroke.to_json())) {
      throw Error(Errc::FingerprintMismatch, "stroke classifier was built for a different profile");
    }
    bundle.psi = *options.psi;
    bundle.psi.freeze();
  } else if (cfg.weights.lambda_str > 0.0) {
    throw Error(Errc::BadConfig, "lambda_str > 0 needs a trained stroke classifier");
  }
  for (const PseudoPair& p : pairs) {
    const bool ok = cfg.augment ? p.y.rows() == p.y.cols() && p.y.rows() >= profile.augment.crop_to
                                : p.y.rows() == profile.image_size && p.y.cols() == profile.image_size;
    if (!ok || p.z.rows() != p.y.rows() || p.z.cols() != p.y.cols()) {
      throw Error(Errc::BadShape, "pair " + p.source_id + " does not fit the " + profile.name + " profile");
    }
  }

  const bool persist = !options.checkpoint_dir.empty();
  const std::filesystem::path log_path = options.checkpoint_dir / "loss_log.csv";
  const std::filesystem::path latest = options.checkpoint_dir / "latest.ckpt";
  long skip = 0;
  std::ofstream log;
  if (persist) {
    std::filesystem::create_directories(options.checkpoint_dir);
    std::vector<std::string> kept;
    if (options.resume && std::filesystem::exists(latest)) {
      const CheckpointInfo info = load_checkpoint(latest, bundle);
      result.global_step = info.global_step;
      skip = info.step_in_epoch;
      std::ifstream old(log_path);
      std::string line;
      std::getline(old, line);
      while (static_cast<long>(kept.size()) < info.global_step && std::getline(old, line)) kept.push_back(line);
    }
    log.open(log_path, std::ios::trunc);
    if (!log) throw Error(Errc::Io, "cannot write " + log_path.string());
    log << kLossLogHeader << '\n';
    for (const std::string& line : kept) log << line << '\n';
    log.flush();
  }

  const std::size_t n = pairs.size();
  const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch_size - 1) / batch_size);
  std::vector<std::size_t> order(n);
  for (int epoch = bundle.epoch + 1; epoch <= cfg.total_epochs(); ++epoch) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (long step = 0; step < steps_per_epoch; ++step) {
      std::vector<PseudoPair> batch;
      for (std::size_t i = static_cast<std::size_t>(step) * batch_size; i < std::min(n, (step + 1) * batch_size); ++i) {
        const PseudoPair& src = pairs[order[i]];
        if (!cfg.augment) {
          batch.push_back(src);
          continue;
        }
        const AugmentDraw draw = draw_augment(profile.augment, rng);
        if (step < skip) continue;
        batch.push_back(PseudoPair{apply_augment(src.z, profile.augment, draw),
                                   apply_augment(src.y, profile.augment, draw), src.source_id,
                                   src.operator_fingerprint});
      }
      if (step < skip) continue;
      LossLogRow row;
      row.epoch = epoch;
      row.lr = lr_at(epoch, cfg);
      row.loss = train_step(bundle, batch, cfg);
      row.step = ++result.global_step;
      result.log.push_back(row);
      if (persist) log << format_log_row(row) << '\n' << std::flush;
      if (options.on_step) options.on_step(row);
      if (cfg.max_steps > 0 && result.global_step >= cfg.max_steps) {
        const bool epoch_done = step + 1 == steps_per_epoch;
        if (epoch_done) bundle.epoch = epoch;
        if (persist) save_checkpoint(latest, bundle, result.global_step, epoch_done ? 0 : step + 1);
        return result;
      }
    }
    skip = 0;
    bundle.epoch = epoch;
    if (persist) {
      save_checkpoint(latest, bundle, result.global_step);
      if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.total_epochs()) {
        std::filesystem::copy_file(latest, checkpoint_path(options.checkpoint_dir, epoch),
                                   std::filesystem::copy_options::overwrite_existing);
      }
    }
  }
  return result;
}

}  // namespace srender
