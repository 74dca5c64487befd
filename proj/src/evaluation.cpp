#include "srender/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "srender/config.hpp"
#include "srender/error.hpp"
#include "srender/layers.hpp"

namespace srender {

namespace {

using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint64_t kEmbedderSeed = 0xfeed5eed;
constexpr std::uint64_t kSplitStream = 0xab1a7e;

MatrixXd to_matrix(std::span<const std::vector<double>> rows, Eigen::Index dim) {
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != dim) {
      throw Error(Errc::DimensionMismatch, "feature vectors have different lengths");
    }
    m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const VectorXd>(rows[i].data(), dim);
  }
  return m;
}

void mean_and_covariance(const MatrixXd& x, VectorXd& mu, MatrixXd& cov) {
  mu = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - mu.transpose();
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  cov = (centered.transpose() * centered) / denom;
  cov.diagonal().array() += kFidJitter;
}

MatrixXd sqrt_psd(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

VectorXd flatten_gray(const Image& image) {
  const Image gray = to_grayscale(image);
  const Tensor& px = gray.pixels();
  return Eigen::Map<const VectorXd>(px.data(), static_cast<Eigen::Index>(px.size()));
}

// Magnitude-weighted unsigned gradient orientation histogram per block, from
// central differences with replicated borders.
struct BlockStats {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> hist;
};

std::vector<BlockStats> block_stats(const Tensor& g, const ScootConfig& cfg) {
  const int rows = g.rows(), cols = g.cols();
  std::vector<BlockStats> out(static_cast<std::size_t>(cfg.grid) * cfg.grid);
  for (int bi = 0; bi < cfg.grid; ++bi) {
    for (int bj = 0; bj < cfg.grid; ++bj) {
      const int r0 = bi * rows / cfg.grid, r1 = (bi + 1) * rows / cfg.grid;
      const int c0 = bj * cols / cfg.grid, c1 = (bj + 1) * cols / cfg.grid;
      BlockStats& s = out[static_cast<std::size_t>(bi) * cfg.grid + bj];
      s.hist.assign(static_cast<std::size_t>(cfg.orientation_bins), 0.0);
      double sum = 0.0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) sum += g.at(0, r, c);
      }
      const double count = static_cast<double>((r1 - r0) * (c1 - c0));
      s.mean = sum / count;
      double var = 0.0, total = 0.0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          const double d = g.at(0, r, c) - s.mean;
          var += d * d;
          const double gx = 0.5 * (g.at(0, r, std::min(c + 1, cols - 1)) - g.at(0, r, std::max(c - 1, 0)));
          const double gy = 0.5 * (g.at(0, std::min(r + 1, rows - 1), c) - g.at(0, std::max(r - 1, 0), c));
          const double mag = std::hypot(gx, gy);
          if (mag == 0.0) continue;
          double theta = std::atan2(gy, gx);
          if (theta < 0.0) theta += std::numbers::pi;
          int bin = static_cast<int>(theta / std::numbers::pi * cfg.orientation_bins);
          bin = std::clamp(bin, 0, cfg.orientation_bins - 1);
          s.hist[static_cast<std::size_t>(bin)] += mag;
          total += mag;
        }
      }
      s.sd = std::sqrt(var / count);
      if (total > 0.0) {
        for (double& h : s.hist) h /= total;
      }
    }
  }
  return out;
}

Image at_side(const Image& image, int side) {
  const Image gray = to_grayscale(image);
  return gray.rows() == side && gray.cols() == side ? gray : resize_bilinear(gray, side, side);
}

}  // namespace

InferResult infer(ModelBundle& bundle, const LineDrawingOperator& op, const Image& x) {
  const int side = bundle.profile.image_size;
  if (x.rows() != side || x.cols() != side) {
    throw Error(Errc::BadShape, "input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", the " +
                                    bundle.profile.name + " profile expects " + std::to_string(side) + "x" +
                                    std::to_string(side));
  }
  Image line = line_draw(op, x);
  Image sketch(bundle.g.forward(line.pixels()), DomainTag::sketch);
  return InferResult{std::move(line), std::move(sketch)};
}

nlohmann::json PatchSampleConfig::to_json() const {
  return json{{"n_patches", n_patches}, {"patch_size", patch_size}, {"seed", seed}};
}

PatchSampleConfig PatchSampleConfig::from_json(const nlohmann::json& j) {
  try {
    return PatchSampleConfig{j.at("n_patches").get<int>(), j.at("patch_size").get<int>(),
                             j.at("seed").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("malformed sample config: ") + e.what());
  }
}

std::vector<PatchLocation> sample_patch_locations(std::span<const Image> images, const PatchSampleConfig& cfg) {
  if (images.empty()) throw Error(Errc::EmptySet, "no images to sample patches from");
  if (cfg.n_patches < 1 || cfg.patch_size < 1) throw Error(Errc::BadConfig, "patch count and size must be positive");
  std::vector<std::uint64_t> cumulative;
  std::uint64_t total = 0;
  for (const Image& im : images) {
    if (im.rows() < cfg.patch_size || im.cols() < cfg.patch_size) {
      throw Error(Errc::PatchTooLarge, "patch size " + std::to_string(cfg.patch_size) + " exceeds a " +
                                           std::to_string(im.rows()) + "x" + std::to_string(im.cols()) + " image");
    }
    total += static_cast<std::uint64_t>(im.rows() - cfg.patch_size + 1) * (im.cols() - cfg.patch_size + 1);
    cumulative.push_back(total);
  }
  Rng rng(cfg.seed);
  std::vector<PatchLocation> out;
  out.reserve(static_cast<std::size_t>(cfg.n_patches));
  for (int i = 0; i < cfg.n_patches; ++i) {
    const std::uint64_t u = rng.below(total);
    const std::size_t k =
        static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const std::uint64_t local = u - (k == 0 ? 0 : cumulative[k - 1]);
    const std::uint64_t span = static_cast<std::uint64_t>(images[k].cols() - cfg.patch_size + 1);
    out.push_back(PatchLocation{static_cast<int>(k), static_cast<int>(local / span), static_cast<int>(local % span)});
  }
  return out;
}

std::vector<Image> sample_patches(std::span<const Image> images, const PatchSampleConfig& cfg) {
  std::vector<Image> out;
  for (const PatchLocation& loc : sample_patch_locations(images, cfg)) {
    out.push_back(crop(images[static_cast<std::size_t>(loc.image)], loc.row, loc.col, cfg.patch_size, cfg.patch_size));
  }
  return out;
}

FeatureEmbedder FeatureEmbedder::bundled() {
  auto layers = std::make_shared<std::vector<Conv2d>>();
  Rng rng(kEmbedderSeed);
  const int widths[] = {1, 8, 16, 32};
  for (int i = 0; i < 3; ++i) {
    layers->emplace_back("embed." + std::to_string(i), widths[i], widths[i + 1], 3, 2, 1, rng,
                         std::sqrt(2.0 / (9.0 * widths[i])));
  }
  FeatureEmbedder e;
  e.kind_ = EmbedderKind::bundled_fixed;
  e.name_ = "conv3x3s2-8-16-32-gap";
  e.output_dim_ = 32;
  e.fn_ = [layers](const Image& image) {
    Tape tape;
    Var h = tape.constant(to_grayscale(image).pixels());
    for (Conv2d& conv : *layers) h = relu(conv(tape, h, false));
    const Tensor pooled = global_avg_pool(h).value();
    return std::vector<double>(pooled.values().begin(), pooled.values().end());
  };
  return e;
}

FeatureEmbedder FeatureEmbedder::external(std::string name, int output_dim, Fn fn) {
  if (output_dim < 1) throw Error(Errc::BadConfig, "embedder output dimension must be positive");
  FeatureEmbedder e;
  e.kind_ = EmbedderKind::external;
  e.name_ = std::move(name);
  e.output_dim_ = output_dim;
  e.fn_ = std::move(fn);
  return e;
}

std::string FeatureEmbedder::fingerprint() const {
  const std::string kind = kind_ == EmbedderKind::bundled_fixed ? "bundled_fixed" : "external";
  return kind + ":" + name_ + ":" + std::to_string(output_dim_) + ":" +
         crc32_hex(name_ + "/" + std::to_string(kEmbedderSeed));
}

std::vector<double> FeatureEmbedder::operator()(const Image& image) const {
  std::vector<double> v = fn_(image);
  if (static_cast<int>(v.size()) != output_dim_) {
    throw Error(Errc::DimensionMismatch, "embedder returned " + std::to_string(v.size()) + " features, expected " +
                                             std::to_string(output_dim_));
  }
  return v;
}

std::vector<std::vector<double>> FeatureEmbedder::embed_all(std::span<const Image> images) const {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (const Image& im : images) out.push_back((*this)(im));
  return out;
}

double fid(std::span<const std::vector<double>> feats_a, std::span<const std::vector<double>> feats_b) {
  if (feats_a.empty() || feats_b.empty()) throw Error(Errc::EmptySet, "fid needs two nonempty feature sets");
  const Eigen::Index dim = static_cast<Eigen::Index>(feats_a.front().size());
  if (dim == 0) throw Error(Errc::DimensionMismatch, "feature vectors are empty");
  const MatrixXd a = to_matrix(feats_a, dim);
  const MatrixXd b = to_matrix(feats_b, dim);
  VectorXd mu_a, mu_b;
  MatrixXd cov_a, cov_b;
  mean_and_covariance(a, mu_a, cov_a);
  mean_and_covariance(b, mu_b, cov_b);
  const MatrixXd root_a = sqrt_psd(cov_a);
  MatrixXd middle = root_a * cov_b * root_a;
  middle = 0.5 * (middle + middle.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(middle, Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
  return std::max(value, 0.0);
}

double scoot(const Image& a, const Image& b, const ScootConfig& cfg) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch, "scoot needs images of equal size");
  }
  if (cfg.grid < 1 || cfg.grid > std::min(a.rows(), a.cols()) || cfg.orientation_bins < 1) {
    throw Error(Errc::BadConfig, "invalid scoot grid");
  }
  const std::vector<BlockStats> sa = block_stats(to_grayscale(a).pixels(), cfg);
  const std::vector<BlockStats> sb = block_stats(to_grayscale(b).pixels(), cfg);
  double total = 0.0;
  for (std::size_t k = 0; k < sa.size(); ++k) {
    const BlockStats& x = sa[k];
    const BlockStats& y = sb[k];
    const double tone = (2.0 * x.mean * y.mean + cfg.c1) / (x.mean * x.mean + y.mean * y.mean + cfg.c1);
    const double contrast = (2.0 * x.sd * y.sd + cfg.c2) / (x.sd * x.sd + y.sd * y.sd + cfg.c2);
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.hist.size(); ++i) l1 += std::abs(x.hist[i] - y.hist[i]);
    const double texture = 1.0 - 0.5 * l1;
    total += tone * contrast * texture;
  }
  return std::clamp(total / static_cast<double>(sa.size()), 0.0, 1.0);
}

std::string identity_of(const std::string& sample_id) { return sample_id.substr(0, sample_id.find('_')); }

double fisherface_acc(std::span<const LabeledImage> gallery, std::span<const LabeledImage> probes) {
  if (gallery.empty() || probes.empty()) throw Error(Errc::EmptySet, "gallery and probes must be nonempty");
  std::map<std::string, int> class_of;
  for (const LabeledImage& g : gallery) class_of.emplace(g.id, static_cast<int>(class_of.size()));
  const int c = static_cast<int>(class_of.size());
  if (c < 2) throw Error(Errc::TooFewIdentities, "the gallery needs at least two identities");
  for (const LabeledImage& p : probes) {
    if (!class_of.contains(p.id)) throw Error(Errc::UnknownProbeId, "probe id '" + p.id + "' is not in the gallery");
  }
  const int rows = gallery.front().image.rows(), cols = gallery.front().image.cols();
  auto check = [&](const LabeledImage& li) {
    if (li.image.rows() != rows || li.image.cols() != cols) {
      throw Error(Errc::DimensionMismatch, "all gallery and probe images must share one size");
    }
  };
  for (const LabeledImage& g : gallery) check(g);
  for (const LabeledImage& p : probes) check(p);

  const Eigen::Index n = static_cast<Eigen::Index>(gallery.size());
  MatrixXd x(n, static_cast<Eigen::Index>(rows) * cols);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = flatten_gray(gallery[static_cast<std::size_t>(i)].image);
  const VectorXd mu = x.colwise().mean();
  x.rowwise() -= mu.transpose();

  // PCA through the n x n Gram matrix.
  Eigen::SelfAdjointEigenSolver<MatrixXd> gram(x * x.transpose());
  const bool use_lda = n > c;
  const Eigen::Index wanted = use_lda ? n - c : n - 1;
  const double top = gram.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = n - 1; i >= 0 && static_cast<Eigen::Index>(keep.size()) < wanted; --i) {
    if (gram.eigenvalues()(i) > 1e-12 * top) keep.push_back(i);
  }
  if (keep.empty()) {
    // Every gallery image is identical: all probes tie at the first entry.
    double hits = 0.0;
    for (const LabeledImage& p : probes) hits += p.id == gallery.front().id ? 1.0 : 0.0;
    return hits / static_cast<double>(probes.size());
  }
  const Eigen::Index k = static_cast<Eigen::Index>(keep.size());
  MatrixXd pca(x.cols(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index i = keep[static_cast<std::size_t>(j)];
    pca.col(j) = x.transpose() * gram.eigenvectors().col(i) / std::sqrt(gram.eigenvalues()(i));
  }

  MatrixXd projection = pca;
  if (use_lda) {
    const MatrixXd p = x * pca;
    std::vector<int> labels;
    for (const LabeledImage& g : gallery) labels.push_back(class_of.at(g.id));
    MatrixXd means = MatrixXd::Zero(c, k);
    VectorXd counts = VectorXd::Zero(c);
    for (Eigen::Index i = 0; i < n; ++i) {
      means.row(labels[static_cast<std::size_t>(i)]) += p.row(i);
      counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int j = 0; j < c; ++j) means.row(j) /= counts(j);
    MatrixXd within = MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const VectorXd d = (p.row(i) - means.row(labels[static_cast<std::size_t>(i)])).transpose();
      within += d * d.transpose();
    }
    MatrixXd between = MatrixXd::Zero(k, k);
    for (int j = 0; j < c; ++j) between += counts(j) * means.row(j).transpose() * means.row(j);
    const double scale = within.trace() > 0.0 ? within.trace() / static_cast<double>(k) : 1.0;
    within.diagonal().array() += 1e-9 * scale;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> lda(between, within);
    const Eigen::Index dims = std::min<Eigen::Index>(c - 1, k);
    projection = pca * lda.eigenvectors().rightCols(dims);
  }

  MatrixXd embedded(n, projection.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd v = flatten_gray(gallery[static_cast<std::size_t>(i)].image) - mu;
    embedded.row(i) = v.transpose() * projection;
  }
  double hits = 0.0;
  for (const LabeledImage& probe : probes) {
    const VectorXd v = flatten_gray(probe.image) - mu;
    const Eigen::RowVectorXd q = v.transpose() * projection;
    Eigen::Index best = 0;
    (embedded.rowwise() - q).rowwise().squaredNorm().minCoeff(&best);
    if (gallery[static_cast<std::size_t>(best)].id == probe.id) hits += 1.0;
  }
  return hits / static_cast<double>(probes.size());
}

nlohmann::json MetricsReport::to_json() const {
  json j{{"fid", fid},
         {"scoot", scoot ? json(*scoot) : json(nullptr)},
         {"acc", acc ? json(*acc) : json(nullptr)},
         {"sample_config", sample_config.to_json()},
         {"embedder_fingerprint", embedder_fingerprint}};
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  validate_metrics_report(j);
  MetricsReport r;
  r.fid = j.at("fid").get<double>();
  if (!j.at("scoot").is_null()) r.scoot = j.at("scoot").get<double>();
  if (!j.at("acc").is_null()) r.acc = j.at("acc").get<double>();
  r.sample_config = PatchSampleConfig::from_json(j.at("sample_config"));
  r.embedder_fingerprint = j.at("embedder_fingerprint").get<std::string>();
  return r;
}

void validate_metrics_report(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw Error(Errc::ParseError, "metrics report: " + what); };
  if (!j.is_object()) fail("not an object");
  for (const char* key : {"fid", "scoot", "acc", "sample_config", "embedder_fingerprint"}) {
    if (!j.contains(key)) fail(std::string("missing '") + key + "'");
  }
  if (!j["fid"].is_number() || j["fid"].get<double>() < 0.0) fail("fid must be a nonnegative number");
  for (const char* key : {"scoot", "acc"}) {
    const json& v = j[key];
    if (v.is_null()) continue;
    if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
      fail(std::string(key) + " must be null or a number in [0,1]");
    }
  }
  const json& s = j["sample_config"];
  if (!s.is_object()) fail("sample_config must be an object");
  for (const char* key : {"n_patches", "patch_size", "seed"}) {
    if (!s.contains(key) || !s[key].is_number_integer()) fail(std::string("sample_config.") + key + " must be an integer");
  }
  if (!j["embedder_fingerprint"].is_string() || j["embedder_fingerprint"].get<std::string>().empty()) {
    fail("embedder_fingerprint must be a nonempty string");
  }
}

MetricsReport evaluate(std::span<const LabeledImage> real, std::span<const LabeledImage> fake,
                       const PatchSampleConfig& cfg, const FeatureEmbedder& embedder) {
  if (real.empty() || fake.empty()) throw Error(Errc::EmptySet, "evaluation needs real and generated images");
  std::vector<Image> real_images, fake_images;
  for (const LabeledImage& li : real) real_images.push_back(li.image);
  for (const LabeledImage& li : fake) fake_images.push_back(li.image);
  MetricsReport r;
  r.sample_config = cfg;
  r.embedder_fingerprint = embedder.fingerprint();
  const auto feats_real = embedder.embed_all(sample_patches(real_images, cfg));
  const auto feats_fake = embedder.embed_all(sample_patches(fake_images, cfg));
  r.fid = fid(feats_real, feats_fake);

  if (real.size() == fake.size()) {
    bool aligned = true;
    double total = 0.0;
    for (std::size_t i = 0; i < real.size() && aligned; ++i) {
      aligned = real[i].image.rows() == fake[i].image.rows() && real[i].image.cols() == fake[i].image.cols();
      if (aligned) total += scoot(real[i].image, fake[i].image);
    }
    if (aligned) r.scoot = total / static_cast<double>(real.size());
  }

  std::vector<LabeledImage> gallery, probes;
  for (const LabeledImage& li : real) gallery.push_back(LabeledImage{li.image, identity_of(li.id)});
  for (const LabeledImage& li : fake) probes.push_back(LabeledImage{li.image, identity_of(li.id)});
  try {
    r.acc = fisherface_acc(gallery, probes);
  } catch (const Error& e) {
    if (e.code() != Errc::TooFewIdentities && e.code() != Errc::UnknownProbeId &&
        e.code() != Errc::DimensionMismatch) {
      throw;
    }
  }
  return r;
}

std::string_view variant_name(AblationVariant v) noexcept {
  return v == AblationVariant::full ? "full" : "no_stroke";
}

std::string pairs_fingerprint(std::span<const PseudoPair> pairs) {
  std::string bytes;
  for (const PseudoPair& p : pairs) {
    bytes += p.source_id;
    bytes += '\0';
    bytes += p.operator_fingerprint;
    bytes += '\0';
    for (const Image* im : {&p.z, &p.y}) {
      const Tensor& t = im->pixels();
      bytes.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
    }
  }
  return crc32_hex(bytes);
}

std::vector<AblationRow> run_ablation(std::span<const PseudoPair> pairs, const TrainConfig& cfg,
                                      const AblationOptions& options) {
  cfg.validate();
  if (pairs.size() < 2) throw Error(Errc::EmptySet, "ablation needs at least two pairs");
  if (!(options.held_out_fraction > 0.0 && options.held_out_fraction < 1.0)) {
    throw Error(Errc::BadConfig, "held_out_fraction must lie in (0,1)");
  }
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(cfg.seed, kSplitStream);
  split_rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n_held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(options.held_out_fraction * static_cast<double>(pairs.size()))), 1,
      pairs.size() - 1);
  std::vector<PseudoPair> held, train_set;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_held ? held : train_set).push_back(pairs[order[i]]);
  const std::string data_fp = pairs_fingerprint(pairs);
  const FeatureEmbedder embedder = FeatureEmbedder::bundled();

  std::vector<AblationRow> rows;
  for (AblationVariant variant : options.variants) {
    TrainConfig vcfg = cfg;
    if (variant == AblationVariant::no_stroke) vcfg.weights.lambda_str = 0.0;
    TrainOptions topts;
    topts.psi = options.psi;
    if (options.on_step) topts.on_step = [&](const LossLogRow& row) { options.on_step(variant, row); };
    TrainResult trained = train(train_set, vcfg, topts);

    const int side = trained.bundle.profile.image_size;
    std::vector<LabeledImage> real, fake;
    for (const PseudoPair& p : held) {
      real.push_back(LabeledImage{at_side(p.y, side), p.source_id});
      const Tensor sketch = trained.bundle.g.forward(at_side(p.z, side).pixels());
      fake.push_back(LabeledImage{Image(sketch, DomainTag::sketch), p.source_id});
    }
    rows.push_back(AblationRow{variant, config_to_json(vcfg), data_fp,
                               evaluate(real, fake, options.sample, embedder)});
  }
  return rows;
}

nlohmann::json ablation_table(std::span<const AblationRow> rows) {
  json out = json::array();
  for (const AblationRow& r : rows) {
    out.push_back(json{{"variant", variant_name(r.variant)},
                       {"config", r.config},
                       {"data_fingerprint", r.data_fingerprint},
                       {"metrics", r.metrics.to_json()}});
  }
  return out;
}

}  // namespace srender
