#include "srender/line_drawing.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "srender/error.hpp"

namespace srender {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

Image apply_dog(const Image& image, double sigma, double k, double threshold) {
  const Image gray = to_grayscale(image);
  const Tensor fine = gaussian_blur(gray.pixels(), sigma);
  const Tensor coarse = gaussian_blur(gray.pixels(), k * sigma);
  Tensor out(fine.dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double e = fine[i] - coarse[i] + threshold;
    out[i] = e >= 0.0 ? 1.0 : std::clamp(1.0 + std::tanh(e / threshold), 0.0, 1.0);
  }
  return Image(std::move(out), DomainTag::line_drawing);
}

std::string format_param(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string crc32_hex(std::string_view bytes) {
  const uLong crc = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

Tensor gaussian_blur(const Tensor& gray, double sigma) {
  const std::vector<double> kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int rows = gray.rows(), cols = gray.cols();
  Tensor tmp(gray.dims()), out(gray.dims());
  for (int ch = 0; ch < gray.channels(); ++ch) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += kernel[static_cast<std::size_t>(i + radius)] * gray.at(ch, r, std::clamp(c + i, 0, cols - 1));
        tmp.at(ch, r, c) = s;
      }
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(ch, std::clamp(r + i, 0, rows - 1), c);
        out.at(ch, r, c) = s;
      }
  }
  return out;
}

LineDrawingOperator LineDrawingOperator::dog(double sigma, double k, double threshold) {
  if (!(sigma > 0.0)) throw Error(Errc::BadConfig, "dog sigma must be positive");
  if (!(k > 1.0)) throw Error(Errc::BadConfig, "dog k must exceed 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::BadConfig, "dog threshold must lie in (0,1)");
  LineDrawingOperator op;
  op.kind_ = OperatorKind::dog_default;
  op.name_ = "dog";
  op.params_ = {{"sigma", sigma}, {"k", k}, {"threshold", threshold}};
  op.fn_ = [sigma, k, threshold](const Image& img) { return apply_dog(img, sigma, k, threshold); };
  return op;
}

LineDrawingOperator LineDrawingOperator::external(std::string name, Fn fn, std::map<std::string, double> params) {
  if (!fn) throw Error(Errc::UnknownOperator, "external operator '" + name + "' has no implementation");
  LineDrawingOperator op;
  op.kind_ = OperatorKind::external;
  op.name_ = std::move(name);
  op.params_ = std::move(params);
  op.fn_ = std::move(fn);
  return op;
}

LineDrawingOperator LineDrawingOperator::from_name(const std::string& name, const std::map<std::string, double>& params) {
  if (name != "dog" && name != "dog_default") throw Error(Errc::UnknownOperator, "no operator named '" + name + "'");
  auto get = [&](const char* key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  for (const auto& [key, value] : params) {
    if (key != "sigma" && key != "k" && key != "threshold") throw Error(Errc::BadConfig, "dog has no parameter " + key);
  }
  return dog(get("sigma", 1.0), get("k", 1.6), get("threshold", 0.005));
}

double LineDrawingOperator::param(const std::string& key) const {
  const auto it = params_.find(key);
  if (it == params_.end()) throw Error(Errc::BadConfig, "operator has no parameter " + key);
  return it->second;
}

std::string LineDrawingOperator::fingerprint() const {
  std::string canon = name_;
  for (const auto& [key, value] : params_) canon += ";" + key + "=" + format_param(value);
  const char* kind = kind_ == OperatorKind::dog_default ? "dog_default" : "external";
  return std::string(kind) + ":" + name_ + ":" + crc32_hex(canon);
}

Image LineDrawingOperator::operator()(const Image& image) const {
  if (!fn_) throw Error(Errc::UnknownOperator, "operator '" + name_ + "' has no implementation");
  Image out = fn_(image);
  if (out.rows() != image.rows() || out.cols() != image.cols()) {
    throw Error(Errc::ShapeMismatch, "operator '" + name_ + "' changed the spatial size");
  }
  if (out.domain() != DomainTag::line_drawing || out.channels() != 1) {
    out = Image(to_grayscale(out).pixels(), DomainTag::line_drawing);
  }
  return out;
}

Image line_draw(const LineDrawingOperator& op, const Image& image) { return op(image); }

std::vector<PseudoPair> build_pseudo_pairs(const LineDrawingOperator& op, std::span<const Image> sketches,
                                           std::span<const std::string> source_ids) {
  if (!source_ids.empty() && source_ids.size() != sketches.size()) {
    throw Error(Errc::ShapeMismatch, "one source id per sketch required");
  }
  for (const Image& y : sketches) {
    if (y.domain() != DomainTag::sketch) {
      throw Error(Errc::WrongDomainTag, "expected a sketch, got " + std::string(domain_name(y.domain())));
    }
  }
  const std::string fp = op.fingerprint();
  std::vector<PseudoPair> pairs;
  pairs.reserve(sketches.size());
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%06zu", i);
    pairs.push_back(PseudoPair{line_draw(op, sketches[i]), sketches[i],
                               source_ids.empty() ? std::string(id) : source_ids[i], fp});
  }
  return pairs;
}

void write_pair_manifest(const std::filesystem::path& path, std::span<const PairRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write manifest " + path.string());
  for (const PairRecord& r : records) {
    nlohmann::ordered_json j;
    j["source_id"] = r.source_id;
    j["sketch_path"] = r.sketch_path;
    j["line_path"] = r.line_path;
    j["operator_fingerprint"] = r.operator_fingerprint;
    out << j.dump() << '\n';
  }
}

std::vector<PairRecord> read_pair_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + path.string());
  std::vector<PairRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back(PairRecord{j.at("source_id").get<std::string>(), j.at("sketch_path").get<std::string>(),
                                   j.at("line_path").get<std::string>(),
                                   j.at("operator_fingerprint").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<PseudoPair> load_pairs(const std::filesystem::path& manifest, const std::string& expected_fingerprint) {
  const auto base = manifest.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<PseudoPair> pairs;
  for (const PairRecord& r : read_pair_manifest(manifest)) {
    if (!expected_fingerprint.empty() && r.operator_fingerprint != expected_fingerprint) {
      throw Error(Errc::FingerprintMismatch, "pair " + r.source_id + " was built with " + r.operator_fingerprint);
    }
    Image y = read_png(resolve(r.sketch_path), DomainTag::sketch);
    Image z = read_png(resolve(r.line_path), DomainTag::line_drawing);
    if (z.rows() != y.rows() || z.cols() != y.cols()) {
      throw Error(Errc::ShapeMismatch, "pair " + r.source_id + " has mismatched image sizes");
    }
    pairs.push_back(PseudoPair{to_grayscale(z), to_grayscale(y), r.source_id, r.operator_fingerprint});
  }
  return pairs;
}

}  // namespace srender
