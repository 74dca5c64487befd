#include "srender/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "srender/error.hpp"

namespace srender {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

std::uint32_t crc_of(const std::vector<char>& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

using Named = std::vector<std::pair<std::string, const Tensor*>>;

void add_params(Named& out, const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) out.emplace_back(p->name, &p->value);
}

void add_optimizer(Named& out, const std::string& prefix, const Adam& opt) {
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    out.emplace_back(prefix + ".m." + std::to_string(i), &opt.first_moments()[i]);
    out.emplace_back(prefix + ".v." + std::to_string(i), &opt.second_moments()[i]);
  }
}

nlohmann::json optimizer_json(const Adam& opt) {
  return {{"steps", opt.steps()},
          {"beta1", opt.beta1()},
          {"beta2", opt.beta2()},
          {"buffers", opt.first_moments().size()}};
}

const Tensor& take(const Archive& a, const std::string& name, const std::vector<int>& dims) {
  const auto it = a.tensors.find(name);
  if (it == a.tensors.end()) throw Error(Errc::FingerprintMismatch, "checkpoint lacks tensor " + name);
  if (it->second.dims() != dims) {
    throw Error(Errc::FingerprintMismatch, "checkpoint tensor " + name + " has shape " + it->second.shape_string());
  }
  return it->second;
}

void restore_params(const Archive& a, const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    p->value = take(a, p->name, p->value.dims());
    p->grad = Tensor(p->value.dims());
  }
}

void restore_optimizer(const Archive& a, const std::string& prefix, const nlohmann::json& meta, Adam& opt,
                       const std::vector<Parameter*>& params) {
  opt = Adam(meta.at("beta1").get<double>(), meta.at("beta2").get<double>());
  opt.set_steps(meta.at("steps").get<long>());
  const auto n = meta.at("buffers").get<std::size_t>();
  if (n != 0 && n != params.size()) throw Error(Errc::FingerprintMismatch, prefix + " optimizer size differs");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& dims = params[i]->value.dims();
    opt.first_moments().push_back(take(a, prefix + ".m." + std::to_string(i), dims));
    opt.second_moments().push_back(take(a, prefix + ".v." + std::to_string(i), dims));
  }
}

std::vector<Parameter*> params_of(const StrokeClassifier& psi) {
  return const_cast<StrokeClassifier&>(psi).parameters();
}

}  // namespace

void write_archive(const std::filesystem::path& path, nlohmann::json header, const Named& tensors) {
  std::vector<char> payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    table.push_back({{"name", name}, {"dims", t->dims()}});
    const auto* bytes = reinterpret_cast<const char*>(t->data());
    payload.insert(payload.end(), bytes, bytes + t->size() * sizeof(double));
  }
  header["tensors"] = std::move(table);
  header["payload_bytes"] = payload.size();
  header["payload_crc32"] = crc_of(payload);
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || len > (1u << 30)) {
    throw Error(Errc::ChecksumMismatch, path.string() + " is not a checkpoint archive");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  Archive a;
  try {
    a.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::ChecksumMismatch, path.string() + " has a corrupt header");
  }
  const auto bytes = a.header.at("payload_bytes").get<std::size_t>();
  std::vector<char> payload(bytes);
  in.read(payload.data(), static_cast<std::streamsize>(bytes));
  if (!in || in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::ChecksumMismatch, path.string() + " payload has the wrong length");
  }
  if (crc_of(payload) != a.header.at("payload_crc32").get<std::uint32_t>()) {
    throw Error(Errc::ChecksumMismatch, path.string() + " payload checksum mismatch");
  }
  std::size_t offset = 0;
  for (const auto& entry : a.header.at("tensors")) {
    Tensor t(entry.at("dims").get<std::vector<int>>());
    const std::size_t n = t.size() * sizeof(double);
    if (offset + n > payload.size()) throw Error(Errc::ChecksumMismatch, "tensor table overruns payload");
    std::memcpy(t.data(), payload.data() + offset, n);
    offset += n;
    a.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return a;
}

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle, long global_step,
                     long step_in_epoch) {
  auto& b = const_cast<ModelBundle&>(bundle);
  Named named;
  add_params(named, b.g.parameters());
  add_params(named, b.discriminator_parameters());
  add_params(named, b.psi.parameters());
  add_params(named, b.phi.mutable_parameters());
  add_optimizer(named, "opt.g", b.g_opt);
  add_optimizer(named, "opt.d", b.d_opt);
  nlohmann::json header = {{"kind", "model_bundle"},
                           {"fingerprints", bundle.fingerprints()},
                           {"epoch", bundle.epoch},
                           {"step_in_epoch", step_in_epoch},
                           {"global_step", global_step},
                           {"psi_frozen", bundle.psi.frozen()},
                           {"optimizer_state_version", kOptimizerStateVersion},
                           {"optimizers", {{"g", optimizer_json(b.g_opt)}, {"d", optimizer_json(b.d_opt)}}}};
  write_archive(path, std::move(header), named);
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, ModelBundle& bundle) {
  const Archive a = read_archive(path);
  const nlohmann::json& h = a.header;
  if (h.value("kind", "") != "model_bundle") throw Error(Errc::FingerprintMismatch, "not a model checkpoint");
  if (h.at("fingerprints") != bundle.fingerprints()) {
    throw Error(Errc::FingerprintMismatch, "checkpoint architecture " + h.at("fingerprints").dump() +
                                               " does not match " + bundle.fingerprints().dump());
  }
  if (h.at("optimizer_state_version").get<int>() != kOptimizerStateVersion) {
    throw Error(Errc::FingerprintMismatch, "unsupported optimizer state version");
  }
  restore_params(a, bundle.g.parameters());
  restore_params(a, bundle.discriminator_parameters());
  restore_params(a, bundle.psi.parameters());
  restore_params(a, bundle.phi.mutable_parameters());
  restore_optimizer(a, "opt.g", h.at("optimizers").at("g"), bundle.g_opt, bundle.g.parameters());
  restore_optimizer(a, "opt.d", h.at("optimizers").at("d"), bundle.d_opt, bundle.discriminator_parameters());
  if (h.at("psi_frozen").get<bool>()) bundle.psi.freeze();
  bundle.epoch = h.at("epoch").get<int>();
  return CheckpointInfo{h.at("fingerprints"), bundle.epoch, h.at("step_in_epoch").get<long>(),
                        h.at("global_step").get<long>()};
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  if (a.header.value("kind", "") != "model_bundle") throw Error(Errc::FingerprintMismatch, "not a model checkpoint");
  ModelBundle bundle = ModelBundle::create(profile_by_name(a.header.at("fingerprints").at("profile").get<std::string>()), 0);
  load_checkpoint(path, bundle);
  return bundle;
}

void save_stroke_classifier(const std::filesystem::path& path, const StrokeClassifier& psi,
                            const nlohmann::json& metrics) {
  Named named;
  add_params(named, params_of(psi));
  nlohmann::json header = {{"kind", "stroke_classifier"},
                           {"spec", psi.spec().to_json()},
                           {"fingerprint", spec_fingerprint(psi.spec().to_json())},
                           {"metrics", metrics}};
  write_archive(path, std::move(header), named);
}

StrokeClassifier load_stroke_classifier(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const nlohmann::json& h = a.header;
  if (h.value("kind", "") != "stroke_classifier") {
    throw Error(Errc::FingerprintMismatch, path.string() + " is not a stroke classifier archive");
  }
  const nlohmann::json& s = h.at("spec");
  StrokeClassifierSpec spec{s.at("patch_size").get<int>(),   s.at("stem_channels").get<int>(),
                            s.at("dense_layers").get<int>(), s.at("growth").get<int>(),
                            s.at("out_channels").get<int>(), s.at("kernel").get<int>()};
  if (spec_fingerprint(spec.to_json()) != h.at("fingerprint").get<std::string>()) {
    throw Error(Errc::FingerprintMismatch, "stroke classifier spec does not match its fingerprint");
  }
  Rng rng(0);
  StrokeClassifier psi(spec, rng, "psi");
  restore_params(a, psi.parameters());
  psi.freeze();
  return psi;
}

}  // namespace srender
