#include "srender/config.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <zlib.h>

#include "srender/error.hpp"

namespace srender {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{"epochs_const", "epochs_decay",      "lr0",           "beta1",
                                          "beta2",        "batch_size",        "lambda_fm",     "lambda_rec",
                                          "lambda_str",   "perceptual_layers", "stroke_layers", "seed",
                                          "profile",      "checkpoint_every",  "max_steps",     "augment"};
  return keys;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Drops a trailing comment, ignoring '#' inside quotes.
std::string strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quote != 0) {
      if (ch == '\\' && quote == '"') {
        ++i;
      } else if (ch == quote) {
        quote = 0;
      }
    } else if (ch == '"' || ch == '\'') {
      quote = ch;
    } else if (ch == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

// TOML scalar/array text to JSON text: literal strings become basic strings
// and digit separators are removed.
std::string toml_to_json_text(const std::string& value) {
  std::string out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const char ch = value[i];
    if (ch == '"') {
      const std::size_t start = i++;
      while (i < value.size() && value[i] != '"') {
        if (value[i] == '\\') ++i;
        ++i;
      }
      out.append(value, start, i - start + 1);
    } else if (ch == '\'') {
      std::size_t end = value.find('\'', i + 1);
      if (end == std::string::npos) end = value.size();
      out += json(value.substr(i + 1, end - i - 1)).dump();
      i = end;
    } else if (ch == '_' && i > 0 && i + 1 < value.size() && std::isdigit(static_cast<unsigned char>(value[i - 1])) &&
               std::isdigit(static_cast<unsigned char>(value[i + 1]))) {
      continue;
    } else {
      out += ch;
    }
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected) {
  throw Error(Errc::ParseError, "key '" + key + "' expects " + expected);
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) bad_value(key, "an integer");
  return v.get<int>();
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "a number");
  return v.get<double>();
}

void apply(TrainConfig& cfg, const std::string& key, const json& v) {
  if (!known_keys().contains(key)) throw Error(Errc::UnknownKey, "unknown config key '" + key + "'");
  if (key == "epochs_const") {
    cfg.epochs_const = as_int(key, v);
  } else if (key == "epochs_decay") {
    cfg.epochs_decay = as_int(key, v);
  } else if (key == "lr0") {
    cfg.lr0 = as_double(key, v);
  } else if (key == "beta1") {
    cfg.beta1 = as_double(key, v);
  } else if (key == "beta2") {
    cfg.beta2 = as_double(key, v);
  } else if (key == "batch_size") {
    cfg.batch_size = as_int(key, v);
  } else if (key == "lambda_fm") {
    cfg.weights.lambda_fm = as_double(key, v);
  } else if (key == "lambda_rec") {
    cfg.weights.lambda_rec = as_double(key, v);
  } else if (key == "lambda_str") {
    cfg.weights.lambda_str = as_double(key, v);
  } else if (key == "perceptual_layers") {
    if (!v.is_array()) bad_value(key, "an array of integers");
    cfg.layers.perceptual.clear();
    for (const json& e : v) cfg.layers.perceptual.push_back(as_int(key, e));
  } else if (key == "stroke_layers") {
    if (!v.is_array()) bad_value(key, "an array of strings");
    cfg.layers.stroke.clear();
    for (const json& e : v) {
      if (!e.is_string()) bad_value(key, "an array of strings");
      cfg.layers.stroke.push_back(e.get<std::string>());
    }
  } else if (key == "seed") {
    if (!v.is_number_unsigned()) bad_value(key, "a nonnegative integer");
    cfg.seed = v.get<std::uint64_t>();
  } else if (key == "profile") {
    if (!v.is_string()) bad_value(key, "a string");
    cfg.profile = v.get<std::string>();
  } else if (key == "checkpoint_every") {
    cfg.checkpoint_every = as_int(key, v);
  } else if (key == "max_steps") {
    if (!v.is_number_integer()) bad_value(key, "an integer");
    cfg.max_steps = v.get<long>();
  } else if (key == "augment") {
    if (!v.is_boolean()) bad_value(key, "true or false");
    cfg.augment = v.get<bool>();
  }
}

std::string toml_value(const json& v) {
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_value(v[i]);
    return out + "]";
  }
  return v.dump();
}

}  // namespace

TrainConfig parse_config(std::string_view text, const std::string& source) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::ParseError, where + ": expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty() || value.empty()) throw Error(Errc::ParseError, where + ": expected 'key = value'");
    if (!seen.insert(key).second) throw Error(Errc::ParseError, where + ": duplicate key '" + key + "'");
    json parsed;
    try {
      parsed = json::parse(toml_to_json_text(value));
    } catch (const json::exception&) {
      throw Error(Errc::ParseError, where + ": cannot parse value '" + value + "'");
    }
    try {
      apply(cfg, key, parsed);
    } catch (const Error& e) {
      const std::string message = e.what();
      throw Error(e.code(), where + ": " + message.substr(message.find(": ") + 2));
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  return json{{"epochs_const", cfg.epochs_const},
              {"epochs_decay", cfg.epochs_decay},
              {"lr0", cfg.lr0},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"batch_size", cfg.batch_size},
              {"lambda_fm", cfg.weights.lambda_fm},
              {"lambda_rec", cfg.weights.lambda_rec},
              {"lambda_str", cfg.weights.lambda_str},
              {"perceptual_layers", cfg.layers.perceptual},
              {"stroke_layers", cfg.layers.stroke},
              {"seed", cfg.seed},
              {"profile", cfg.profile},
              {"checkpoint_every", cfg.checkpoint_every},
              {"max_steps", cfg.max_steps},
              {"augment", cfg.augment}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ParseError, "config must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) apply(cfg, key, value);
  cfg.validate();
  return cfg;
}

std::string config_to_text(const TrainConfig& cfg) {
  const json j = config_to_json(cfg);
  std::string out;
  for (auto it = j.begin(); it != j.end(); ++it) out += it.key() + " = " + toml_value(it.value()) + "\n";
  return out;
}

nlohmann::json RunManifest::to_json() const {
  return json{{"command", command},   {"config", config},
              {"data", data},         {"operator_fingerprint", operator_fingerprint},
              {"seed", seed},         {"code_version", code_version},
              {"started_at", started_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.data = j.at("data");
    m.operator_fingerprint = j.at("operator_fingerprint").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.code_version = j.at("code_version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("malformed run manifest: ") + e.what());
  }
}

bool RunManifest::same_run(const RunManifest& other) const {
  json a = to_json();
  json b = other.to_json();
  a.erase("started_at");
  b.erase("started_at");
  return a == b;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path write_run_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string stem = "run_manifest_" + manifest.command;
  fs::path path = dir / (stem + ".json");
  for (int n = 1; fs::exists(path); ++n) path = dir / (stem + "." + std::to_string(n) + ".json");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out << manifest.to_json().dump(2) << "\n";
    if (!out) throw Error(Errc::Io, "short write to " + path.string());
  }
  fs::permissions(path, fs::perms::owner_read | fs::perms::group_read | fs::perms::others_read);
  return path;
}

RunManifest read_run_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return RunManifest::from_json(j);
}

std::string content_hash(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  auto feed = [](uLong crc, std::string_view bytes) {
    return ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  };
  auto feed_file = [&](uLong crc, const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + file.string());
    std::vector<char> buf(1 << 16);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      crc = feed(crc, std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
    return crc;
  };
  uLong crc = ::crc32(0L, Z_NULL, 0);
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      crc = feed(crc, fs::relative(f, path).generic_string());
      crc = feed_file(crc, f);
    }
  } else {
    crc = feed_file(crc, path);
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace srender
