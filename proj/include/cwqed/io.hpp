#pragma once

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cwqed/core.hpp"

namespace cwqed::io {

struct config_error : error {
  using error::error;
};
struct cache_corrupt : error {
  using error::error;
};

enum class KeyType { real, integer, text };

struct KeySpec {
  KeyType type;
  std::string default_value;
  bool physics;
  std::string help;
};

// Documented configuration keys. Physics keys enter the cache hash.
inline const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> s = {
      {"beta", {KeyType::real, "0.05", true, "guided-mode decay fraction, 0 <= beta <= 1"}},
      {"atoms", {KeyType::integer, "", true, "number of atoms M (alternative to od)"}},
      {"od", {KeyType::real, "", true, "optical depth 4 beta M, rounded to the nearest M"}},
      {"atoms_min", {KeyType::integer, "1", true, "first M of a scan"}},
      {"atoms_max", {KeyType::integer, "8", true, "last M of a scan"}},
      {"p_in", {KeyType::real, "0.02", true, "input photon flux in units of Gamma_tot"}},
      {"theta", {KeyType::real, "0", true, "quadrature angle"}},
      {"order", {KeyType::text, "tree+loop", true, "tree | tree+loop"}},
      {"observable", {KeyType::text, "g3c", true, "g3c | cumulant3 | g3 | phi3"}},
      {"extent", {KeyType::real, "3", true, "half width of the (eta, zeta) grid"}},
      {"points", {KeyType::integer, "61", true, "points per axis of the (eta, zeta) grid"}},
      {"time_max", {KeyType::real, "5", true, "upper end of the verification time grid"}},
      {"time_points", {KeyType::integer, "50", true, "points per axis of the verification time grid"}},
      {"n_max", {KeyType::integer, "4", true, "excitation cutoff of the master equation"}},
      {"window", {KeyType::real, "3", true, "count-rate integration window"}},
      {"tol_cumulant", {KeyType::real, "", false, "cumulant error threshold (default by p_in)"}},
      {"tol_g3c", {KeyType::real, "", false, "g3c error threshold (default by p_in)"}},
      {"output", {KeyType::text, "out", false, "output path prefix"}},
      {"cache_dir", {KeyType::text, "", false, "cache directory (overrides CWQED_CACHE_DIR)"}},
  };
  return s;
}

class RunConfig {
 public:
  RunConfig() = default;

  void set(const std::string& key, const std::string& value) {
    const auto it = schema().find(key);
    if (it == schema().end()) throw config_error("unknown key '" + key + "'");
    check_type(key, it->second.type, value);
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) || !spec(key).default_value.empty(); }

  std::string text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const auto& d = spec(key).default_value;
    if (d.empty()) throw config_error("missing value for '" + key + "'");
    return d;
  }
  double real(const std::string& key) const { return std::stod(text(key)); }
  int integer(const std::string& key) const { return std::stoi(text(key)); }
  std::optional<double> real_opt(const std::string& key) const {
    return has(key) ? std::optional<double>(real(key)) : std::nullopt;
  }

  // Explicitly set keys only, in key order.
  const std::map<std::string, std::string>& values() const { return values_; }

  // All physics keys with defaults filled in, in key order.
  nlohmann::ordered_json physics() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, s] : schema())
      if (s.physics && has(k)) j[k] = text(k);
    return j;
  }

 private:
  static const KeySpec& spec(const std::string& key) {
    const auto it = schema().find(key);
    if (it == schema().end()) throw config_error("unknown key '" + key + "'");
    return it->second;
  }

  static void check_type(const std::string& key, KeyType t, const std::string& v) {
    if (t == KeyType::text) {
      if (v.empty()) throw config_error("empty value for '" + key + "'");
      return;
    }
    const char* b = v.data();
    const char* e = v.data() + v.size();
    std::from_chars_result r;
    if (t == KeyType::real) {
      double x;
      r = std::from_chars(b, e, x);
      if (r.ec == std::errc() && r.ptr == e && !std::isfinite(x)) throw config_error("non-finite value for '" + key + "'");
    } else {
      long x;
      r = std::from_chars(b, e, x);
    }
    if (r.ec != std::errc() || r.ptr != e || v.empty())
      throw config_error("malformed " + std::string(t == KeyType::real ? "number" : "integer") + " for '" + key + "': '" +
                         v + "'");
  }

  std::map<std::string, std::string> values_;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::pair<std::string, std::string> split_assignment(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw config_error("expected key=value, got '" + line + "'");
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

// key=value lines; '#' starts a comment.
inline void parse_config(std::istream& in, RunConfig& cfg) {
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    try {
      const auto [k, v] = split_assignment(line);
      cfg.set(k, v);
    } catch (const config_error& e) {
      throw config_error("line " + std::to_string(n) + ": " + e.what());
    }
  }
}

inline RunConfig load_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw config_error("cannot open config file " + p.string());
  RunConfig cfg;
  parse_config(in, cfg);
  return cfg;
}

// Round-trip exact decimal form (17 significant digits).
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string sha256_hex(const void* data, std::size_t n) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned len = 0;
  if (EVP_Digest(data, n, md.data(), &len, EVP_sha256(), nullptr) != 1) throw error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

inline constexpr int cache_version = 1;
inline constexpr const char* cache_magic = "CWQEDCACHE";

struct CacheEntry {
  nlohmann::ordered_json meta;
  std::vector<double> payload;
};

// Versioned binary cache: "CWQEDCACHE <version>\n", one JSON metadata line,
// then little-endian IEEE doubles. Metadata carries the payload checksum.
class Cache {
 public:
  explicit Cache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::filesystem::path default_dir(const RunConfig& cfg) {
    const auto it = cfg.values().find("cache_dir");
    if (it != cfg.values().end()) return it->second;
    if (const char* e = std::getenv("CWQED_CACHE_DIR"); e && *e) return e;
    return ".cwqed-cache";
  }

  static std::string key(const std::string& command, const nlohmann::ordered_json& physics) {
    nlohmann::ordered_json j;
    j["version"] = cache_version;
    j["command"] = command;
    j["physics"] = physics;
    return sha256_hex(j.dump());
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& key) const { return dir_ / (key + ".bin"); }

  static std::vector<unsigned char> encode(const std::vector<double>& v) {
    std::vector<unsigned char> b(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint64_t u = std::bit_cast<std::uint64_t>(v[i]);
      for (int k = 0; k < 8; ++k) b[8 * i + k] = static_cast<unsigned char>(u >> (8 * k));
    }
    return b;
  }

  static std::vector<double> decode(const std::vector<unsigned char>& b) {
    if (b.size() % 8) throw cache_corrupt("payload size is not a multiple of 8");
    std::vector<double> v(b.size() / 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint64_t u = 0;
      for (int k = 0; k < 8; ++k) u |= std::uint64_t(b[8 * i + k]) << (8 * k);
      v[i] = std::bit_cast<double>(u);
    }
    return v;
  }

  void store(const std::string& key, nlohmann::ordered_json meta, const std::vector<double>& payload) const {
    std::filesystem::create_directories(dir_);
    const auto bytes = encode(payload);
    meta["key"] = key;
    meta["count"] = payload.size();
    meta["sha256"] = sha256_hex(bytes.data(), bytes.size());
    const auto tmp = dir_ / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw error("cannot write cache file " + tmp.string());
      out << cache_magic << ' ' << cache_version << '\n' << meta.dump() << '\n';
      out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
      if (!out) throw error("cache write failed " + tmp.string());
    }
    std::filesystem::rename(tmp, path(key));
  }

  static CacheEntry read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw cache_corrupt("cannot open " + p.string());
    std::string header, metaline;
    std::getline(in, header);
    if (header != std::string(cache_magic) + " " + std::to_string(cache_version))
      throw cache_corrupt("version mismatch in " + p.string());
    std::getline(in, metaline);
    CacheEntry e;
    try {
      e.meta = nlohmann::ordered_json::parse(metaline);
    } catch (const nlohmann::json::exception&) {
      throw cache_corrupt("bad metadata in " + p.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!e.meta.contains("sha256") || !e.meta.contains("count")) throw cache_corrupt("incomplete metadata in " + p.string());
    if (bytes.size() != 8 * e.meta["count"].get<std::size_t>()) throw cache_corrupt("truncated payload in " + p.string());
    if (sha256_hex(bytes.data(), bytes.size()) != e.meta["sha256"].get<std::string>())
      throw cache_corrupt("checksum mismatch in " + p.string());
    e.payload = decode(bytes);
    return e;
  }

  // nullopt on miss; corrupt entries are removed and reported as a miss.
  std::optional<CacheEntry> load(const std::string& key, std::string* diagnostic = nullptr) const {
    const auto p = path(key);
    if (!std::filesystem::exists(p)) return std::nullopt;
    try {
      return read_file(p);
    } catch (const cache_corrupt& e) {
      if (diagnostic) *diagnostic = e.what();
      std::error_code ec;
      std::filesystem::remove(p, ec);
      return std::nullopt;
    }
  }

  struct GcReport {
    int kept = 0, removed = 0;
  };

  // Removes corrupt, stale-version and leftover temporary entries; with all=true removes everything.
  GcReport collect(bool all = false) const {
    GcReport r;
    if (!std::filesystem::exists(dir_)) return r;
    for (const auto& de : std::filesystem::directory_iterator(dir_)) {
      const auto ext = de.path().extension();
      if (ext != ".bin" && ext != ".tmp") continue;
      bool drop = all || ext == ".tmp";
      if (!drop) {
        try {
          read_file(de.path());
        } catch (const cache_corrupt&) {
          drop = true;
        }
      }
      if (drop) {
        std::filesystem::remove(de.path());
        ++r.removed;
      } else {
        ++r.kept;
      }
    }
    return r;
  }

 private:
  std::filesystem::path dir_;
};

// CSV: '# key: value' metadata lines, a header row, then data rows.
inline void write_csv(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
                      const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw precondition_violation("CSV row width mismatch");
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << '\n';
  }
}

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto c = line.find(':');
      if (c != std::string::npos) t.meta[trim(line.substr(1, c - 1))] = trim(line.substr(c + 1));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(std::stod(c));
    t.rows.push_back(std::move(r));
  }
  return t;
}

// Compact single-line JSON; numbers use the shortest round-trip form.
inline std::string json_line(const nlohmann::ordered_json& j) { return j.dump(); }

// Write via a temporary file and rename.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot write " + tmp.string());
    out << content;
    if (!out) throw error("write failed " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace cwqed::io
