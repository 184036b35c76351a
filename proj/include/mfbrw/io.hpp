#pragma once

// CSV / JSON emission. Every file starts with a provenance line carrying the
// artifact version and config hash; wall-clock time only goes to the manifest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfbrw/error.hpp"

#ifndef MFBRW_VERSION
#define MFBRW_VERSION "1.0.0"
#endif

namespace mfbrw {

inline constexpr const char* kVersion = MFBRW_VERSION;
inline constexpr const char* kSchema = "mfbrw/1";

using json = nlohmann::json;

inline std::string hex64(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// 17 significant digits, '.' decimal, fixed spellings for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17) << x;
  return s.str();
}

struct Provenance {
  std::string config_hash;
  std::string version = kVersion;
};

/// Row-oriented CSV writer; cells are preformatted strings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvTable& add(double x) { return cell(format_double(x)); }
  CsvTable& add(std::int64_t x) { return cell(std::to_string(x)); }
  CsvTable& add(std::uint64_t x) { return cell(std::to_string(x)); }
  CsvTable& add(int x) { return cell(std::to_string(x)); }
  CsvTable& add(bool x) { return cell(x ? "1" : "0"); }
  CsvTable& add(const std::string& x) { return cell(x); }
  CsvTable& add(const char* x) { return cell(x); }

  std::size_t rows() const noexcept { return rows_.size(); }

  std::string str(const Provenance& p) const {
    std::ostringstream out;
    out << "# " << kSchema << " version=" << p.version << " config=" << p.config_hash << '\n';
    line(out, header_);
    for (const auto& r : rows_) {
      if (r.size() != header_.size()) throw Error(Errc::invalid_argument, "csv row width differs from header");
      line(out, r);
    }
    return out.str();
  }

 private:
  CsvTable& cell(std::string s) {
    if (rows_.empty()) throw Error(Errc::invalid_argument, "csv cell before first row");
    rows_.back().push_back(std::move(s));
    return *this;
  }
  static void line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::config, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(Errc::config, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::config, "cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// Non-finite doubles become null; JSON has no inf.
inline json json_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// ---- summary schema -------------------------------------------------------------

/// Validates a spectrum summary against the mfbrw/1 layout; returns the list of
/// violations (empty when valid).
inline std::vector<std::string> validate_summary(const json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) return {"summary is not an object"};
  auto need = [&](const json& obj, const std::string& key, auto check, const char* what, const std::string& where) {
    if (!obj.contains(key)) {
      errors.push_back(where + key + ": missing");
    } else if (!check(obj.at(key))) {
      errors.push_back(where + key + ": expected " + what);
    }
  };
  const auto is_num = [](const json& v) { return v.is_number(); };
  const auto is_num_or_null = [](const json& v) { return v.is_number() || v.is_null(); };
  const auto is_str = [](const json& v) { return v.is_string(); };
  const auto is_bool = [](const json& v) { return v.is_boolean(); };
  const auto is_obj = [](const json& v) { return v.is_object(); };

  need(j, "schema", [](const json& v) { return v.is_string() && v.get<std::string>() == kSchema; }, "\"mfbrw/1\"", "");
  need(j, "version", is_str, "string", "");
  need(j, "config_hash", [](const json& v) { return v.is_string() && v.get<std::string>().size() == 16; },
       "16 hex digits", "");
  need(j, "rank", [](const json& v) { return v.is_number_integer() && v.get<int>() >= 2; }, "integer >= 2", "");
  need(j, "r", is_num, "number", "");
  need(j, "R", is_num, "number", "");
  need(j, "C_RW", is_num, "number", "");
  need(j, "isotropic", is_bool, "boolean", "");
  need(j, "speed_window", is_obj, "object", "");
  need(j, "alpha_star", is_obj, "object", "");
  need(j, "dim_Lambda", is_num, "number", "");
  need(j, "hypothesis_I", is_obj, "object", "");
  need(j, "files", [](const json& v) { return v.is_array(); }, "array", "");
  if (j.contains("speed_window") && j["speed_window"].is_object()) {
    need(j["speed_window"], "lower", is_num, "number", "speed_window.");
    need(j["speed_window"], "upper", is_num, "number", "speed_window.");
  }
  if (j.contains("alpha_star") && j["alpha_star"].is_object()) {
    for (const char* k : {"alpha", "dim_maximization", "dim_pressure", "dim_fixed_point"}) {
      need(j["alpha_star"], k, is_num, "number", "alpha_star.");
    }
  }
  if (j.contains("hypothesis_I") && j["hypothesis_I"].is_object()) {
    need(j["hypothesis_I"], "max_g", is_num_or_null, "number", "hypothesis_I.");
    need(j["hypothesis_I"], "holds", is_bool, "boolean", "hypothesis_I.");
  }
  const std::vector<std::string> known{"schema", "version", "config_hash", "rank", "r", "R", "C_RW", "isotropic",
                                       "speed_window", "alpha_star", "dim_Lambda", "hypothesis_I", "files", "mu"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) errors.push_back(k + ": unknown key");
  }
  return errors;
}

}  // namespace mfbrw
