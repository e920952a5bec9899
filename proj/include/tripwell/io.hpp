#ifndef TRIPWELL_IO_HPP
#define TRIPWELL_IO_HPP

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "tripwell/dynamics.hpp"
#include "tripwell/scans.hpp"

namespace tripwell {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Full-precision (17 significant digits) decimal text; inf/nan spelled out.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& values) {
    if (values.size() != header_.size()) throw std::invalid_argument("CSV row width mismatch");
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    rows_.push_back(std::move(cells));
  }
  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw std::invalid_argument("CSV row width mismatch");
    rows_.push_back(std::move(cells));
  }

  std::size_t rows() const { return rows_.size(); }

  void write(std::ostream& os) const {
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Axis columns followed by the payload and any extra columns, row-major.
inline CsvTable scan_to_csv(const ScanResult& r) {
  std::vector<std::string> header;
  for (const auto& a : r.grid.axes) header.push_back(a.name);
  header.push_back(r.payload_name);
  for (const auto& [name, _] : r.extra_columns) header.push_back(name);
  CsvTable t(header);
  for (std::size_t k = 0; k < r.payload.size(); ++k) {
    std::vector<double> row = r.grid.point(k);
    row.push_back(r.payload[k]);
    for (const auto& [_, col] : r.extra_columns) row.push_back(col[k]);
    t.add_row(row);
  }
  return t;
}

inline nlohmann::json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

inline nlohmann::json grid_to_json(const GridSpec& g) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : g.axes) {
    axes.push_back({{"name", a.name}, {"start", a.start}, {"end", a.end}, {"count", a.count},
                    {"include_end", a.include_end}});
  }
  return axes;
}

inline nlohmann::json scan_summary(const ScanResult& r) {
  nlohmann::json j;
  j["payload"] = r.payload_name;
  j["grid"] = grid_to_json(r.grid);
  j["metadata"] = r.metadata;
  j["guarded_outcomes"] = {{"points", r.guarded.points}, {"min", r.guarded.min},
                           {"max", r.guarded.max}, {"total", r.guarded.total}};
  if (r.argmin) {
    nlohmann::json loc = nlohmann::json::object();
    const auto p = r.grid.point(*r.argmin);
    for (std::size_t d = 0; d < p.size(); ++d) loc[r.grid.axes[d].name] = p[d];
    j["argmin"] = {{"index", *r.argmin}, {"location", loc}, {"value", r.min_value()}};
  } else {
    j["argmin"] = nullptr;
  }
  return j;
}

inline CsvTable trajectory_to_csv(const Trajectory& tr) {
  CsvTable t({"t", "J", "Fid0", "Fid1", "Fid2", "norm_drift"});
  for (const auto& s : tr.samples) t.add_row({s.t, s.J, s.fid[0], s.fid[1], s.fid[2], s.norm_drift});
  return t;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// SHA-256 of the bytes, hex encoded with a "sha256:" prefix.
inline std::string content_hash(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "sha256:";
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace tripwell

#endif  // TRIPWELL_IO_HPP
