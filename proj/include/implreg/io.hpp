#pragma once

// Matrix files and result tables.
//
// FPMX layout, little-endian:
//   bytes 0-3   "FPMX"
//   bytes 4-7   u32 version (1)
//   bytes 8-15  u64 rows
//   bytes 16-23 u64 cols
//   then rows*cols f64 values, row-major.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "implreg/errors.hpp"
#include "implreg/linalg.hpp"

namespace implreg {

static_assert(std::endian::native == std::endian::little, "FPMX I/O assumes a little-endian host");

inline constexpr char kFpmxMagic[4] = {'F', 'P', 'M', 'X'};
inline constexpr std::uint32_t kFpmxVersion = 1;
inline constexpr std::size_t kFpmxHeaderBytes = 24;

inline std::string encode_fpmx(const MatrixXd& m) {
  if (!m.allFinite()) throw InputError("refusing to write non-finite values to FPMX");
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  std::string out(kFpmxHeaderBytes + 8 * rows * cols, '\0');
  char* p = out.data();
  std::memcpy(p, kFpmxMagic, 4);
  std::memcpy(p + 4, &kFpmxVersion, 4);
  std::memcpy(p + 8, &rows, 8);
  std::memcpy(p + 16, &cols, 8);
  p += kFpmxHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j, p += 8) {
      const double v = m(i, j);
      std::memcpy(p, &v, 8);
    }
  return out;
}

inline MatrixXd decode_fpmx(std::string_view bytes) {
  using Unit = ParseError::Unit;
  if (bytes.size() < kFpmxHeaderBytes)
    throw ParseError("FPMX header truncated: expected 24 bytes, got " + std::to_string(bytes.size()),
                     bytes.size(), Unit::byte_offset);
  if (std::memcmp(bytes.data(), kFpmxMagic, 4) != 0) throw ParseError("bad FPMX magic", 0, Unit::byte_offset);
  std::uint32_t version;
  std::uint64_t rows, cols;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  if (version != kFpmxVersion)
    throw ParseError("unsupported FPMX version " + std::to_string(version), 4, Unit::byte_offset);
  const std::uint64_t limit = (std::uint64_t{1} << 60) / 8;
  if (rows > limit || cols > limit || (cols != 0 && rows > limit / cols))
    throw ParseError("FPMX shape overflows", 8, Unit::byte_offset);
  const std::uint64_t expected = kFpmxHeaderBytes + 8 * rows * cols;
  if (bytes.size() != expected)
    throw ParseError("FPMX payload size mismatch: expected " + std::to_string(expected) +
                         " bytes, got " + std::to_string(bytes.size()),
                     std::min<std::uint64_t>(bytes.size(), expected), Unit::byte_offset);
  MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  const char* p = bytes.data() + kFpmxHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j, p += 8) {
      double v;
      std::memcpy(&v, p, 8);
      if (!std::isfinite(v))
        throw ParseError("non-finite FPMX value", static_cast<std::size_t>(p - bytes.data()),
                         Unit::byte_offset);
      m(i, j) = v;
    }
  return m;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path + "'");
  return s;
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("write error on '" + path + "'");
}

inline void save_fpmx(const std::string& path, const MatrixXd& m) { write_file(path, encode_fpmx(m)); }

inline MatrixXd load_fpmx(const std::string& path) { return decode_fpmx(read_file(path)); }

namespace detail {
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}
}  // namespace detail

/// CSV with a header row of column names, ',' separators and '.' decimals.
inline MatrixXd parse_csv(std::string_view text) {
  using Unit = ParseError::Unit;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  bool header = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (header) {
      cols = fields.size();
      header = false;
      continue;
    }
    if (fields.size() != cols)
      throw ParseError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(cols),
                       line_no, Unit::line);
    for (std::string_view f : fields) {
      f = detail::trim(f);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("CSV field '" + std::string(f) + "' is not a number", line_no, Unit::line);
      if (!std::isfinite(v)) throw ParseError("non-finite CSV value", line_no, Unit::line);
      values.push_back(v);
    }
    ++rows;
  }
  if (header) throw ParseError("CSV has no header row", 1, Unit::line);
  MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return m;
}

/// FPMX when the file starts with the magic, CSV otherwise.
inline MatrixXd load_matrix(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kFpmxMagic, 4) == 0) return decode_fpmx(bytes);
  return parse_csv(bytes);
}

// ---------------------------------------------------------------------------

/// 17 significant digits, so every double round-trips; NaN renders as an
/// empty field.
inline std::string format_real(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Table {
  std::vector<std::string> schema;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != schema.size()) throw InputError("table row width does not match schema");
    rows.push_back(std::move(row));
  }
};

inline std::string render_table(const Table& t) {
  if (t.schema.empty()) throw InputError("table schema must be nonempty");
  std::ostringstream os;
  for (std::size_t j = 0; j < t.schema.size(); ++j) os << (j ? "," : "") << t.schema[j];
  os << '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.schema.size()) throw InputError("table row width does not match schema");
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_real(row[j]);
    os << '\n';
  }
  return os.str();
}

inline void emit_table(const Table& t, const std::string& path) { write_file(path, render_table(t)); }

}  // namespace implreg
