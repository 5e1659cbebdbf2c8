#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"

namespace pobs_sl::io {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorCode::IO, "io", "cannot format number");
  return std::string(buf, ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view field, std::size_t line_no, std::string_view column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw Error(ErrorCode::Parse, "io",
                "line " + std::to_string(line_no) + ", column '" + std::string(column) + "': cannot parse '" +
                    std::string(field) + "' as a number");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IO, "io", "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IO, "io", "cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error(ErrorCode::IO, "io", "write to '" + path + "' failed");
}

/// Parsed CSV table: header names and numeric rows, with the file line of each row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;

  std::ptrdiff_t column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  }
};

/// Comma-separated numbers with one header row. Blank lines and lines starting
/// with '#' are skipped.
inline Table parse_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_fields(view);
    if (!have_header) {
      for (auto f : fields) t.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw Error(ErrorCode::Parse, "io",
                  "line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_double(fields[c], line_no, t.header[c]);
    t.rows.push_back(std::move(row));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::Parse, "io", "missing header row");
  return t;
}

/// Covariate columns z1..zd of the header, in index order.
inline std::vector<std::size_t> covariate_columns(const Table& t) {
  std::vector<std::pair<std::size_t, std::size_t>> found;  // (k, column)
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const auto& h = t.header[c];
    if (h.size() < 2 || h[0] != 'z') continue;
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(h.data() + 1, h.data() + h.size(), k);
    if (ec != std::errc() || ptr != h.data() + h.size() || k == 0) continue;
    found.emplace_back(k, c);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != i + 1)
      throw Error(ErrorCode::Parse, "io", "covariate columns must be z1..zd without gaps; missing z" + std::to_string(i + 1));
    cols.push_back(found[i].second);
  }
  return cols;
}

/// Dataset from CSV text with columns time, event (0/1) and z1..zd. When
/// require_outcome is false, missing time/event columns read as (0, censored).
inline Dataset parse_dataset(const std::string& text, bool require_outcome = true) {
  const auto t = parse_table(text);
  const auto time_col = t.column("time");
  const auto event_col = t.column("event");
  if (require_outcome) {
    if (time_col < 0) throw Error(ErrorCode::Parse, "io", "missing required column 'time'");
    if (event_col < 0) throw Error(ErrorCode::Parse, "io", "missing required column 'event'");
  }
  const auto zc = covariate_columns(t);
  Dataset data(zc.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Observation o;
    if (time_col >= 0) {
      o.time = row[static_cast<std::size_t>(time_col)];
      if (!(o.time >= 0.0))
        throw Error(ErrorCode::Parse, "io", "line " + std::to_string(t.line_numbers[r]) + ": time must be >= 0");
    }
    if (event_col >= 0) {
      const double e = row[static_cast<std::size_t>(event_col)];
      if (e != 0.0 && e != 1.0)
        throw Error(ErrorCode::Parse, "io", "line " + std::to_string(t.line_numbers[r]) + ": event must be 0 or 1");
      o.event = e == 1.0;
    }
    for (auto c : zc) o.covariates.push_back(row[c]);
    try {
      data.push_back(std::move(o));
    } catch (const Error& err) {
      throw Error(ErrorCode::Parse, "io", "line " + std::to_string(t.line_numbers[r]) + ": " + err.what());
    }
  }
  return data;
}

inline Dataset read_dataset(const std::string& path, bool require_outcome = true) {
  try {
    return parse_dataset(read_file(path), require_outcome);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw Error(ErrorCode::Parse, "io", path + ": " + e.what());
    throw;
  }
}

inline std::string format_dataset(const Dataset& data) {
  std::string out = "time,event";
  for (std::size_t j = 1; j <= data.dim(); ++j) out += ",z" + std::to_string(j);
  out += '\n';
  for (const auto& o : data) {
    out += format_double(o.time);
    out += o.event ? ",1" : ",0";
    for (double z : o.covariates) {
      out += ',';
      out += format_double(z);
    }
    out += '\n';
  }
  return out;
}

/// One numeric column of a CSV file.
inline std::vector<double> read_column(const std::string& path, std::string_view name) {
  const auto t = parse_table(read_file(path));
  const auto c = t.column(name);
  if (c < 0) throw Error(ErrorCode::Parse, "io", path + ": missing required column '" + std::string(name) + "'");
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace pobs_sl::io
