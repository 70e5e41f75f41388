#include "deci/csvio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace deci {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) {
    throw NumericError("format_double: conversion failed");
  }
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const RealMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("write_csv: cannot open '" + path + "' for writing");
  }
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) out << ',';
      out << format_double(m.at(r, c));
    }
    out << '\n';
  }
  if (!out.good()) {
    throw IoError("write_csv: failed writing '" + path + "'");
  }
}

RealMatrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError("read_csv: cannot open '" + path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{}) {
        throw LoadError("read_csv: '" + path + "' line " +
                        std::to_string(line_no) + ": cannot parse number");
      }
      row.push_back(v);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') {
        throw LoadError("read_csv: '" + path + "' line " +
                        std::to_string(line_no) + ": expected ',' after value");
      }
      ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw LoadError("read_csv: '" + path + "' line " +
                      std::to_string(line_no) + " has " +
                      std::to_string(row.size()) + " columns, expected " +
                      std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw LoadError("read_csv: '" + path + "' contains no data rows");
  }
  RealMatrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      m.at(r, c) = rows[r][c];
    }
  }
  return m;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("read_text_file: cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("write_text_file: cannot open '" + path + "' for writing");
  }
  out << content;
  if (!out.good()) {
    throw IoError("write_text_file: failed writing '" + path + "'");
  }
}

}  // namespace deci
