#pragma once

// Per-epoch CSV output. Columns:
//
//   frame|superframe, social_utility_bps, social_utility_norm,
//   normalized_mood, then d<i>_utility_norm, d<i>_mood, d<i>_list_rank
//   for every player i = 1..N_D.
//
// Mood is 1 for content and 0 for discontent. Doubles are written in the
// shortest form that parses back to the same value, independent of locale.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "d2d/simulator.hpp"

namespace d2d {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw CsvError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline std::string csv_header(Mode mode, std::size_t n_d) {
  std::string h = mode == Mode::PathlossFrame ? "frame" : "superframe";
  h += ",social_utility_bps,social_utility_norm,normalized_mood";
  for (std::size_t d = 1; d <= n_d; ++d) {
    const std::string p = ",d" + std::to_string(d);
    h += p + "_utility_norm" + p + "_mood" + p + "_list_rank";
  }
  return h;
}

inline std::string csv_row(const EpochRecord& r) {
  std::string row = std::to_string(r.epoch);
  row += ',' + format_double(r.social_utility_bps);
  row += ',' + format_double(r.social_utility_norm);
  row += ',' + format_double(r.normalized_mood);
  for (const auto& p : r.players) {
    row += ',' + format_double(p.utility);
    row += p.mood == Mood::Content ? ",1" : ",0";
    row += ',' + std::to_string(p.list);
  }
  return row;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, Mode mode, std::size_t n_d) : path_(path), out_(path) {
    if (!out_) throw CsvError("cannot open '" + path + "' for writing");
    out_ << csv_header(mode, n_d) << '\n';
  }

  void write(const EpochRecord& r) {
    out_ << csv_row(r) << '\n';
    if (!out_) throw CsvError("write failed on '" + path_ + "'");
  }

  void close() {
    out_.close();
    if (!out_) throw CsvError("close failed on '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

/// Per-subframe allocation trace: epoch, subframe, player, cu, passed.
/// CU and player numbers are 1-based; cu 0 means no assignment.
class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw CsvError("cannot open '" + path + "' for writing");
    out_ << "epoch,subframe,player,cu,passed\n";
  }

  void write(const EpochRecord& r) {
    for (std::size_t s = 0; s < r.allocations.size(); ++s) {
      const auto& a = r.allocations[s];
      for (std::size_t d = 0; d < a.assignment.size(); ++d) {
        out_ << r.epoch << ',' << s + 1 << ',' << d + 1 << ','
             << (a.assignment[d] ? *a.assignment[d] + 1 : 0) << ','
             << (a.assignment[d] && a.passed_test[d] ? 1 : 0) << '\n';
      }
    }
    if (!out_) throw CsvError("write failed on '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<EpochRecord> records;
};

namespace detail {

inline double parse_csv_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw CsvError("bad number '" + s + "'");
  return v;
}

inline std::int64_t parse_csv_int(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw CsvError("bad integer '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace detail

/// Reads a file written by CsvWriter.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw CsvError("'" + path + "' is empty");
  t.header = detail::split(line);
  if (t.header.size() < 4 || (t.header.size() - 4) % 3 != 0) {
    throw CsvError("'" + path + "': unexpected header");
  }
  const std::size_t n_d = (t.header.size() - 4) / 3;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = detail::split(line);
    if (cells.size() != t.header.size()) {
      throw CsvError(path + ":" + std::to_string(line_no) + ": wrong column count");
    }
    EpochRecord r;
    r.epoch = detail::parse_csv_int(cells[0]);
    r.social_utility_bps = detail::parse_csv_double(cells[1]);
    r.social_utility_norm = detail::parse_csv_double(cells[2]);
    r.normalized_mood = detail::parse_csv_double(cells[3]);
    for (std::size_t d = 0; d < n_d; ++d) {
      PlayerState p;
      p.utility = detail::parse_csv_double(cells[4 + 3 * d]);
      p.mood = cells[5 + 3 * d] == "1" ? Mood::Content : Mood::Discontent;
      p.list = detail::parse_csv_int(cells[6 + 3 * d]);
      r.players.push_back(p);
    }
    t.records.push_back(std::move(r));
  }
  return t;
}

}  // namespace d2d
