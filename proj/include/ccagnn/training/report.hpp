/*
 * Copyright 2026 The ccagnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "ccagnn/training/trainer.hpp"

namespace ccagnn {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

inline constexpr const char* kMetricsHeader =
    "fold,epoch,ce_causal,ce_fusion,ce_intervention,ce_noncausal,mi,cond_mi,pred_mi,inv_mi,orth,contrastive,"
    "center,gate_conf,total,train_f1,val_f1";

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

inline std::string metrics_csv(const std::vector<FoldResult>& folds) {
  std::string s = std::string(kMetricsHeader) + "\n";
  for (const auto& f : folds) {
    for (const auto& r : f.epochs) {
      s += std::to_string(r.fold) + "," + std::to_string(r.epoch);
      for (double v : r.losses) s += "," + format_double(v);
      s += "," + format_double(r.train_f1) + "," + format_double(r.val_f1) + "\n";
    }
  }
  return s;
}

inline std::string summary_csv(const CVResult& cv) {
  std::string s = "fold,test_f1,best_epoch\n";
  for (const auto& f : cv.folds) {
    s += std::to_string(f.fold) + "," + format_double(f.test_f1) + "," + std::to_string(f.best_epoch) + "\n";
  }
  s += "mean," + format_double(cv.mean) + ",\n";
  s += "std," + format_double(cv.stddev) + ",\n";
  return s;
}

/// Gate and ramp statistics per epoch (deterministic; wall-clock is excluded).
inline std::string telemetry_csv(const std::vector<FoldResult>& folds) {
  std::string s = "fold,epoch,gate_mean,gate_min,gate_max,alpha_mean,alpha_int,adaptive,skipped_classes\n";
  for (const auto& f : folds) {
    for (const auto& r : f.epochs) {
      s += std::to_string(r.fold) + "," + std::to_string(r.epoch) + "," + format_double(r.gate_mean) + "," +
           format_double(r.gate_min) + "," + format_double(r.gate_max) + "," + format_double(r.alpha_mean) + "," +
           format_double(r.alpha_int) + "," + format_double(r.adaptive) + "," + std::to_string(r.skipped_classes) +
           "\n";
    }
  }
  return s;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    std::string avail;
    for (const auto& h : header) avail += (avail.empty() ? "" : ", ") + h;
    throw std::invalid_argument("unknown column '" + name + "'; available: " + avail);
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Plain comma-separated reader (no quoting). Throws on an empty file or ragged rows.
inline CsvTable read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw std::runtime_error(p.string() + " is empty");
  if (line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw std::runtime_error(p.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.header.size()) + " fields, got " + std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace ccagnn
