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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccagnn::svg {

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colours = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colours;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<double> values;
};

struct Frame {
  double width = 720, height = 400;
  double left = 60, right = 20, top = 40, bottom = 50;
  double lo = 0, hi = 1;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

inline std::string open(const Frame& f, const std::string& title) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) +
       "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top + f.plot_h()) + "\" x2=\"" + num(f.left + f.plot_w()) +
       "\" y2=\"" + num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
       num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.lo + (f.hi - f.lo) * k / 4.0;
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.y(v) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(v) + "</text>\n";
  }
  return s;
}

inline void value_range(const std::vector<double>& all, double& lo, double& hi) {
  if (all.empty()) throw std::invalid_argument("chart has no data");
  lo = *std::min_element(all.begin(), all.end());
  hi = *std::max_element(all.begin(), all.end());
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

/// Line chart of several series over a shared x axis (index 0..len-1).
/// Vertical dashed markers are drawn before each index in `boundaries`.
inline std::string line_chart(const std::string& title, const std::vector<Series>& series,
                              const std::vector<std::size_t>& boundaries, const std::string& x_label) {
  std::vector<double> all;
  std::size_t len = 0;
  for (const auto& s : series) {
    all.insert(all.end(), s.values.begin(), s.values.end());
    len = std::max(len, s.values.size());
  }
  Frame f;
  value_range(all, f.lo, f.hi);
  auto x = [&](double i) { return f.left + (len > 1 ? f.plot_w() * i / static_cast<double>(len - 1) : f.plot_w() / 2); };
  std::string s = open(f, title);
  for (std::size_t b : boundaries) {
    const double bx = x(static_cast<double>(b) - 0.5);
    s += "<line class=\"fold-boundary\" x1=\"" + num(bx) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(bx) +
         "\" y2=\"" + num(f.top + f.plot_h()) + "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& colour = palette()[k % palette().size()];
    s += "<polyline class=\"series\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[k].values.size(); ++i) {
      s += (i ? " " : "") + num(x(static_cast<double>(i))) + "," + num(f.y(series[k].values[i]));
    }
    s += "\"/>\n";
    s += "<text x=\"" + num(f.left + 10) + "\" y=\"" + num(f.top + 14 + 14 * static_cast<double>(k)) +
         "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + colour + "\">" + escape(series[k].name) +
         "</text>\n";
  }
  s += "<text x=\"" + num(f.left + f.plot_w() / 2) + "\" y=\"" + num(f.height - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + escape(x_label) + "</text>\n";
  s += "</svg>\n";
  return s;
}

/// Bar chart with one bar per label and optional error whiskers.
inline std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                             const std::vector<double>& values, const std::vector<double>& errors) {
  if (labels.size() != values.size()) throw std::invalid_argument("bar chart: label/value count mismatch");
  Frame f;
  f.lo = 0.0;
  f.hi = 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    f.hi = std::max(f.hi, values[i] + (i < errors.size() ? errors[i] : 0.0));
  }
  std::string s = open(f, title);
  const double slot = f.plot_w() / static_cast<double>(std::max<std::size_t>(1, values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double bx = f.left + slot * static_cast<double>(i) + slot * 0.15;
    const double bw = slot * 0.7;
    const double top = f.y(values[i]);
    s += "<rect class=\"bar\" x=\"" + num(bx) + "\" y=\"" + num(top) + "\" width=\"" + num(bw) + "\" height=\"" +
         num(f.y(0.0) - top) + "\" fill=\"" + palette()[i % palette().size()] + "\"/>\n";
    if (i < errors.size() && errors[i] > 0.0) {
      const double cx = bx + bw / 2;
      s += "<line x1=\"" + num(cx) + "\" y1=\"" + num(f.y(values[i] - errors[i])) + "\" x2=\"" + num(cx) +
           "\" y2=\"" + num(f.y(values[i] + errors[i])) + "\" stroke=\"black\"/>\n";
    }
    s += "<text x=\"" + num(bx + bw / 2) + "\" y=\"" + num(f.y(0.0) + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + escape(labels[i]) + "</text>\n";
    s += "<text x=\"" + num(bx + bw / 2) + "\" y=\"" + num(top - 4) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + num(values[i]) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace ccagnn::svg
