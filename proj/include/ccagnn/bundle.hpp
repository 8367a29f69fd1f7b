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

// Graph bundle directory:
//   meta.json     {"name", "num_nodes", "num_features", "num_classes", "num_edges", "directed"}
//   features.f32  little-endian float32, row-major, n*d values
//   edges.u32     little-endian uint32 (src, dst) pairs, 2*E values
//   labels.u16    little-endian uint16, n values

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccagnn/graph.hpp"

namespace ccagnn {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& file, std::uint64_t offset, const std::string& what)
      : std::runtime_error(file + " @" + std::to_string(offset) + ": " + what), file_(file), offset_(offset) {}

  const std::string& file() const { return file_; }
  std::uint64_t offset() const { return offset_; }

 private:
  std::string file_;
  std::uint64_t offset_;
};

namespace detail {

inline std::vector<char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError(p.string(), 0, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const void* data, std::size_t bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

inline void expect_bytes(const std::filesystem::path& p, std::size_t actual, std::uint64_t expected) {
  if (actual != expected) {
    throw LoadError(p.string(), actual,
                    "size mismatch: " + std::to_string(actual) + " bytes, meta.json implies " +
                        std::to_string(expected));
  }
}

inline std::uint64_t meta_count(const nlohmann::json& meta, const char* key, const std::filesystem::path& p) {
  if (!meta.contains(key) || !meta[key].is_number_unsigned()) {
    throw LoadError(p.string(), 0, std::string("missing or non-integer key '") + key + "'");
  }
  return meta[key].get<std::uint64_t>();
}

}  // namespace detail

inline nlohmann::json bundle_meta(const Graph& g) {
  nlohmann::json meta;
  meta["name"] = g.name();
  meta["num_nodes"] = g.num_nodes();
  meta["num_features"] = g.num_features();
  meta["num_classes"] = g.num_classes();
  meta["num_edges"] = g.num_edges();
  meta["directed"] = g.directed();
  return meta;
}

inline Graph load_bundle(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  const auto feat_path = dir / "features.f32";
  const auto edge_path = dir / "edges.u32";
  const auto label_path = dir / "labels.u16";

  nlohmann::json meta;
  {
    auto raw = detail::read_file(meta_path);
    try {
      meta = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError(meta_path.string(), e.byte, std::string("malformed JSON: ") + e.what());
    }
  }
  const auto n = detail::meta_count(meta, "num_nodes", meta_path);
  const auto d = detail::meta_count(meta, "num_features", meta_path);
  const auto c = detail::meta_count(meta, "num_classes", meta_path);
  const auto e = detail::meta_count(meta, "num_edges", meta_path);
  const std::string name = meta.value("name", dir.filename().string());
  const bool directed = meta.value("directed", false);
  if (n > std::numeric_limits<std::uint32_t>::max() || c > 65536) {
    throw LoadError(meta_path.string(), 0, "node or class count exceeds the on-disk index width");
  }

  auto fbytes = detail::read_file(feat_path);
  detail::expect_bytes(feat_path, fbytes.size(), n * d * 4);
  std::vector<double> features(n * d);
  for (std::size_t i = 0; i < features.size(); ++i) {
    float v;
    std::memcpy(&v, fbytes.data() + i * 4, 4);
    features[i] = static_cast<double>(v);
  }

  auto ebytes = detail::read_file(edge_path);
  detail::expect_bytes(edge_path, ebytes.size(), e * 8);
  std::vector<Edge> edges(e);
  for (std::size_t r = 0; r < e; ++r) {
    std::memcpy(&edges[r].src, ebytes.data() + r * 8, 4);
    std::memcpy(&edges[r].dst, ebytes.data() + r * 8 + 4, 4);
    if (edges[r].src >= n) throw LoadError(edge_path.string(), r * 8, "source index out of range");
    if (edges[r].dst >= n) throw LoadError(edge_path.string(), r * 8 + 4, "target index out of range");
  }

  auto lbytes = detail::read_file(label_path);
  detail::expect_bytes(label_path, lbytes.size(), n * 2);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint16_t v;
    std::memcpy(&v, lbytes.data() + i * 2, 2);
    if (v >= c) throw LoadError(label_path.string(), i * 2, "label " + std::to_string(v) + " >= num_classes");
    labels[i] = v;
  }

  return Graph(name, n, d, c, std::move(features), std::move(edges), std::move(labels), directed);
}

inline void save_bundle(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string meta = bundle_meta(g).dump(2) + "\n";
  detail::write_file(dir / "meta.json", meta.data(), meta.size());

  std::vector<float> f(g.features().size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(g.features()[i]);
  detail::write_file(dir / "features.f32", f.data(), f.size() * 4);

  std::vector<std::uint32_t> e;
  e.reserve(g.num_edges() * 2);
  for (const Edge& x : g.edges()) {
    e.push_back(x.src);
    e.push_back(x.dst);
  }
  detail::write_file(dir / "edges.u32", e.data(), e.size() * 4);

  std::vector<std::uint16_t> l(g.num_nodes());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint16_t>(g.labels()[i]);
  detail::write_file(dir / "labels.u16", l.data(), l.size() * 2);
}

}  // namespace ccagnn
