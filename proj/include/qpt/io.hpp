// Copyright 2026 The qpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// File formats. Matrices are row-major lists of [re, im] pairs under a
// "dims" header; doubles are written in shortest round-trip form so a
// write/read cycle is lossless.

#include "qpt/core.hpp"
#include "qpt/process.hpp"
#include "qpt/protocols.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace qpt::io {

using json = nlohmann::json;

inline json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return {{"dims", {m.rows(), m.cols()}}, {"data", std::move(rows)}};
}

inline CMatrix matrix_from_json(const json& j) {
  if (!j.contains("dims") || !j.contains("data")) throw error("matrix json: need 'dims' and 'data'");
  const auto dims = j.at("dims").get<std::vector<Eigen::Index>>();
  if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1) throw error("matrix json: 'dims' must be [rows, cols]");
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != dims[0]) throw error("matrix json: row count differs from dims");
  CMatrix m(dims[0], dims[1]);
  for (Eigen::Index i = 0; i < dims[0]; ++i) {
    const auto& row = data.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dims[1]) throw error("matrix json: column count differs from dims");
    for (Eigen::Index k = 0; k < dims[1]; ++k) {
      const auto& e = row.at(static_cast<std::size_t>(k));
      if (!e.is_array() || e.size() != 2) throw error("matrix json: entries must be [re, im]");
      m(i, k) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
    }
  }
  return m;
}

inline json chi_to_json(const ChiMatrix& chi) {
  json j = matrix_to_json(chi.matrix);
  j["s"] = chi.s;
  j["normalization"] = chi.normalization == ChiNormalization::chi ? "chi" : "choi";
  return j;
}

inline ChiMatrix chi_from_json(const json& j) {
  const CMatrix m = matrix_from_json(j);
  const int s = detail::exact_sqrt(m.rows());
  if (s <= 0) throw error("chi json: matrix dimension is not s^2");
  if (j.contains("s") && j.at("s").get<int>() != s) throw error("chi json: 's' does not match dims");
  const std::string norm = j.value("normalization", "choi");
  if (norm != "chi" && norm != "choi") throw error("chi json: normalization must be 'chi' or 'choi'");
  return {s, m, norm == "chi" ? ChiNormalization::chi : ChiNormalization::choi};
}

inline json rows_to_json(const std::vector<ProtocolRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j{{"operator", matrix_to_json(r.op)}, {"exposure", r.exposure}, {"auxiliary", r.auxiliary}};
    j["count"] = r.count ? json(*r.count) : json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<ProtocolRow> rows_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw error("rows json: expected a non-empty array");
  std::vector<ProtocolRow> rows;
  for (const auto& e : j) {
    ProtocolRow r;
    r.op = matrix_from_json(e.at("operator"));
    r.exposure = e.at("exposure").get<double>();
    r.auxiliary = e.value("auxiliary", false);
    if (e.contains("count") && !e.at("count").is_null()) r.count = e.at("count").get<std::int64_t>();
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw error("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw error("write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Shortest round-trip text for a double.
inline std::string format_double(double v) {
  return json(v).dump();
}

/// CSV with a header; every cell is pre-formatted text.
inline std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  }
  return os.str();
}

/// FNV-1a over the compact dump of a JSON value (keys are sorted by nlohmann).
inline std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qpt::io
