/*
 * Copyright 2026 The boostiv Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Plain-text model files. One field per line, doubles at 17 significant
// digits so a write/read round trip is exact.
//
//   boostiv-model 1
//   nu <double>
//   dx <int>
//   status ok|degenerate
//   folds <K>
//   intercept <k> <double>          (K lines)
//   stumps <count>
//   fold,iter,feature,threshold,leaf_l,leaf_r   (count lines, iter 1-based)
//   end
//
// Post-boosting files wrap one model block per outer fold:
//
//   boostiv-post 1
//   dx <int>
//   outer <L>
//   weights <l> <len> <beta_0> ... <beta_M>
//   <boostiv-model block>
//   ...                             (L times)
//   end

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "boostiv/boosting.hpp"
#include "boostiv/core.hpp"
#include "boostiv/postprocess.hpp"

namespace boostiv {

inline constexpr int kModelFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline double parse_double(const std::string& s) {
  // from_chars keeps subnormals, which stod reports as out of range.
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size())
    throw FormatError("model file: bad number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw FormatError("model file: bad integer '" + s + "'");
  }
  if (used != s.size()) throw FormatError("model file: bad integer '" + s + "'");
  return v;
}

inline std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("model file: unexpected end of input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// "key v1 v2 ..." -> {v1, v2, ...}, checking the key.
inline std::vector<std::string> keyed(std::istream& in, const std::string& key) {
  std::istringstream ls(next_line(in));
  std::string k;
  ls >> k;
  if (k != key) throw FormatError("model file: expected '" + key + "', got '" + k + "'");
  std::vector<std::string> out;
  for (std::string tok; ls >> tok;) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) out.push_back(cell);
  return out;
}

inline void expect_count(const std::vector<std::string>& v, std::size_t n, const std::string& key) {
  if (v.size() != n) throw FormatError("model file: field '" + key + "' has the wrong arity");
}

}  // namespace detail

inline void write_model(std::ostream& out, const BoostIVModel& model) {
  out << "boostiv-model " << kModelFormatVersion << '\n';
  out << "nu " << format_double(model.nu) << '\n';
  out << "dx " << model.dx << '\n';
  out << "status " << (model.status == FitStatus::kOk ? "ok" : "degenerate") << '\n';
  out << "folds " << model.folds.size() << '\n';
  std::size_t total = 0;
  for (std::size_t k = 0; k < model.folds.size(); ++k) {
    out << "intercept " << k << ' ' << format_double(model.folds[k].intercept) << '\n';
    total += model.folds[k].stumps.size();
  }
  out << "stumps " << total << '\n';
  for (std::size_t k = 0; k < model.folds.size(); ++k) {
    const auto& stumps = model.folds[k].stumps;
    for (std::size_t t = 0; t < stumps.size(); ++t) {
      const StumpBasis& s = stumps[t];
      out << k << ',' << t + 1 << ',' << s.feature << ',' << format_double(s.threshold) << ','
          << format_double(s.leaf_left) << ',' << format_double(s.leaf_right) << '\n';
    }
  }
  out << "end\n";
}

inline BoostIVModel read_model(std::istream& in) {
  using namespace detail;
  auto head = keyed(in, "boostiv-model");
  expect_count(head, 1, "boostiv-model");
  if (parse_int(head[0]) != kModelFormatVersion)
    throw FormatError("model file: unsupported version " + head[0]);
  BoostIVModel model;
  auto v = keyed(in, "nu");
  expect_count(v, 1, "nu");
  model.nu = parse_double(v[0]);
  v = keyed(in, "dx");
  expect_count(v, 1, "dx");
  model.dx = static_cast<Index>(parse_int(v[0]));
  v = keyed(in, "status");
  expect_count(v, 1, "status");
  if (v[0] == "ok") model.status = FitStatus::kOk;
  else if (v[0] == "degenerate") model.status = FitStatus::kDegenerateOutcome;
  else throw FormatError("model file: unknown status '" + v[0] + "'");
  v = keyed(in, "folds");
  expect_count(v, 1, "folds");
  const long long k_count = parse_int(v[0]);
  if (k_count < 1) throw FormatError("model file: fold count must be >= 1");
  model.folds.resize(static_cast<std::size_t>(k_count));
  for (long long k = 0; k < k_count; ++k) {
    v = keyed(in, "intercept");
    expect_count(v, 2, "intercept");
    if (parse_int(v[0]) != k) throw FormatError("model file: intercepts out of order");
    model.folds[static_cast<std::size_t>(k)].intercept = parse_double(v[1]);
  }
  v = keyed(in, "stumps");
  expect_count(v, 1, "stumps");
  const long long n_stumps = parse_int(v[0]);
  for (long long i = 0; i < n_stumps; ++i) {
    const auto cells = split_csv(next_line(in));
    if (cells.size() != 6) throw FormatError("model file: stump record needs 6 fields");
    const long long fold = parse_int(cells[0]);
    if (fold < 0 || fold >= k_count) throw FormatError("model file: stump fold out of range");
    auto& stumps = model.folds[static_cast<std::size_t>(fold)].stumps;
    if (parse_int(cells[1]) != static_cast<long long>(stumps.size()) + 1)
      throw FormatError("model file: stump iterations out of order");
    StumpBasis s;
    s.feature = static_cast<Index>(parse_int(cells[2]));
    if (s.feature < 0 || s.feature >= model.dx) throw FormatError("model file: stump feature out of range");
    s.threshold = parse_double(cells[3]);
    s.leaf_left = parse_double(cells[4]);
    s.leaf_right = parse_double(cells[5]);
    stumps.push_back(s);
  }
  if (next_line(in) != "end") throw FormatError("model file: missing 'end'");
  return model;
}

inline void write_post_model(std::ostream& out, const PostBoostModel& model) {
  out << "boostiv-post " << kModelFormatVersion << '\n';
  out << "dx " << model.dx << '\n';
  out << "outer " << model.folds.size() << '\n';
  for (std::size_t l = 0; l < model.folds.size(); ++l) {
    const Vector& b = model.folds[l].beta;
    out << "weights " << l << ' ' << b.size();
    for (Index j = 0; j < b.size(); ++j) out << ' ' << format_double(b[j]);
    out << '\n';
    write_model(out, model.folds[l].inner);
  }
  out << "end\n";
}

inline PostBoostModel read_post_model(std::istream& in) {
  using namespace detail;
  auto head = keyed(in, "boostiv-post");
  expect_count(head, 1, "boostiv-post");
  if (parse_int(head[0]) != kModelFormatVersion)
    throw FormatError("model file: unsupported version " + head[0]);
  PostBoostModel model;
  auto v = keyed(in, "dx");
  expect_count(v, 1, "dx");
  model.dx = static_cast<Index>(parse_int(v[0]));
  v = keyed(in, "outer");
  expect_count(v, 1, "outer");
  const long long l_count = parse_int(v[0]);
  if (l_count < 1) throw FormatError("model file: outer fold count must be >= 1");
  for (long long l = 0; l < l_count; ++l) {
    v = keyed(in, "weights");
    if (v.size() < 2 || parse_int(v[0]) != l) throw FormatError("model file: weights out of order");
    const long long len = parse_int(v[1]);
    expect_count(v, static_cast<std::size_t>(len) + 2, "weights");
    PostBoostModel::Outer outer;
    outer.beta.resize(static_cast<Index>(len));
    for (long long j = 0; j < len; ++j) outer.beta[static_cast<Index>(j)] = parse_double(v[static_cast<std::size_t>(j) + 2]);
    outer.inner = read_model(in);
    model.folds.push_back(std::move(outer));
  }
  if (next_line(in) != "end") throw FormatError("model file: missing 'end'");
  return model;
}

}  // namespace boostiv
