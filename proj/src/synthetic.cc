// Copyright 2026 The seqrec Authors.
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

#include "seqrec/synthetic.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "seqrec/errors.h"

namespace seqrec {
namespace {

// Inverse-CDF sampler over fixed weights.
class Discrete {
 public:
  Discrete() = default;
  explicit Discrete(const std::vector<double>& weights) {
    cdf_.reserve(weights.size());
    double total = 0.0;
    for (double w : weights) cdf_.push_back(total += w);
  }
  size_t Draw(Rng& rng) const {
    const double u = rng.Uniform() * cdf_.back();
    return std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin();
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

size_t SyntheticCluster(const SyntheticConfig& config, size_t rank) {
  return rank % config.clusters;
}

std::vector<Interaction> GenerateSynthetic(const SyntheticConfig& config) {
  if (config.items == 0 || config.users == 0 || config.clusters == 0 ||
      config.clusters > config.items) {
    throw ConfigError("synthetic corpus needs users, items and 1..items clusters");
  }
  if (config.min_length == 0 || config.min_length > config.max_length) {
    throw ConfigError("synthetic sequence lengths must satisfy 0 < min <= max");
  }
  if (config.stay < 0.0 || config.stay > 1.0) {
    throw ConfigError("synthetic stay probability must lie in [0, 1]");
  }
  std::vector<double> weights(config.items);
  for (size_t r = 0; r < config.items; ++r) {
    weights[r] = std::pow(static_cast<double>(r + 1), -config.zipf_exponent);
  }
  const Discrete global(weights);
  std::vector<std::vector<size_t>> members(config.clusters);
  for (size_t r = 0; r < config.items; ++r) {
    members[SyntheticCluster(config, r)].push_back(r);
  }
  std::vector<Discrete> within;
  for (const auto& m : members) {
    std::vector<double> w;
    for (size_t r : m) w.push_back(weights[r]);
    within.emplace_back(w);
  }

  Rng rng(config.seed);
  std::vector<Interaction> rows;
  int64_t clock = 0;
  for (size_t u = 0; u < config.users; ++u) {
    const std::string user = "u" + std::to_string(u);
    const size_t length = static_cast<size_t>(rng.UniformRange(
        static_cast<int64_t>(config.min_length),
        static_cast<int64_t>(config.max_length)));
    size_t current = global.Draw(rng);
    for (size_t t = 0; t < length; ++t) {
      if (t > 0) {
        if (rng.Bernoulli(config.stay)) {
          const size_t c = SyntheticCluster(config, current);
          current = members[c][within[c].Draw(rng)];
        } else {
          current = global.Draw(rng);
        }
      }
      rows.push_back({user, "i" + std::to_string(current), ++clock});
    }
  }
  return rows;
}

void WriteCsv(const std::vector<Interaction>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "user,item,timestamp\n";
  for (const auto& r : rows) {
    out << r.user << ',' << r.item << ',' << r.timestamp << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace seqrec
