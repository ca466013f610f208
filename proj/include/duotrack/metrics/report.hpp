// Copyright 2026 The duotrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace duotrack::metrics {

struct EmotionRow {
  std::string emotion;
  std::size_t count = 0;
  double ccs_cosine = 0.0;
  double eea = 0.0;
  double f0_rmse = 0.0;
};

struct MetricReport {
  std::string label;  // e.g. "seen", "unseen"
  std::size_t utterances = 0;
  double ccs_cosine = 0.0;
  double ccs_eer = 0.0;
  double eer = 0.0;
  double cluster_radius = 0.0;
  double eea = 0.0;
  double f0_rmse = 0.0;
  std::vector<EmotionRow> per_emotion;
  std::map<std::string, std::string> encoder_checksums;

  // Throws ContractError if rates leave [0, 1], ccs_eer != 1 - eer, or
  // f0_rmse is negative.
  void check() const;
};

nlohmann::json to_json(const MetricReport& r);
// One header line plus one row per report.
std::string reports_csv(const std::vector<MetricReport>& reports);
std::string per_emotion_csv(const MetricReport& r);

}  // namespace duotrack::metrics
