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

#include "duotrack/metrics/report.hpp"

#include <cmath>
#include <sstream>

#include "duotrack/core/errors.hpp"
#include "fmt/format.h"

namespace duotrack::metrics {

namespace {

std::string num(double v) { return fmt::format("{:.6f}", v); }

bool is_rate(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void MetricReport::check() const {
  if (!is_rate(eer) || !is_rate(ccs_eer) || !is_rate(eea))
    throw ContractError("metric report rate outside [0, 1]");
  if (ccs_eer != 1.0 - eer) throw ContractError("ccs_eer must equal 1 - eer");
  if (f0_rmse < 0.0) throw ContractError("negative f0_rmse");
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json pe = nlohmann::json::array();
  for (const auto& row : r.per_emotion) {
    pe.push_back({{"emotion", row.emotion},
                  {"count", row.count},
                  {"ccs_cosine", row.ccs_cosine},
                  {"eea", row.eea},
                  {"f0_rmse", row.f0_rmse}});
  }
  const double radius = std::isfinite(r.cluster_radius) ? r.cluster_radius : -1.0;
  return {{"label", r.label},
          {"utterances", r.utterances},
          {"ccs_cosine", r.ccs_cosine},
          {"ccs_eer", r.ccs_eer},
          {"eer", r.eer},
          {"cluster_radius", radius},
          {"eea", r.eea},
          {"f0_rmse", r.f0_rmse},
          {"per_emotion", pe},
          {"encoder_checksums", r.encoder_checksums}};
}

std::string reports_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "label,utterances,ccs_cosine,ccs_eer,eer,cluster_radius,eea,f0_rmse\n";
  for (const auto& r : reports) {
    out << r.label << ',' << r.utterances << ',' << num(r.ccs_cosine) << ',' << num(r.ccs_eer)
        << ',' << num(r.eer) << ',' << num(r.cluster_radius) << ',' << num(r.eea) << ','
        << num(r.f0_rmse) << '\n';
  }
  return out.str();
}

std::string per_emotion_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "emotion,count,ccs_cosine,eea,f0_rmse\n";
  for (const auto& row : r.per_emotion) {
    out << row.emotion << ',' << row.count << ',' << num(row.ccs_cosine) << ',' << num(row.eea)
        << ',' << num(row.f0_rmse) << '\n';
  }
  return out.str();
}

}  // namespace duotrack::metrics
