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

#include "duotrack/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "duotrack/core/errors.hpp"
#include "duotrack/core/interp.hpp"
#include "duotrack/core/rng.hpp"
#include "duotrack/corpus/io.hpp"
#include "duotrack/corpus/render.hpp"
#include "duotrack/corpus/vocab.hpp"

namespace duotrack::pipeline {

using nlohmann::json;

ReferenceLibrary::ReferenceLibrary(std::vector<LibraryEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const LibraryEntry& a, const LibraryEntry& b) {
    return std::tie(a.character_id, a.clip_id) < std::tie(b.character_id, b.clip_id);
  });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto [it, fresh] = ranges_.try_emplace(entries_[i].character_id, i, i + 1);
    if (!fresh) it->second.second = i + 1;
  }
}

std::span<const LibraryEntry> ReferenceLibrary::character(const std::string& character_id) const {
  auto it = ranges_.find(character_id);
  if (it == ranges_.end()) return {};
  return std::span<const LibraryEntry>(entries_).subspan(it->second.first,
                                                         it->second.second - it->second.first);
}

std::vector<std::string> ReferenceLibrary::characters() const {
  std::vector<std::string> out;
  for (const auto& [id, r] : ranges_) out.push_back(id);
  return out;
}

std::size_t select_reference(std::span<const LibraryEntry> entries,
                             const std::array<double, 3>& vad) {
  if (entries.empty()) throw ConfigError("reference library is empty");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) d2 += (entries[i].vad[k] - vad[k]) * (entries[i].vad[k] - vad[k]);
    const double d = std::sqrt(d2);
    if (d < best_d || (d == best_d && entries[i].clip_id < entries[best].clip_id)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

bool Enrollment::contains(std::size_t utterance_index) const {
  for (const auto& [id, v] : clips)
    if (std::find(v.begin(), v.end(), utterance_index) != v.end()) return true;
  return false;
}

Enrollment make_enrollment(const corpus::Corpus& corpus, std::size_t unseen_clips) {
  Enrollment e;
  for (const auto& p : corpus.personas) {
    auto& clips = e.clips[p.character_id];
    for (std::size_t i : corpus.by_character(p.character_id)) {
      const auto& u = corpus.utterances[i];
      if (p.seen && u.split == corpus::Split::kTrain) clips.push_back(i);
      if (!p.seen && u.split == corpus::Split::kTest && clips.size() < unseen_clips)
        clips.push_back(i);
    }
    if (clips.empty()) throw ConfigError("character " + p.character_id + " has no reference clips");
  }
  return e;
}

std::vector<std::size_t> evaluation_indices(const corpus::Corpus& corpus, const Enrollment& e,
                                            bool seen) {
  std::vector<std::size_t> out;
  for (std::size_t i : corpus.select(corpus::Split::kTest, seen))
    if (!e.contains(i)) out.push_back(i);
  return out;
}

ReferenceLibrary build_library(const corpus::Corpus& corpus, const Enrollment& enrollment,
                               const std::vector<corpus::ProsodyTarget>& targets) {
  if (targets.size() != corpus.utterances.size())
    throw ContractError("one target per utterance is required");
  std::vector<LibraryEntry> entries;
  for (const auto& [id, clips] : enrollment.clips) {
    for (std::size_t i : clips) {
      const auto& u = corpus.utterances[i];
      entries.push_back({u.utterance_id, u.character_id, u.emotion, targets[i].vad.array(),
                         corpus.contours[i]});
    }
  }
  return ReferenceLibrary(std::move(entries));
}

std::map<std::string, Voice> build_voices(const Models& models, const ReferenceLibrary& library) {
  std::map<std::string, Voice> out;
  for (const auto& id : library.characters()) {
    std::vector<corpus::Contour> contours;
    for (const auto& e : library.character(id)) contours.push_back(e.contour);
    Voice v;
    v.code = timbre::quantize(models.timbre.embed(contours), models.codebook);
    v.profile = models.timbre.decode_profile(v.code.quantized);
    out.emplace(id, std::move(v));
  }
  return out;
}

json to_json(const PipelineConfig& c) {
  return json{{"timbre_weight", c.timbre_weight},
              {"vad_source", c.vad_source == VadSource::kFlow ? "flow" : "adapter"},
              {"reference_mode", c.reference_mode == ReferenceMode::kNearest ? "nearest" : "random"},
              {"fps", c.render.fps},
              {"f0_jitter_hz", c.render.f0_jitter_hz},
              {"energy_jitter", c.render.energy_jitter},
              {"duration_jitter", c.render.duration_jitter},
              {"pause_jitter", c.render.pause_jitter}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    c.timbre_weight = j.value("timbre_weight", c.timbre_weight);
    const auto src = j.value("vad_source", std::string("flow"));
    if (src != "flow" && src != "adapter") throw ConfigError("vad_source must be flow or adapter");
    c.vad_source = src == "flow" ? VadSource::kFlow : VadSource::kAdapter;
    const auto mode = j.value("reference_mode", std::string("nearest"));
    if (mode != "nearest" && mode != "random")
      throw ConfigError("reference_mode must be nearest or random");
    c.reference_mode = mode == "nearest" ? ReferenceMode::kNearest : ReferenceMode::kRandom;
    c.render.fps = j.value("fps", c.render.fps);
    c.render.f0_jitter_hz = j.value("f0_jitter_hz", c.render.f0_jitter_hz);
    c.render.energy_jitter = j.value("energy_jitter", c.render.energy_jitter);
    c.render.duration_jitter = j.value("duration_jitter", c.render.duration_jitter);
    c.render.pause_jitter = j.value("pause_jitter", c.render.pause_jitter);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  if (!(c.timbre_weight >= 0.0 && c.timbre_weight <= 1.0))
    throw ConfigError("timbre_weight must lie in [0, 1]");
  if (!(c.render.fps > 0.0)) throw ConfigError("fps must be positive");
  return c;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

corpus::Contour render_base(std::size_t tokens, const corpus::BaseProfile& profile,
                            corpus::SpeechPattern pattern, const LibraryEntry& ref,
                            double duration_scale, double pause_scale, std::uint64_t seed,
                            const PipelineConfig& cfg) {
  if (tokens == 0) throw DomainError("nothing to render");
  const auto& rc = ref.contour;
  if (rc.f0.empty() || rc.durations.empty()) throw DomainError("reference clip has no frames");
  const double w = cfg.timbre_weight;
  const double ref_rate = static_cast<double>(rc.durations.size()) * cfg.render.fps /
                          static_cast<double>(rc.f0.size());
  const double ref_pause =
      std::accumulate(rc.pauses.begin(), rc.pauses.end(), 0.0) / static_cast<double>(rc.durations.size());
  const double f0 = w * profile.base_f0 + (1.0 - w) * mean_of(rc.f0);
  const double energy = w * profile.base_energy + (1.0 - w) * mean_of(rc.energy);
  const double rate = std::max(0.1, w * profile.base_rate + (1.0 - w) * ref_rate);
  const double pause = w * corpus::pause_mean_frames(pattern) + (1.0 - w) * ref_pause;

  Rng rng(seed);
  corpus::Contour c;
  c.durations.resize(tokens);
  c.pauses.resize(tokens);
  const double frames_per_token = cfg.render.fps / rate * duration_scale;
  long total = 0;
  double carry = 0.0;
  for (std::size_t i = 0; i < tokens; ++i) {
    const double d = frames_per_token * std::exp(cfg.render.duration_jitter * rng.normal());
    c.durations[i] = corpus::round_half_up(d, 1);
    total += c.durations[i];
    const double p = std::max(0.0, pause * (1.0 + cfg.render.pause_jitter * rng.normal())) * pause_scale + carry;
    c.pauses[i] = corpus::round_half_up(p, 0);
    carry = p - static_cast<double>(c.pauses[i]);
  }
  const auto frames = static_cast<std::size_t>(total);
  c.f0.resize(frames);
  c.energy.resize(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    c.f0[k] = std::max(40.0, f0 + cfg.render.f0_jitter_hz * rng.normal());
    c.energy[k] = std::clamp(energy + cfg.render.energy_jitter * rng.normal(), 0.0, 1.0);
  }
  return c;
}

corpus::Contour fuse_and_render(std::size_t tokens, const corpus::BaseProfile& profile,
                                corpus::SpeechPattern pattern, const adapter::ControlParams& control,
                                std::span<const double> fine, const LibraryEntry& ref,
                                std::uint64_t seed, const PipelineConfig& cfg) {
  if (fine.size() % 2 != 0 || fine.empty()) throw ShapeError("fine curve must hold two channels");
  corpus::Contour c = render_base(tokens, profile, pattern, ref, control.duration_scale,
                                  control.pause_scale, seed, cfg);
  const std::size_t grid = fine.size() / 2;
  // The backbone also imitates the reference's intonation: its modulation
  // enters with the same weight as its level statistics.
  const double w = cfg.timbre_weight;
  const auto ref_mod = flow::fine_target(ref.contour, grid, profile.f0_range);
  std::vector<double> mod(fine.size());
  for (std::size_t k = 0; k < mod.size(); ++k) mod[k] = w * fine[k] + (1.0 - w) * ref_mod[k];
  const std::span<const double> m(mod);
  const auto pitch = resample_linear(m.subspan(0, grid), c.frames());
  const auto energy = resample_linear(m.subspan(grid, grid), c.frames());
  for (std::size_t k = 0; k < c.frames(); ++k) {
    c.f0[k] = c.f0[k] * (1.0 + control.delta_f0) + profile.f0_range * pitch[k];
    c.energy[k] = std::clamp(c.energy[k] * (1.0 + control.delta_e) +
                                 flow::kFineEnergyScale * energy[k],
                             0.0, 1.0);
  }
  return c;
}

SynthesisTrace infer(const corpus::PersonaConfig& persona, const corpus::Utterance& utterance,
                     const Models& models, const ReferenceLibrary& library,
                     const std::map<std::string, Voice>& voices, std::uint64_t seed,
                     const PipelineConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  SynthesisTrace tr;
  tr.utterance_id = utterance.utterance_id;
  tr.character_id = persona.character_id;

  auto t0 = Clock::now();
  const auto out = models.adapter.run(persona, utterance.token_ids);
  tr.control = out.control;
  tr.p_hat = out.p_hat;
  tr.timing_ms["adapter"] = ms_since(t0);

  t0 = Clock::now();
  const auto pred = models.flow.predict(out, utterance.token_ids, Rng::derive(seed, "flow"));
  tr.coarse = pred.coarse;
  tr.fine = pred.fine;
  tr.timing_ms["flow"] = ms_since(t0);

  t0 = Clock::now();
  const auto refs = library.character(persona.character_id);
  if (refs.empty()) throw ConfigError("no reference clips for character " + persona.character_id);
  for (std::size_t k = 0; k < 3; ++k)
    tr.vad_target[k] = cfg.vad_source == VadSource::kFlow ? pred.coarse[k] : out.p_hat[k];
  std::size_t ref = 0;
  if (cfg.reference_mode == ReferenceMode::kNearest) {
    ref = select_reference(refs, tr.vad_target);
  } else {
    Rng rng(Rng::derive(seed, "random-reference"));
    ref = rng.below(refs.size());
  }
  tr.selected_ref = refs[ref].clip_id;
  tr.timing_ms["reference"] = ms_since(t0);

  t0 = Clock::now();
  auto voice = voices.find(persona.character_id);
  if (voice == voices.end()) throw ConfigError("no timbre code for character " + persona.character_id);
  tr.timbre = voice->second.code;
  tr.timing_ms["timbre"] = ms_since(t0);

  t0 = Clock::now();
  std::size_t tokens = 0;
  for (int t : utterance.token_ids)
    if (t != corpus::vocab::kPad) ++tokens;
  tr.contour = fuse_and_render(tokens, voice->second.profile, persona.speech_pattern, tr.control,
                               tr.fine, refs[ref], Rng::derive(seed, "render"), cfg);
  tr.timing_ms["render"] = ms_since(t0);
  return tr;
}

json trace_json(const SynthesisTrace& t, bool with_timing) {
  json j{{"utterance_id", t.utterance_id},
         {"character_id", t.character_id},
         {"control",
          {{"delta_f0", t.control.delta_f0},
           {"delta_e", t.control.delta_e},
           {"duration_scale", t.control.duration_scale},
           {"pause_scale", t.control.pause_scale}}},
         {"p_hat", t.p_hat},
         {"coarse", t.coarse},
         {"fine", t.fine},
         {"vad_target", t.vad_target},
         {"selected_ref", t.selected_ref},
         {"timbre", {{"indices", t.timbre.indices}, {"quantized", t.timbre.quantized}}},
         {"contour", corpus::to_json(t.contour)}};
  if (with_timing) j["timing_ms"] = t.timing_ms;
  return j;
}

std::string contour_csv(const corpus::Contour& c) {
  std::ostringstream out;
  out << "frame,f0,energy\n";
  for (std::size_t k = 0; k < c.frames(); ++k)
    out << fmt::format("{},{:.6f},{:.6f}\n", k, c.f0[k], c.energy[k]);
  return out.str();
}

std::string contour_svg(const std::vector<std::pair<std::string, corpus::Contour>>& curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  constexpr double kW = 800.0, kH = 300.0, kPad = 40.0;
  std::size_t frames = 1;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [name, c] : curves) {
    frames = std::max(frames, c.frames());
    for (double v : c.f0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  std::ostringstream out;
  out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">)", kW, kH)
      << "\n";
  out << fmt::format(R"(<text x="{}" y="20" font-size="12">F0 (Hz), {:.1f} to {:.1f}</text>)", kPad,
                     lo, hi)
      << "\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& [name, c] = curves[i];
    const char* color = kColors[i % std::size(kColors)];
    out << R"(<polyline fill="none" stroke=")" << color << R"(" points=")";
    for (std::size_t k = 0; k < c.frames(); ++k) {
      const double x = kPad + (kW - 2 * kPad) * static_cast<double>(k) / static_cast<double>(frames);
      const double y = kH - kPad - (kH - 2 * kPad) * (c.f0[k] - lo) / (hi - lo);
      out << fmt::format("{:.1f},{:.1f} ", x, y);
    }
    out << "\"/>\n";
    out << fmt::format(R"(<text x="{}" y="{}" font-size="12" fill="{}">{}</text>)",
                       kW - 3 * kPad - 60, 20 + 14 * i, color, name)
        << "\n";
  }
  out << "</svg>\n";
  return out.str();
}

void save_models(const Models& m, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  nk::save_checkpoint((d / "adapter.dtck").string(), m.adapter.to_checkpoint());
  nk::save_checkpoint((d / "flow.dtck").string(), m.flow.to_checkpoint());
  nk::save_checkpoint((d / "timbre.dtck").string(), m.timbre.to_checkpoint());
  corpus::write_text_file((d / "codebook.json").string(), timbre::to_json(m.codebook).dump() + "\n");
}

Models load_models(const std::string& dir) {
  const std::filesystem::path d(dir);
  for (const char* f : {"adapter.dtck", "flow.dtck", "timbre.dtck", "codebook.json"}) {
    if (!std::filesystem::exists(d / f))
      throw UsageError("model directory " + dir + " is missing " + f);
  }
  Models m;
  m.adapter = adapter::Adapter::from_checkpoint(nk::load_checkpoint((d / "adapter.dtck").string()));
  m.flow = flow::ProsodyFlow::from_checkpoint(nk::load_checkpoint((d / "flow.dtck").string()));
  m.timbre = timbre::TimbreEncoder::from_checkpoint(nk::load_checkpoint((d / "timbre.dtck").string()));
  json cb;
  try {
    cb = json::parse(corpus::read_text_file((d / "codebook.json").string()));
  } catch (const json::exception&) {
    throw DataError("codebook.json is not valid JSON");
  }
  m.codebook = timbre::codebook_from_json(cb);
  return m;
}

}  // namespace duotrack::pipeline
