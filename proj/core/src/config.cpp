// Copyright 2026 The mmvc Authors.
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

#include "mmvc/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace mmvc {

namespace {

using nlohmann::json;

const char* arch_name(VideoArch a) {
  return a == VideoArch::kConv3dMini ? "conv3d-mini" : "shift-mini";
}

VideoArch parse_arch(const std::string& s) {
  if (s == "conv3d-mini") return VideoArch::kConv3dMini;
  if (s == "shift-mini") return VideoArch::kShiftMini;
  throw ConfigError("unknown video arch '" + s + "' (expected conv3d-mini|shift-mini)");
}

const char* pad_name(Pad p) { return p == Pad::kZero ? "zero" : "valid"; }

Pad parse_pad(const std::string& s) {
  if (s == "zero") return Pad::kZero;
  if (s == "valid") return Pad::kValid;
  throw ConfigError("unknown padding '" + s + "' (expected zero|valid)");
}

// Object reader that remembers which keys were consumed and rejects the
// rest, so misspelled keys fail instead of silently keeping defaults.
class Reader {
 public:
  Reader(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) {
      throw ConfigError("config section '" + ctx_ + "' must be a JSON object");
    }
  }

  template <class T>
  void get(const char* key, T* out) {
    mark(key);
    if (!j_.contains(key)) return;
    try {
      *out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + path(key) + "': " + e.what());
    }
  }

  template <class E, class ParseFn>
  void get_parsed(const char* key, E* out, ParseFn parse) {
    std::string s;
    bool present = false;
    mark(key);
    if (j_.contains(key)) {
      try {
        s = j_.at(key).get<std::string>();
        present = true;
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + path(key) + "': " + e.what());
      }
    }
    if (present) *out = parse(s);
  }

  const json* child(const char* key) {
    mark(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& kv : j_.items()) {
      bool known = false;
      for (const auto& k : seen_) {
        if (k == kv.key()) {
          known = true;
          break;
        }
      }
      if (!known) throw ConfigError("unknown config key '" + path(kv.key()) + "'");
    }
  }

 private:
  void mark(const char* key) { seen_.emplace_back(key); }
  std::string path(const std::string& key) const {
    return ctx_.empty() ? key : ctx_ + "." + key;
  }

  const json& j_;
  std::string ctx_;
  std::vector<std::string> seen_;
};

json world_to_json(const WorldSpec& w) {
  return json{{"num_classes", w.num_classes},
              {"frames", w.frames},
              {"height", w.height},
              {"width", w.width},
              {"fps", w.fps},
              {"audio_seconds", w.audio_seconds},
              {"sample_rate", w.sample_rate},
              {"harmonics", w.harmonics},
              {"base_freq", w.base_freq},
              {"peak_amplitude", w.peak_amplitude},
              {"gen_noise_std", w.gen_noise_std},
              {"vocab_size", w.vocab_size},
              {"min_words", w.min_words},
              {"max_words", w.max_words},
              {"class_word_prob", w.class_word_prob},
              {"candidates", w.candidates},
              {"p_mis", w.p_mis},
              {"missing_text", w.missing_text}};
}

void world_from_json(const json& j, const std::string& ctx, WorldSpec* w) {
  Reader r(j, ctx);
  r.get("num_classes", &w->num_classes);
  r.get("frames", &w->frames);
  r.get("height", &w->height);
  r.get("width", &w->width);
  r.get("fps", &w->fps);
  r.get("audio_seconds", &w->audio_seconds);
  r.get("sample_rate", &w->sample_rate);
  r.get("harmonics", &w->harmonics);
  r.get("base_freq", &w->base_freq);
  r.get("peak_amplitude", &w->peak_amplitude);
  r.get("gen_noise_std", &w->gen_noise_std);
  r.get("vocab_size", &w->vocab_size);
  r.get("min_words", &w->min_words);
  r.get("max_words", &w->max_words);
  r.get("class_word_prob", &w->class_word_prob);
  r.get("candidates", &w->candidates);
  r.get("p_mis", &w->p_mis);
  r.get("missing_text", &w->missing_text);
  r.finish();
}

json augment_to_json(const AugmentConfig& a) {
  return json{{"out_frames", a.out_frames},
              {"crop", a.crop},
              {"resize_min", a.resize_min},
              {"scale_min", a.scale_min},
              {"scale_max", a.scale_max},
              {"flip_prob", a.flip_prob},
              {"brightness_delta", a.brightness_delta},
              {"saturation_delta", a.saturation_delta},
              {"contrast_delta", a.contrast_delta},
              {"hue_delta", a.hue_delta},
              {"audio_noise_var_scale", a.audio_noise_var_scale},
              {"audio_offset_sec", a.audio_offset_sec},
              {"audio_window_samples", a.audio_window_samples}};
}

void augment_from_json(const json& j, const std::string& ctx, AugmentConfig* a) {
  Reader r(j, ctx);
  r.get("out_frames", &a->out_frames);
  r.get("crop", &a->crop);
  r.get("resize_min", &a->resize_min);
  r.get("scale_min", &a->scale_min);
  r.get("scale_max", &a->scale_max);
  r.get("flip_prob", &a->flip_prob);
  r.get("brightness_delta", &a->brightness_delta);
  r.get("saturation_delta", &a->saturation_delta);
  r.get("contrast_delta", &a->contrast_delta);
  r.get("hue_delta", &a->hue_delta);
  r.get("audio_noise_var_scale", &a->audio_noise_var_scale);
  r.get("audio_offset_sec", &a->audio_offset_sec);
  r.get("audio_window_samples", &a->audio_window_samples);
  r.finish();
}

json mel_to_json(const LogMelConfig& m) {
  return json{{"n_bins", m.n_bins},
              {"window_ms", m.window_ms},
              {"hop_ms", m.hop_ms},
              {"fmin_hz", m.fmin_hz},
              {"power_floor", m.power_floor}};
}

void mel_from_json(const json& j, const std::string& ctx, LogMelConfig* m) {
  Reader r(j, ctx);
  r.get("n_bins", &m->n_bins);
  r.get("window_ms", &m->window_ms);
  r.get("hop_ms", &m->hop_ms);
  r.get("fmin_hz", &m->fmin_hz);
  r.get("power_floor", &m->power_floor);
  r.finish();
}

json encoder_to_json(const EncoderConfig& e) {
  return json{{"video_arch", arch_name(e.video_arch)},
              {"d_v", e.d_v},
              {"d_a", e.d_a},
              {"d_t", e.d_t},
              {"video_widths", e.video_widths},
              {"audio_widths", e.audio_widths},
              {"video_kernel_t", e.video_kernel_t},
              {"video_temporal_pad", pad_name(e.video_temporal_pad)},
              {"video_use_bn", e.video_use_bn},
              {"shift_fraction", e.shift_fraction},
              {"vocab_size", e.vocab_size},
              {"word_dim", e.word_dim},
              {"embedding_seed", e.embedding_seed},
              {"clip_t", e.clip_t},
              {"clip_h", e.clip_h},
              {"clip_w", e.clip_w},
              {"audio_samples", e.audio_samples},
              {"sample_rate", e.sample_rate},
              {"mel", mel_to_json(e.mel)}};
}

void encoder_from_json(const json& j, const std::string& ctx, EncoderConfig* e) {
  Reader r(j, ctx);
  r.get_parsed("video_arch", &e->video_arch, parse_arch);
  r.get("d_v", &e->d_v);
  r.get("d_a", &e->d_a);
  r.get("d_t", &e->d_t);
  r.get("video_widths", &e->video_widths);
  r.get("audio_widths", &e->audio_widths);
  r.get("video_kernel_t", &e->video_kernel_t);
  r.get_parsed("video_temporal_pad", &e->video_temporal_pad, parse_pad);
  r.get("video_use_bn", &e->video_use_bn);
  r.get("shift_fraction", &e->shift_fraction);
  r.get("vocab_size", &e->vocab_size);
  r.get("word_dim", &e->word_dim);
  r.get("embedding_seed", &e->embedding_seed);
  r.get("clip_t", &e->clip_t);
  r.get("clip_h", &e->clip_h);
  r.get("clip_w", &e->clip_w);
  r.get("audio_samples", &e->audio_samples);
  r.get("sample_rate", &e->sample_rate);
  if (const json* mel = r.child("mel")) mel_from_json(*mel, ctx + ".mel", &e->mel);
  r.finish();
}

json graph_to_json(const GraphConfig& g) {
  return json{{"topology", topology_name(g.topology)},
              {"d_va", g.d_va},
              {"d_vt", g.d_vt},
              {"d_vat", g.d_vat},
              {"video_head", head_kind_name(g.video_head)},
              {"audio_head", head_kind_name(g.audio_head)},
              {"text_head", head_kind_name(g.text_head)},
              {"fine_to_coarse_head", head_kind_name(g.fine_to_coarse_head)},
              {"head_hidden", g.head_hidden},
              {"normalize_fine_before_coarse", g.normalize_fine_before_coarse}};
}

void graph_from_json(const json& j, const std::string& ctx, GraphConfig* g) {
  Reader r(j, ctx);
  r.get_parsed("topology", &g->topology, parse_topology);
  r.get("d_va", &g->d_va);
  r.get("d_vt", &g->d_vt);
  r.get("d_vat", &g->d_vat);
  r.get_parsed("video_head", &g->video_head, parse_head_kind);
  r.get_parsed("audio_head", &g->audio_head, parse_head_kind);
  r.get_parsed("text_head", &g->text_head, parse_head_kind);
  r.get_parsed("fine_to_coarse_head", &g->fine_to_coarse_head, parse_head_kind);
  r.get("head_hidden", &g->head_hidden);
  r.get("normalize_fine_before_coarse", &g->normalize_fine_before_coarse);
  r.finish();
}

json loss_to_json(const LossConfig& l) {
  return json{{"lambda_va", l.lambda_va},
              {"lambda_vt", l.lambda_vt},
              {"tau", l.tau},
              {"loss_kind", loss_kind_name(l.loss_kind)},
              {"policy", negative_policy_name(l.policy)}};
}

void loss_from_json(const json& j, const std::string& ctx, LossConfig* l) {
  Reader r(j, ctx);
  r.get("lambda_va", &l->lambda_va);
  r.get("lambda_vt", &l->lambda_vt);
  r.get("tau", &l->tau);
  r.get_parsed("loss_kind", &l->loss_kind, parse_loss_kind);
  r.get_parsed("policy", &l->policy, parse_negative_policy);
  r.finish();
}

json schedule_to_json(const LrSchedule& s) {
  return json{{"base_lr", s.base_lr},
              {"warmup_steps", s.warmup_steps},
              {"total_steps", s.total_steps}};
}

void schedule_from_json(const json& j, const std::string& ctx, LrSchedule* s) {
  Reader r(j, ctx);
  r.get("base_lr", &s->base_lr);
  r.get("warmup_steps", &s->warmup_steps);
  r.get("total_steps", &s->total_steps);
  r.finish();
}

json probe_to_json(const ProbeConfig& p) {
  return json{{"l2_sweep", p.l2_sweep}, {"epochs", p.epochs}, {"lr", p.lr}};
}

void probe_from_json(const json& j, const std::string& ctx, ProbeConfig* p) {
  Reader r(j, ctx);
  r.get("l2_sweep", &p->l2_sweep);
  r.get("epochs", &p->epochs);
  r.get("lr", &p->lr);
  r.finish();
}

json to_json(const RunConfig& c) {
  return json{{"seed", c.seed},
              {"run_name", c.run_name},
              {"output_dir", c.output_dir},
              {"corpus_path", c.corpus_path},
              {"batch_size", c.batch_size},
              {"checkpoint_every", c.checkpoint_every},
              {"log_every", c.log_every},
              {"world", world_to_json(c.world)},
              {"augment", augment_to_json(c.augment)},
              {"encoder", encoder_to_json(c.encoder)},
              {"graph", graph_to_json(c.graph)},
              {"loss", loss_to_json(c.loss)},
              {"schedule", schedule_to_json(c.schedule)},
              {"probe", probe_to_json(c.probe)}};
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.get("seed", &c.seed);
  r.get("run_name", &c.run_name);
  r.get("output_dir", &c.output_dir);
  r.get("corpus_path", &c.corpus_path);
  r.get("batch_size", &c.batch_size);
  r.get("checkpoint_every", &c.checkpoint_every);
  r.get("log_every", &c.log_every);
  if (const json* s = r.child("world")) world_from_json(*s, "world", &c.world);
  if (const json* s = r.child("augment")) augment_from_json(*s, "augment", &c.augment);
  if (const json* s = r.child("encoder")) encoder_from_json(*s, "encoder", &c.encoder);
  if (const json* s = r.child("graph")) graph_from_json(*s, "graph", &c.graph);
  if (const json* s = r.child("loss")) loss_from_json(*s, "loss", &c.loss);
  if (const json* s = r.child("schedule")) schedule_from_json(*s, "schedule", &c.schedule);
  if (const json* s = r.child("probe")) probe_from_json(*s, "probe", &c.probe);
  r.finish();
  return c;
}

}  // namespace

void RunConfig::validate() const {
  world.validate();
  augment.validate();
  encoder.validate();
  graph.validate();
  loss.validate();
  schedule.validate();
  probe.validate();
  if (batch_size < 2) throw ConfigError("RunConfig: batch_size must be >= 2");
  if (checkpoint_every < 0) throw ConfigError("RunConfig: checkpoint_every must be >= 0");
  if (log_every < 1) throw ConfigError("RunConfig: log_every must be >= 1");
  // Cross-module geometry: the augmented clip must match what the encoders
  // expect, and world audio/text settings must agree with the encoder.
  if (encoder.vocab_size != world.vocab_size) {
    throw ConfigError("RunConfig: encoder.vocab_size differs from world.vocab_size");
  }
  if (encoder.sample_rate != world.sample_rate) {
    throw ConfigError("RunConfig: encoder.sample_rate differs from world.sample_rate");
  }
  const int64_t wave_len = static_cast<int64_t>(std::llround(world.audio_seconds * world.sample_rate));
  if (encoder.audio_samples > 0 && encoder.audio_samples != wave_len) {
    throw ConfigError("RunConfig: encoder.audio_samples differs from the world's wave length");
  }
  const int64_t clip_t = augment.out_frames > 0 ? augment.out_frames : world.frames;
  if (encoder.clip_t > 0 && encoder.clip_t != clip_t) {
    throw ConfigError("RunConfig: encoder.clip_t differs from the augmented frame count");
  }
  const int64_t side_h = augment.crop > 0 ? augment.crop : world.height;
  const int64_t side_w = augment.crop > 0 ? augment.crop : world.width;
  if (encoder.clip_h > 0 && (encoder.clip_h != side_h || encoder.clip_w != side_w)) {
    throw ConfigError("RunConfig: encoder clip geometry differs from the augmented crop");
  }
}

RunConfig preset_run_config(const std::string& name) {
  RunConfig c;
  if (name == "ht-like") {
    c.run_name = "ht-like";
    c.loss.lambda_va = 1.0;
    c.loss.lambda_vt = 10.0;
    c.world.missing_text = 0.0;
    return c;
  }
  if (name == "ht+as-like") {
    c.run_name = "ht+as-like";
    c.loss.lambda_va = 1.0;
    c.loss.lambda_vt = 1.0;
    c.world.missing_text = 0.5;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected ht-like|ht+as-like)");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  return from_json(j);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

void apply_override(RunConfig* cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  size_t pos = 0;
  while (true) {
    const size_t dot = key.find('.', pos);
    if (dot == std::string::npos) {
      parts.push_back(key.substr(pos));
      break;
    }
    parts.push_back(key.substr(pos, dot - pos));
    pos = dot + 1;
  }

  json doc = to_json(*cfg);
  json* node = &doc;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  json v = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) v = json(value);
  // A field that holds a string keeps the raw text even when it parses as a
  // number, so run_name=42 stays a name.
  if ((*node)[parts.back()].is_string() && !v.is_string()) v = json(value);
  (*node)[parts.back()] = v;
  *cfg = from_json(doc);
}

std::string resolved_config_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string output_root() {
  const char* env = std::getenv("MMVC_OUTPUT_ROOT");
  if (env != nullptr && env[0] != '\0') return env;
  return "runs";
}

std::string run_directory(const RunConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return output_root() + "/" + cfg.run_name;
}

}  // namespace mmvc
