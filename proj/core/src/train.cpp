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

#include "mmvc/train.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <utility>

#include <json.hpp>

#include "mmvc/datasynth.hpp"
#include "mmvc/losses.hpp"
#include "mmvc/schedule.hpp"
#include "mmvc/tape.hpp"

namespace mmvc {

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw IoError("write failed on '" + path + "'");
}

}  // namespace

template <class T>
Model<T>::Model(const EncoderConfig& ec, const GraphConfig& gc, uint64_t seed) {
  Rng rng(seed);
  encoders = Encoders<T>(ec, rng);
  graph = ModalityGraph<T>(gc, ec.d_v, ec.d_a, ec.d_t, rng);
}

template <class T>
void Model<T>::register_params(ParamMap<T>& pm) {
  encoders.register_params(pm);
  graph.register_params(pm);
}

template <class T>
Checkpoint model_checkpoint(Model<T>& model, const Adam<T>& opt, const RunConfig& cfg,
                            int64_t step, const Rng& rng) {
  ParamMap<T> pm;
  model.register_params(pm);
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(resolved_config_json(cfg));
  meta["step"] = step;
  meta["adam_t"] = opt.steps_taken();
  meta["rng"] = rng.serialize();
  Checkpoint c;
  c.config_json = meta.dump(2) + "\n";
  pack_params(pm, &c, "param.");
  for (const auto& slot : opt.slots()) {
    pack_vector(slot.m, "opt.m." + slot.name, &c);
    pack_vector(slot.v, "opt.v." + slot.name, &c);
  }
  return c;
}

template <class T>
void restore_model(const Checkpoint& c, Model<T>* model) {
  ParamMap<T> pm;
  model->register_params(pm);
  unpack_params(c, pm, "param.");
}

template <class T>
TrainResult<T> run_training(const RunConfig& cfg) {
  cfg.validate();  // Surface config problems before step 0.
  const std::string run_dir = run_directory(cfg);
  std::filesystem::create_directories(run_dir);
  write_text_file(run_dir + "/config_resolved.json", resolved_config_json(cfg));

  Model<T> model(cfg.encoder, cfg.graph, cfg.seed);
  ParamMap<T> pm;
  model.register_params(pm);
  Adam<T> adam(pm);

  std::vector<MultimodalSample<T>> corpus;
  if (!cfg.corpus_path.empty()) {
    corpus = load_corpus<T>(cfg.corpus_path);
    if (corpus.empty()) throw IoError("corpus '" + cfg.corpus_path + "' is empty");
  }

  // Independent deterministic streams: one seed feeds the per-index sample
  // generator, another the augmentation draws.
  Rng seeder(cfg.seed);
  const uint64_t data_seed = seeder.next_u64();
  Rng aug_rng(seeder.next_u64());

  std::ofstream csv(run_dir + "/metrics.csv", std::ios::binary);
  if (!csv) throw IoError("cannot open metrics.csv in '" + run_dir + "'");
  csv << "step,lr,loss_total,loss_va,loss_vt\n";
  csv << std::setprecision(17);

  TrainResult<T> result;
  result.run_dir = run_dir;
  const int64_t steps = cfg.schedule.total_steps;
  for (int64_t step = 0; step < steps; ++step) {
    std::vector<MultimodalSample<T>> raw;
    raw.reserve(static_cast<size_t>(cfg.batch_size));
    for (int64_t i = 0; i < cfg.batch_size; ++i) {
      const int64_t index = step * cfg.batch_size + i;
      MultimodalSample<T> s =
          corpus.empty() ? generate_sample<T>(cfg.world, data_seed, index)
                         : corpus[static_cast<size_t>(index % static_cast<int64_t>(corpus.size()))];
      raw.push_back(augment(s, cfg.augment, aug_rng));
    }

    Tape<T> tape;
    TapeScope<T> scope(tape);
    ContrastiveBatch<T> batch = make_batch(raw, model.encoders, model.graph, /*train=*/true);
    CombinedLossResult<T> loss = combined_loss(batch, cfg.loss);
    backward(tape, loss.total);
    const double lr = lr_at(cfg.schedule, step);
    adam.step(pm, tape, lr);

    MetricsRow row{step, lr, static_cast<double>(loss.total.item()),
                   static_cast<double>(loss.va.item()), static_cast<double>(loss.vt.item())};
    if (step == 0) result.step0_loss = row.loss_total;
    if (step % cfg.log_every == 0 || step + 1 == steps) {
      result.metrics.push_back(row);
      csv << row.step << ',' << row.lr << ',' << row.loss_total << ',' << row.loss_va << ','
          << row.loss_vt << '\n';
    }
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < steps) {
      Checkpoint c = model_checkpoint(model, adam, cfg, step + 1, aug_rng);
      save_checkpoint(c, run_dir + "/ckpt_" + std::to_string(step + 1) + ".mmvc");
    }
  }
  csv.flush();
  if (!csv) throw IoError("write failed on metrics.csv in '" + run_dir + "'");

  Checkpoint final_ckpt = model_checkpoint(model, adam, cfg, steps, aug_rng);
  result.final_checkpoint_path = run_dir + "/ckpt_final.mmvc";
  save_checkpoint(final_ckpt, result.final_checkpoint_path);
  result.model = std::move(model);
  return result;
}

#define MMVC_INSTANTIATE_TRAIN(T)                                                          \
  template struct Model<T>;                                                                \
  template Checkpoint model_checkpoint<T>(Model<T>&, const Adam<T>&, const RunConfig&,     \
                                          int64_t, const Rng&);                            \
  template void restore_model<T>(const Checkpoint&, Model<T>*);                            \
  template TrainResult<T> run_training<T>(const RunConfig&);

MMVC_INSTANTIATE_TRAIN(float)
MMVC_INSTANTIATE_TRAIN(double)

#undef MMVC_INSTANTIATE_TRAIN

}  // namespace mmvc
