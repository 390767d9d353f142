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

// Command-line front end. Exit codes: 0 success, 1 config/validation
// problem, 2 runtime problem, 3 numeric check failure.

#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmvc/checkpoint.hpp"
#include "mmvc/config.hpp"
#include "mmvc/datasynth.hpp"
#include "mmvc/deflation.hpp"
#include "mmvc/eval.hpp"
#include "mmvc/gradcheck.hpp"
#include "mmvc/train.hpp"

namespace {

using namespace mmvc;

RunConfig build_config(const std::string& config_path, const std::string& preset,
                       const std::vector<std::string>& overrides) {
  if (!config_path.empty() && !preset.empty()) {
    throw ConfigError("--config and --preset are mutually exclusive");
  }
  RunConfig cfg;
  if (!preset.empty()) {
    cfg = preset_run_config(preset);
  } else if (!config_path.empty()) {
    cfg = load_run_config(config_path);
  }
  for (const std::string& o : overrides) apply_override(&cfg, o);
  return cfg;
}

// Stacks rank-1 rows of equal length into [N, d].
Tensor<float> stack_rows(const std::vector<Tensor<float>>& rows) {
  check_shape(!rows.empty(), "stack_rows: empty list");
  const int64_t d = rows[0].size();
  Tensor<float> out = Tensor<float>::zeros({static_cast<int64_t>(rows.size()), d});
  float* p = out.mutable_data();
  for (size_t i = 0; i < rows.size(); ++i) {
    check_shape(rows[i].size() == d, "stack_rows: ragged rows");
    std::memcpy(p + static_cast<int64_t>(i) * d, rows[i].ptr(), sizeof(float) * d);
  }
  return out;
}

Tensor<float> stack_waves(const std::vector<MultimodalSample<float>>& samples) {
  std::vector<Tensor<float>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(s.audio.samples);
  return stack_rows(rows);
}

// Checkpoint -> (run config, model with restored parameters).
RunConfig restore_from_checkpoint(const std::string& path, Model<float>* model) {
  const Checkpoint ckpt = load_checkpoint(path);
  nlohmann::json meta = nlohmann::json::parse(ckpt.config_json, nullptr,
                                              /*allow_exceptions=*/false);
  if (meta.is_discarded() || !meta.contains("config")) {
    throw IoError("checkpoint '" + path + "' has no config snapshot");
  }
  RunConfig cfg = parse_run_config(meta.at("config").dump());
  *model = Model<float>(cfg.encoder, cfg.graph, cfg.seed);
  restore_model(ckpt, model);
  return cfg;
}

Tensor<float> video_feature(Encoders<float>& enc, const Tensor<float>& video, int64_t n_clips) {
  const int64_t side = enc.cfg.clip_h > 0 ? enc.cfg.clip_h : video.dim(1);
  const int64_t clip_len = enc.cfg.clip_t > 0 ? enc.cfg.clip_t : video.dim(0);
  return clip_averaged_embedding(center_crop_clip(video, side), clip_len, n_clips, enc);
}

int cmd_train(const RunConfig& cfg) {
  TrainResult<float> result = run_training<float>(cfg);
  const MetricsRow& last = result.metrics.back();
  std::cout << "run_dir " << result.run_dir << "\n"
            << "checkpoint " << result.final_checkpoint_path << "\n"
            << std::setprecision(6) << "loss_step0 " << result.step0_loss << "\n"
            << "loss_final " << last.loss_total << "\n";
  return 0;
}

int cmd_gen_data(const RunConfig& cfg, int64_t n, const std::string& out) {
  cfg.world.validate();
  std::vector<MultimodalSample<float>> samples = generate<float>(cfg.world, cfg.seed, n);
  save_corpus(out, samples);
  std::cout << "wrote " << n << " samples to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& task, const std::string& out_path,
             int64_t n_train, int64_t gallery, int64_t n_clips, uint64_t seed) {
  Model<float> model;
  RunConfig cfg = restore_from_checkpoint(ckpt_path, &model);

  // Evaluation draws from an aligned, fully-texted variant of the run's
  // world so every sample has a usable narration.
  WorldSpec world = cfg.world;
  world.p_mis = 0.0;
  world.missing_text = 0.0;

  std::vector<std::pair<std::string, double>> rows;
  if (task == "probe-video" || task == "probe-audio") {
    const int64_t n_val = n_train / 2, n_test = n_train;
    const int64_t total = n_train + n_val + n_test;
    std::vector<MultimodalSample<float>> samples = generate<float>(world, seed, total);

    std::vector<Tensor<float>> feats;
    feats.reserve(static_cast<size_t>(total));
    if (task == "probe-video") {
      for (const auto& s : samples) {
        feats.push_back(video_feature(model.encoders, s.video.frames, n_clips));
      }
    } else {
      Tensor<float> reps = model.encoders.encode_audio_batch(stack_waves(samples), false);
      for (int64_t i = 0; i < total; ++i) {
        feats.push_back(slice(reps, 0, i, 1).clone());
        feats.back() = reshape(feats.back(), {feats.back().size()});
      }
    }
    ProbeData<float> data;
    std::vector<Tensor<float>> tr(feats.begin(), feats.begin() + n_train);
    std::vector<Tensor<float>> va(feats.begin() + n_train, feats.begin() + n_train + n_val);
    std::vector<Tensor<float>> te(feats.begin() + n_train + n_val, feats.end());
    data.x_train = stack_rows(tr);
    data.x_val = stack_rows(va);
    data.x_test = stack_rows(te);
    for (int64_t i = 0; i < total; ++i) {
      const int64_t y = samples[static_cast<size_t>(i)].class_label;
      if (i < n_train) {
        data.y_train.push_back(y);
      } else if (i < n_train + n_val) {
        data.y_val.push_back(y);
      } else {
        data.y_test.push_back(y);
      }
    }
    ProbeResult res = linear_probe(data, world.num_classes, cfg.probe);
    rows.emplace_back("accuracy", res.accuracy);
    rows.emplace_back("best_l2", res.best_l2);
    for (size_t i = 0; i < res.val_accuracies.size(); ++i) {
      rows.emplace_back("val_accuracy_" + std::to_string(i), res.val_accuracies[i]);
    }
  } else if (task == "retrieval-t2v" || task == "retrieval-t2a") {
    std::vector<MultimodalSample<float>> samples = generate<float>(world, seed, gallery);
    std::vector<TokenSeq> queries;
    for (const auto& s : samples) {
      queries.push_back(s.text_candidates[static_cast<size_t>(s.aligned_candidate)]);
    }
    SpaceId space = SpaceId::kVat;
    if (task == "retrieval-t2v") {
      space = vt_loss_space(cfg.graph.topology);
    } else if (cfg.graph.topology == Topology::kDisjoint) {
      // Audio reaches only the VA space and text only the VT space there.
      throw TopologyError("retrieval-t2a: the disjoint topology has no shared audio-text space");
    }
    Tensor<float> zt = model.graph.project_batch(
        model.encoders.encode_text_batch(queries, false), Modality::kT, space, false);
    Tensor<float> gallery_reps;
    if (task == "retrieval-t2v") {
      std::vector<Tensor<float>> feats;
      for (const auto& s : samples) {
        feats.push_back(video_feature(model.encoders, s.video.frames, n_clips));
      }
      gallery_reps = model.graph.project_batch(stack_rows(feats), Modality::kV, space, false);
    } else {
      gallery_reps = model.graph.project_batch(
          model.encoders.encode_audio_batch(stack_waves(samples), false), Modality::kA, space,
          false);
    }
    std::vector<int64_t> gt(static_cast<size_t>(gallery));
    for (int64_t i = 0; i < gallery; ++i) gt[static_cast<size_t>(i)] = i;
    RetrievalResult res = zero_shot_retrieval(zt, space, gallery_reps, space, gt, {1, 5, 10});
    for (const auto& [k, frac] : res.recall_at) {
      rows.emplace_back("r_at_" + std::to_string(k), frac);
    }
    rows.emplace_back("median_rank", res.median_rank);
  } else {
    throw ConfigError("unknown eval task '" + task + "'");
  }

  const std::string out = out_path.empty() ? "eval_" + task + ".csv" : out_path;
  write_metrics_csv(out, rows);
  for (const auto& [name, value] : rows) {
    std::cout << name << " " << std::setprecision(6) << value << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_deflate(const std::string& ckpt_path, const std::string& method_name,
                const std::string& out_path, int64_t images, int64_t epochs, uint64_t seed) {
  Model<float> model;
  RunConfig cfg = restore_from_checkpoint(ckpt_path, &model);

  WorldSpec world = cfg.world;
  std::vector<MultimodalSample<float>> samples = generate<float>(world, seed, images);
  const int64_t h = world.height, w = world.width;
  Tensor<float> calib = Tensor<float>::zeros({images, h, w, 3});
  float* cp = calib.mutable_data();
  const int64_t frame = h * w * 3;
  for (int64_t i = 0; i < images; ++i) {
    // Frame 0 of each synthesized video serves as a calibration image.
    std::memcpy(cp + i * frame, samples[static_cast<size_t>(i)].video.frames.ptr(),
                sizeof(float) * static_cast<size_t>(frame));
  }

  DeflationJob<float> job;
  job.method = parse_deflation_method(method_name);
  job.calibration_images = calib;
  job.static_video_length = cfg.encoder.clip_t > 0 ? cfg.encoder.clip_t : world.frames;
  job.epochs = epochs;
  job.seed = seed;
  RecalibrationResult<float> res = recalibrate(model.encoders, job);

  const std::string out = out_path.empty() ? ckpt_path + ".deflated" : out_path;
  ParamMap<float> pm;
  res.encoder.register_params(pm, "deflated");
  Checkpoint ckpt;
  nlohmann::json meta;
  meta["deflation"] = {{"method", deflation_method_name(job.method)},
                       {"naive_l1", res.naive_l1},
                       {"final_l1", res.final_l1},
                       {"source_checkpoint", ckpt_path}};
  ckpt.config_json = meta.dump(2) + "\n";
  pack_params(pm, &ckpt, "param.");
  save_checkpoint(ckpt, out);
  write_metrics_csv(out + ".report.csv",
                    {{"naive_l1", res.naive_l1}, {"final_l1", res.final_l1}});

  std::cout << std::setprecision(6) << "naive_l1 " << res.naive_l1 << "\n"
            << "final_l1 " << res.final_l1 << "\n"
            << "wrote " << out << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& scope, int seeds, double eps) {
  const char* env = std::getenv("MMVC_GRADCHECK_CORRUPT");
  const double corrupt = (env != nullptr && env[0] != '\0') ? std::strtod(env, nullptr) : 0.0;

  std::vector<GradCheckReport> reports;
  auto append = [&reports](std::vector<GradCheckReport> r) {
    for (auto& x : r) reports.push_back(std::move(x));
  };
  if (scope == "ops" || scope == "all") append(gradcheck_ops(seeds, eps, corrupt));
  if (scope == "losses" || scope == "all") append(gradcheck_losses(seeds, eps, corrupt));
  if (scope == "end-to-end" || scope == "all") append(gradcheck_end_to_end(seeds, eps, corrupt));
  if (reports.empty()) throw ConfigError("unknown gradcheck scope '" + scope + "'");

  bool ok = true;
  for (const auto& r : reports) {
    const bool pass = r.max_rel_err < kGradCheckTol;
    ok = ok && pass;
    std::cout << std::left << std::setw(26) << r.name << std::scientific
              << std::setprecision(3) << r.max_rel_err << (pass ? "  PASS" : "  FAIL") << "\n";
  }
  return ok ? 0 : 3;
}

int dispatch(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const TopologyError& e) {
    std::cerr << "topology error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const UnknownOpError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NonFiniteError& e) {
    std::cerr << "numeric check failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal contrastive training toolkit"};
  app.require_subcommand(1);

  std::string config_path, preset;
  std::vector<std::string> overrides;
  auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config overlaying the defaults");
    sub->add_option("--preset", preset, "named preset: ht-like | ht+as-like");
    sub->add_option("--set", overrides, "dotted-key override, e.g. graph.topology=fac");
  };

  CLI::App* train = app.add_subcommand("train", "run the contrastive training loop");
  add_config_flags(train);

  CLI::App* gen = app.add_subcommand("gen-data", "synthesize a corpus file");
  add_config_flags(gen);
  int64_t gen_n = 0;
  std::string gen_out;
  gen->add_option("--n", gen_n, "sample count")->required();
  gen->add_option("--out", gen_out, "output corpus path")->required();

  CLI::App* eval = app.add_subcommand("eval", "probe / retrieval evaluation of a checkpoint");
  std::string eval_ckpt, eval_task, eval_out;
  int64_t eval_n = 240, eval_gallery = 64, eval_clips = 3;
  uint64_t eval_seed = 100;
  eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint path")->required();
  eval->add_option("--task", eval_task,
                   "probe-video | probe-audio | retrieval-t2v | retrieval-t2a")
      ->required();
  eval->add_option("--out", eval_out, "metrics CSV path (default eval_<task>.csv)");
  eval->add_option("--n", eval_n, "probe train-split size (val/test derive from it)");
  eval->add_option("--gallery", eval_gallery, "retrieval gallery size");
  eval->add_option("--clips", eval_clips, "test-time clips averaged per video");
  eval->add_option("--seed", eval_seed, "evaluation data seed");

  CLI::App* deflate = app.add_subcommand("deflate", "turn a video net into an image net");
  std::string defl_ckpt, defl_method = "recalibrated", defl_out;
  int64_t defl_images = 64, defl_epochs = 100;
  uint64_t defl_seed = 7;
  deflate->add_option("--checkpoint", defl_ckpt, "trained checkpoint path")->required();
  deflate->add_option("--method", defl_method, "naive | recalibrated");
  deflate->add_option("--out", defl_out, "deflated checkpoint path");
  deflate->add_option("--images", defl_images, "calibration image count");
  deflate->add_option("--epochs", defl_epochs, "recalibration epochs");
  deflate->add_option("--seed", defl_seed, "calibration data seed");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_scope = "all";
  int gc_seeds = 20;
  double gc_eps = 1e-5;
  gc->add_option("--scope", gc_scope, "ops | losses | end-to-end | all");
  gc->add_option("--seeds", gc_seeds, "random draws per case");
  gc->add_option("--eps", gc_eps, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (train->parsed()) {
    return dispatch([&] { return cmd_train(build_config(config_path, preset, overrides)); });
  }
  if (gen->parsed()) {
    return dispatch(
        [&] { return cmd_gen_data(build_config(config_path, preset, overrides), gen_n, gen_out); });
  }
  if (eval->parsed()) {
    return dispatch([&] {
      return cmd_eval(eval_ckpt, eval_task, eval_out, eval_n, eval_gallery, eval_clips, eval_seed);
    });
  }
  if (deflate->parsed()) {
    return dispatch([&] {
      return cmd_deflate(defl_ckpt, defl_method, defl_out, defl_images, defl_epochs, defl_seed);
    });
  }
  if (gc->parsed()) {
    return dispatch([&] { return cmd_gradcheck(gc_scope, gc_seeds, gc_eps); });
  }
  return 1;
}
