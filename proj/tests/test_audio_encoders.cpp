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

// Audio front-end oracles (FFT vs naive DFT, mel geometry, spectrogram
// framing) and encoder consistency: batch rows equal single-sample encodes,
// and every encoder is deterministic in eval mode.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <mmvc/audio.hpp>
#include <mmvc/encoders.hpp>
#include <mmvc/ops.hpp>
#include <mmvc/rng.hpp>
#include <mmvc/tensor.hpp>

namespace {

using namespace mmvc;

Tensor<double> random_wave(int64_t n, Rng& rng) {
  Tensor<double> t(Shape{n});
  double* p = t.mutable_data();
  for (int64_t i = 0; i < n; ++i) p[i] = rng.uniform(-0.8, 0.8);
  return t;
}

EncoderConfig tiny_encoder_config() {
  EncoderConfig ec;
  ec.video_widths = {4, 8};
  ec.audio_widths = {4, 8};
  ec.d_v = ec.d_a = ec.d_t = 8;
  ec.word_dim = 8;
  ec.vocab_size = 16;
  ec.clip_t = 4;
  ec.clip_h = ec.clip_w = 8;
  ec.audio_samples = 1000;
  ec.sample_rate = 4000.0;
  ec.mel.n_bins = 8;
  return ec;
}

}  // namespace

TEST_CASE("mel scale maps round-trip") {
  for (double hz : {60.0, 440.0, 1000.0, 3999.0}) {
    CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-9));
  }
  CHECK(hz_to_mel(0.0) == doctest::Approx(0.0));
  // The mel scale is strictly increasing.
  CHECK(hz_to_mel(200.0) < hz_to_mel(300.0));
}

TEST_CASE("hann window is periodic, not symmetric") {
  const auto w = hann_window(8);
  CHECK(w[0] == doctest::Approx(0.0));
  // Periodic form peaks at n/2 and w[1] != w[n-1] would break symmetry;
  // the periodic window instead satisfies w[k] == w[n-k].
  CHECK(w[4] == doctest::Approx(1.0));
  for (int64_t k = 1; k < 8; ++k) {
    CHECK(w[static_cast<size_t>(k)] ==
          doctest::Approx(w[static_cast<size_t>(8 - k)]).epsilon(1e-12));
    const double want =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / 8.0));
    CHECK(w[static_cast<size_t>(k)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("radix-2 FFT matches the naive DFT") {
  Rng rng(601);
  const int64_t n = 64;
  std::vector<double> re(static_cast<size_t>(n)), im(static_cast<size_t>(n), 0.0);
  for (auto& v : re) v = rng.uniform(-1.0, 1.0);
  std::vector<double> fre = re, fim = im;
  fft_radix2(fre, fim);
  for (int64_t k = 0; k < n; ++k) {
    double sr = 0.0, si = 0.0;
    for (int64_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) /
                         static_cast<double>(n);
      sr += re[static_cast<size_t>(t)] * std::cos(ang);
      si += re[static_cast<size_t>(t)] * std::sin(ang);
    }
    CHECK(fre[static_cast<size_t>(k)] == doctest::Approx(sr).epsilon(1e-9));
    CHECK(fim[static_cast<size_t>(k)] == doctest::Approx(si).epsilon(1e-9));
  }
  std::vector<double> bad(6, 0.0);
  CHECK_THROWS_AS(fft_radix2(bad, bad), Error);
}

TEST_CASE("mel filterbank rows are non-negative and cover interior bins") {
  const int64_t nfft = 256;
  const auto fb = mel_filterbank(8, nfft, 4000.0, 60.0, 2000.0);
  REQUIRE(fb.size() == 8 * (nfft / 2 + 1));
  double total = 0.0;
  for (double v : fb) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total > 0.0);
  // Each filter has positive mass somewhere.
  for (int64_t b = 0; b < 8; ++b) {
    double row = 0.0;
    for (int64_t k = 0; k <= nfft / 2; ++k) row += fb[static_cast<size_t>(b * (nfft / 2 + 1) + k)];
    CHECK(row > 0.0);
  }
}

TEST_CASE("log_mel frame geometry and determinism") {
  LogMelConfig cfg;
  cfg.n_bins = 8;
  const double sr = 4000.0;
  // window 25 ms -> 100 samples, hop 10 ms -> 40 samples.
  Rng rng(602);
  Tensor<double> wave = random_wave(1000, rng);
  const Tensor<double> spec = log_mel(wave, sr, cfg);
  REQUIRE(spec.rank() == 2);
  CHECK(spec.dim(0) == 1 + (1000 - 100) / 40);
  CHECK(spec.dim(1) == 8);

  const Tensor<double> again = log_mel(wave, sr, cfg);
  for (int64_t i = 0; i < spec.size(); ++i) CHECK(spec.at(i) == again.at(i));

  // A pure tone inside the band raises energy over silence everywhere the
  // floor would otherwise dominate.
  Tensor<double> silence = Tensor<double>::zeros(Shape{1000});
  Tensor<double> tone(Shape{1000});
  for (int64_t i = 0; i < 1000; ++i) {
    tone.mutable_data()[i] =
        0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / sr);
  }
  const double es = sum_all(log_mel(silence, sr, cfg)).item();
  const double et = sum_all(log_mel(tone, sr, cfg)).item();
  CHECK(et > es);
}

TEST_CASE("token sequences truncate or pad to the fixed window") {
  std::vector<int64_t> many(30, 5);
  const TokenSeq long_seq = TokenSeq::from_words(many);
  REQUIRE(static_cast<int>(long_seq.ids.size()) == TokenSeq::kLen);
  for (int64_t id : long_seq.ids) CHECK(id == 5);

  const TokenSeq short_seq = TokenSeq::from_words({3, 1});
  REQUIRE(static_cast<int>(short_seq.ids.size()) == TokenSeq::kLen);
  CHECK(short_seq.ids[0] == 3);
  CHECK(short_seq.ids[1] == 1);
  for (size_t i = 2; i < short_seq.ids.size(); ++i) CHECK(short_seq.ids[i] == TokenSeq::kPadId);

  TokenSeq bad = short_seq;
  bad.ids[0] = 99;
  CHECK_THROWS_AS(bad.validate(16), Error);
}

TEST_CASE("single-sample encodes equal their batch rows") {
  const EncoderConfig ec = tiny_encoder_config();
  Rng rng(603);
  Encoders<double> enc(ec, rng);

  Rng drng(604);
  Tensor<double> clips(Shape{3, ec.clip_t, ec.clip_h, ec.clip_w, 3});
  for (int64_t i = 0; i < clips.size(); ++i) clips.mutable_data()[i] = drng.uniform(0.0, 1.0);
  Tensor<double> waves = Tensor<double>::zeros(Shape{3, ec.audio_samples});
  for (int64_t i = 0; i < waves.size(); ++i) waves.mutable_data()[i] = drng.uniform(-0.5, 0.5);
  std::vector<TokenSeq> tokens = {TokenSeq::from_words({1, 2, 3}),
                                  TokenSeq::from_words({4, 5}),
                                  TokenSeq::from_words({6})};

  const Tensor<double> vb = enc.encode_video_batch(clips, false);
  const Tensor<double> ab = enc.encode_audio_batch(waves, false);
  const Tensor<double> tb = enc.encode_text_batch(tokens, false);
  REQUIRE(vb.shape() == Shape{3, ec.d_v});
  REQUIRE(ab.shape() == Shape{3, ec.d_a});
  REQUIRE(tb.shape() == Shape{3, ec.d_t});

  for (int64_t i = 0; i < 3; ++i) {
    VideoClip<double> clip;
    clip.frames = reshape(slice(clips, 0, i, 1), Shape{ec.clip_t, ec.clip_h, ec.clip_w, 3});
    AudioWave<double> wave;
    wave.samples = reshape(slice(waves, 0, i, 1), Shape{ec.audio_samples});
    wave.sample_rate = ec.sample_rate;
    const Tensor<double> v1 = enc.encode_video(clip, false);
    const Tensor<double> a1 = enc.encode_audio(wave, false);
    const Tensor<double> t1 = enc.encode_text(tokens[static_cast<size_t>(i)], false);
    for (int64_t j = 0; j < ec.d_v; ++j) {
      CHECK(v1.at(j) == doctest::Approx(vb.at(i * ec.d_v + j)).epsilon(1e-10));
    }
    for (int64_t j = 0; j < ec.d_a; ++j) {
      CHECK(a1.at(j) == doctest::Approx(ab.at(i * ec.d_a + j)).epsilon(1e-10));
    }
    for (int64_t j = 0; j < ec.d_t; ++j) {
      CHECK(t1.at(j) == doctest::Approx(tb.at(i * ec.d_t + j)).epsilon(1e-10));
    }
  }
}

TEST_CASE("encoder geometry checks reject wrong input sizes") {
  const EncoderConfig ec = tiny_encoder_config();
  Rng rng(605);
  Encoders<double> enc(ec, rng);
  Tensor<double> bad_clip = Tensor<double>::zeros(Shape{1, 3, 8, 8, 3});  // T != clip_t
  CHECK_THROWS_AS(enc.encode_video_batch(bad_clip, false), ShapeError);
  Tensor<double> bad_wave = Tensor<double>::zeros(Shape{1, 999});
  CHECK_THROWS_AS(enc.encode_audio_batch(bad_wave, false), ShapeError);
}

TEST_CASE("word table round-trips through its file format") {
  Rng rng(606);
  Tensor<float> table(Shape{16, 8});
  for (int64_t i = 0; i < table.size(); ++i) {
    table.mutable_data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  const std::string path = "word_table_test.mmve";
  save_word_table(path, table);
  const Tensor<float> back = load_word_table(path);
  REQUIRE(back.shape() == table.shape());
  for (int64_t i = 0; i < table.size(); ++i) CHECK(back.at(i) == table.at(i));
  std::remove(path.c_str());
}

TEST_CASE("frozen word table is identical across encoder constructions") {
  EncoderConfig ec = tiny_encoder_config();
  Rng r1(607), r2(608);  // different encoder seeds
  Encoders<double> e1(ec, r1), e2(ec, r2);
  // The table derives from embedding_seed, not the construction rng.
  REQUIRE(e1.text.table.size() == e2.text.table.size());
  for (int64_t i = 0; i < e1.text.table.size(); ++i) {
    CHECK(e1.text.table.at(i) == e2.text.table.at(i));
  }
  // Changing embedding_seed changes the table.
  EncoderConfig ec2 = ec;
  ec2.embedding_seed = 4321;
  Rng r3(607);
  Encoders<double> e3(ec2, r3);
  bool any_diff = false;
  for (int64_t i = 0; i < e1.text.table.size() && !any_diff; ++i) {
    any_diff = e1.text.table.at(i) != e3.text.table.at(i);
  }
  CHECK(any_diff);
}

TEST_CASE("batch norm: train uses batch stats, eval uses moving stats") {
  BatchNorm<double> bn(3);
  Rng rng(609);
  Tensor<double> x(Shape{8, 3});
  for (int64_t i = 0; i < x.size(); ++i) x.mutable_data()[i] = rng.uniform(1.0, 3.0);

  const Tensor<double> yt = bn.forward(x, true);
  // Train output is standardized per channel: mean 0, population var ~1.
  for (int64_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (int64_t i = 0; i < 8; ++i) m += yt.at(i * 3 + c);
    m /= 8.0;
    for (int64_t i = 0; i < 8; ++i) {
      const double d = yt.at(i * 3 + c) - m;
      v += d * d;
    }
    v /= 8.0;
    CHECK(std::fabs(m) < 1e-10);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));  // epsilon in denominator
  }
  // Moving stats moved toward the batch stats.
  bool moved = false;
  for (int64_t c = 0; c < 3; ++c) moved = moved || bn.moving_mean.at(c) != 0.0;
  CHECK(moved);

  // Eval mode is an affine map: doubling the input doubles the centered output.
  const Tensor<double> y1 = bn.forward(x, false);
  const Tensor<double> y2 = bn.forward(x, false);
  for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.at(i) == y2.at(i));
}
