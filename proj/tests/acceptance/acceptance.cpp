// Acceptance checks. One PASS/FAIL/SKIP line per criterion; the exit status
// is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sess/backend.hpp"
#include "sess/geometry.hpp"
#include "sess/image_io.hpp"
#include "sess/imgproc.hpp"
#include "sess/metrics.hpp"
#include "sess/pipeline.hpp"
#include "sess/saliency_base.hpp"

namespace {

using namespace sess;
using Clock = std::chrono::steady_clock;

struct Outcome {
  enum Kind { kPass, kFail, kSkip } kind = kFail;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

float max_abs_diff(const GrayMap& a, const GrayMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) return INFINITY;
  float d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  }
  return d;
}

RasterImage bright_square(int h, int w, int sx, int sy, int side) {
  RasterImage img(h, w);
  for (int y = sy; y < sy + side; ++y) {
    for (int x = sx; x < sx + side; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0f;
    }
  }
  return img;
}

Outcome identity_reduction() {
  const auto mock = make_quadrant_mock();
  const auto base = make_occlusion_method({});
  SessConfig cfg;
  cfg.n_scales = 1;
  cfg.prefilter_ratio = 0;
  cfg.smoothing.enabled = false;
  cfg.target_class = 1;
  const auto img = bright_square(224, 224, 150, 30, 40);
  const auto t0 = Clock::now();
  const auto sess_map = run_sess(img, *mock, *base, cfg);
  const double secs = seconds_since(t0);
  const auto plain = minmax_normalize(base->extract(img, cfg.target_class, *mock, 0));
  const float d = max_abs_diff(sess_map, plain);
  const bool ok = d < 1e-6f && secs < 1.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "max|diff|=" + fmt("%.3g", d) + " runtime=" + fmt("%.3f", secs) + "s"};
}

// Every window origin, checked one position at a time.
std::size_t brute_force_windows(int side, int win, int step) {
  std::set<int> origins;
  for (int o = 0; o + win <= side; ++o) {
    if (o % step == 0) origins.insert(o);
  }
  if (side >= win) origins.insert(side - win);
  return origins.size() * origins.size();
}

Outcome geometry_suite() {
  std::vector<std::string> bad;
  for (int side : {224, 300, 517}) {
    std::size_t cumulative = 0;
    for (int n = 1; n <= 12; ++n) {
      cumulative += brute_force_windows(224 + 64 * (n - 1), 224, 224);
      const auto specs = enumerate_patches(side, side, n, 224, 224, 224);
      if (specs.size() != cumulative) {
        bad.push_back(std::to_string(side) + "/n=" + std::to_string(n) + ":" +
                      std::to_string(specs.size()) + "!=" + std::to_string(cumulative));
      }
    }
  }
  const std::size_t c1 = enumerate_patches(224, 224, 1, 224, 224, 224).size();
  const std::size_t c2 = enumerate_patches(224, 224, 2, 224, 224, 224).size();
  const std::size_t c12 = enumerate_patches(224, 224, 12, 224, 224, 224).size();
  const bool ok = bad.empty() && c1 == 1 && c2 == 5 && c12 == 122;
  std::string detail = "n=1:" + std::to_string(c1) + " n=2:" + std::to_string(c2) +
                       " n=12:" + std::to_string(c12);
  for (const auto& b : bad) detail += " mismatch " + b;
  return {ok ? Outcome::kPass : Outcome::kFail, detail};
}

Outcome prefilter_303() {
  std::mt19937_64 rng(303);
  std::vector<PatchSpec> specs(303);
  std::vector<double> scores(303);
  std::iota(scores.begin(), scores.end(), 0.0);
  std::shuffle(scores.begin(), scores.end(), rng);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i] = {1, 224, 224, 0, 0, 224, 224};
  }
  const auto t0 = Clock::now();
  const auto r = prefilter(specs, scores, 99.0);
  const double secs = seconds_since(t0);
  std::vector<double> expected = scores;
  std::sort(expected.rbegin(), expected.rend());
  expected.resize(4);
  std::vector<double> got = r.scores;
  std::sort(got.rbegin(), got.rend());
  const bool ok = r.kept.size() == 4 && got == expected && secs < 0.1;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "kept=" + std::to_string(r.kept.size()) + " top4=" + (got == expected ? "yes" : "no") +
              " runtime=" + fmt("%.4f", secs) + "s"};
}

GrayMap naive_fuse(const std::vector<GrayMap>& layers, double theta) {
  const int h = layers[0].height(), w = layers[0].width();
  std::vector<double> avg(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double num = 0, den = 0;
      for (const auto& l : layers) {
        const double v = l.at(y, x);
        if (v > theta) {
          num += v;
          den += 1;
        }
      }
      avg[static_cast<std::size_t>(y * w + x)] = den > 0 ? num / den : 0.0;
    }
  }
  const auto [lo, hi] = std::minmax_element(avg.begin(), avg.end());
  GrayMap out(h, w);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < avg.size(); ++i) {
      out.values()[i] = static_cast<float>((avg[i] - *lo) / (*hi - *lo));
    }
  }
  return out;
}

GrayMap random_map(int h, int w, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  GrayMap m(h, w);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

Outcome fusion_oracle() {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dim(1, 16), depth(1, 8);
  float worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = dim(rng), w = dim(rng), n = depth(rng);
    CalibratedStack st{h, w};
    for (int k = 0; k < n; ++k) st.layers.push_back(random_map(h, w, rng));
    const double theta = trial % 2 == 0 ? 0.0 : 0.3;
    worst = std::max(worst, max_abs_diff(fuse(st, theta), naive_fuse(st.layers, theta)));
  }

  // Pixels no layer supports stay at 0.
  bool zero_ok = true;
  for (int trial = 0; trial < 50 && zero_ok; ++trial) {
    CalibratedStack st{12, 12};
    for (int k = 0; k < 4; ++k) {
      auto m = random_map(12, 12, rng);
      for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 4; ++x) m.at(y, x) = 0.0f;
      }
      st.layers.push_back(m);
    }
    const auto out = fuse(st, 0.0);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 4; ++x) zero_ok = zero_ok && out.at(y, x) == 0.0f;
    }
  }

  float scale_worst = 0;
  std::uniform_real_distribution<double> wdist(0.01, 1.0), sdist(0.001, 1000.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = dim(rng), w = dim(rng), n = depth(rng);
    CalibratedStack st{h, w};
    for (int k = 0; k < n; ++k) {
      st.layers.push_back(random_map(h, w, rng));
      st.weights.push_back(wdist(rng));
    }
    auto scaled = st;
    const double s = sdist(rng);
    for (auto& wt : scaled.weights) wt *= s;
    scale_worst = std::max(scale_worst, max_abs_diff(fuse(apply_channel_weights(st), 0.0),
                                                     fuse(apply_channel_weights(scaled), 0.0)));
  }
  const bool ok = worst < 1e-6f && zero_ok && scale_worst < 1e-6f;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "vs naive=" + fmt("%.3g", worst) + " zero-support=" + (zero_ok ? "0" : "nonzero") +
              " rescale=" + fmt("%.3g", scale_worst)};
}

Outcome localization() {
  const auto mock = make_quadrant_mock();
  const auto base = make_occlusion_method({});
  constexpr int kW = 600, kH = 400, kSide = 40;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> quad(0, 3);
  int hits = 0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 20; ++trial) {
    const int q = quad(rng);
    const int qx = (q % 2) * kW / 2, qy = (q / 2) * kH / 2;
    std::uniform_int_distribution<int> ux(0, kW / 2 - kSide), uy(0, kH / 2 - kSide);
    const int sx = qx + ux(rng), sy = qy + uy(rng);
    SessConfig cfg;
    cfg.n_scales = 4;
    cfg.prefilter_ratio = 50;
    cfg.target_class = q;
    const auto map = run_sess(bright_square(kH, kW, sx, sy, kSide), *mock, *base, cfg);
    const auto p = saliency_peak(map);
    if (p.x >= sx && p.x < sx + kSide && p.y >= sy && p.y < sy + kSide) ++hits;
  }
  const double secs = seconds_since(t0);
  const bool ok = hits >= 19 && secs < 30.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "hits=" + std::to_string(hits) + "/20 runtime=" + fmt("%.1f", secs) + "s"};
}

struct Overall {
  double sess = 0;
  double uniform = 0;
};

Outcome metric_sanity() {
  const auto mock = make_quadrant_mock();
  const auto base = make_occlusion_method({});
  const auto cfg_base = SessConfig::quantitative();
  const CurveOptions curves;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> side(40, 90), quad(0, 3);
  std::normal_distribution<float> noise(0.15f, 0.05f);
  double sess_sum = 0, uniform_sum = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 10; ++i) {
    const int h = 256 + 16 * (i % 3), w = 320 - 16 * (i % 4);
    const int s = side(rng), q = quad(rng);
    std::uniform_int_distribution<int> ux(0, w / 2 - s), uy(0, h / 2 - s);
    auto img = bright_square(h, w, (q % 2) * w / 2 + ux(rng), (q / 2) * h / 2 + uy(rng), s);
    for (auto& v : img.data()) {
      if (v == 0.0f) v = std::clamp(noise(rng), 0.0f, 1.0f);
    }
    auto cfg = cfg_base;
    cfg.target_class = q;
    const auto sal = run_sess(img, *mock, *base, cfg);
    const GrayMap flat(h, w, 1.0f);
    sess_sum += overall_score(insertion_curve(img, sal, *mock, q, curves),
                              deletion_curve(img, sal, *mock, q, curves));
    uniform_sum += overall_score(insertion_curve(img, flat, *mock, q, curves),
                                 deletion_curve(img, flat, *mock, q, curves));
  }
  const double secs = seconds_since(t0);
  const double sess_mean = sess_sum / 10, uniform_mean = uniform_sum / 10;
  const std::size_t pps = pixels_per_step(224 * 224, 0.036);
  const std::size_t steps = (224 * 224 + pps - 1) / pps;
  const bool ok = sess_mean > 0 && uniform_mean <= sess_mean && pps == 1806 && steps == 28;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "overall sess=" + fmt("%.5f", sess_mean) + " uniform=" + fmt("%.5f", uniform_mean) +
              " pixels/step=" + std::to_string(pps) + " steps=" + std::to_string(steps) +
              " runtime=" + fmt("%.1f", secs) + "s"};
}

GrayMap peak_at(int h, int w, int x, int y) {
  GrayMap m(h, w, 0.1f);
  m.at(y, x) = 1.0f;
  return m;
}

Outcome pointing_suite() {
  int failures = 0;
  const auto check = [&](bool cond) { failures += cond ? 0 : 1; };
  const std::vector<Box> box{{10, 10, 30, 30}};
  check(pointing_game(peak_at(50, 50, 20, 20), box));
  check(pointing_game(peak_at(50, 50, 30, 30), box));
  check(!pointing_game(peak_at(50, 50, 31, 20), box));
  check(!pointing_game(peak_at(50, 50, 5, 45), box));
  GrayMap tie(50, 50, 0.0f);
  tie.at(2, 40) = 1.0f;
  tie.at(40, 2) = 1.0f;
  check(pointing_game(tie, std::vector<Box>{{35, 0, 49, 5}}));
  check(!pointing_game(tie, std::vector<Box>{{0, 35, 5, 49}}));
  const std::vector<PointingRecord> recs{{0, true}, {0, true}, {0, true}, {0, false},
                                         {1, true}, {1, false}};
  const double mean = aggregate_pointing(recs).mean_acc;
  check(mean == 0.625);
  return {failures == 0 ? Outcome::kPass : Outcome::kFail,
          "failed cases=" + std::to_string(failures) + " mean acc=" + fmt("%.4f", mean)};
}

// Optional: needs an exported ImageNet classifier and a labelled image list
// (JSON lines with "image" and "class").
Outcome real_model() {
  const char* model = std::getenv("SESS_REAL_MODEL");
  const char* images = std::getenv("SESS_REAL_IMAGES");
  if (model == nullptr || images == nullptr) {
    return {Outcome::kSkip, "set SESS_REAL_MODEL and SESS_REAL_IMAGES to run"};
  }
  const auto backend = open_backend(model);
  const auto base = make_occlusion_method({});
  const auto cfg_base = SessConfig::quantitative();
  const CurveOptions curves;
  const std::filesystem::path manifest(images);
  std::ifstream in(manifest);
  if (!in) return {Outcome::kFail, "cannot read " + manifest.string()};
  double sess_sum = 0, base_sum = 0;
  std::size_t count = 0;
  std::string line;
  const auto t0 = Clock::now();
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto rec = nlohmann::json::parse(line);
    std::filesystem::path path = rec.at("image").get<std::string>();
    if (path.is_relative()) path = manifest.parent_path() / path;
    const int target = rec.at("class").get<int>();
    const auto img = load_image(path);
    auto cfg = cfg_base;
    cfg.target_class = target;
    const auto s = run_sess(img, *backend, *base, cfg);
    const auto b = run_base_only(img, *backend, *base, target);
    sess_sum += overall_score(insertion_curve(img, s, *backend, target, curves),
                              deletion_curve(img, s, *backend, target, curves));
    base_sum += overall_score(insertion_curve(img, b, *backend, target, curves),
                              deletion_curve(img, b, *backend, target, curves));
    ++count;
  }
  if (count == 0) return {Outcome::kFail, "no images listed"};
  const double secs = seconds_since(t0);
  const double sess_mean = 100.0 * sess_sum / static_cast<double>(count);
  const double base_mean = 100.0 * base_sum / static_cast<double>(count);
  const bool ok = sess_mean - base_mean >= 2.0 && secs <= 7200.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "images=" + std::to_string(count) + " overall sess=" + fmt("%.1f", sess_mean) +
              "% occlusion=" + fmt("%.1f", base_mean) + "% runtime=" + fmt("%.0f", secs) + "s"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"identity-reduction", identity_reduction},
      {"geometry-suite", geometry_suite},
      {"prefilter-303", prefilter_303},
      {"fusion-oracle", fusion_oracle},
      {"synthetic-localization", localization},
      {"metric-sanity", metric_sanity},
      {"pointing-game-suite", pointing_suite},
      {"real-model-direction", real_model},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::kPass ? "PASS" : o.kind == Outcome::kSkip ? "SKIP" : "FAIL";
    if (o.kind == Outcome::kFail) ++failed;
    std::printf("%s %s: %s\n", tag, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
