// Runs the built `sess` binary end to end on small synthetic inputs.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sess/image_io.hpp"
#include "sess/raster.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kFixtures = SESS_FIXTURE_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(SESS_CLI_WORKDIR) / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  // Exit status of `sess <args>`, stdout and stderr captured to files.
  int run(const std::string& args) {
    const std::string cmd = std::string("'") + SESS_CLI_PATH + "' " + args + " >'" +
                            (dir_ / "stdout.txt").string() + "' 2>'" +
                            (dir_ / "stderr.txt").string() + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return slurp(dir_ / "stderr.txt"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path square_png(const std::string& name, int h, int w, int sx, int sy, int side) const {
    sess::RasterImage img(h, w);
    for (int y = sy; y < sy + side; ++y) {
      for (int x = sx; x < sx + side; ++x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0f;
      }
    }
    const auto p = dir_ / name;
    sess::save_png(img, p);
    return p;
  }

  void write_lines(const fs::path& p, const std::vector<json>& lines) const {
    std::ofstream out(p);
    for (const auto& l : lines) out << l.dump() << '\n';
  }

  std::string q(const fs::path& p) const { return "'" + p.string() + "'"; }

  fs::path dir_;
};

constexpr const char* kFast = " --scales 2 --prefilter 50 --stride 32 --workers 1";

TEST_F(Cli, SaliencyWritesOutputsAndManifest) {
  const auto img = square_png("a.png", 240, 320, 200, 30, 40);
  ASSERT_EQ(run("saliency " + q(img) + " --class 1 --out " + q(dir_ / "o") + kFast), 0)
      << stderr_text();
  for (const char* f : {"saliency.f32", "saliency.png", "overlay.png", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "o" / f)) << f;
  }
  EXPECT_EQ(fs::file_size(dir_ / "o" / "saliency.f32"), 240u * 320u * 4u);
  const auto m = json::parse(slurp(dir_ / "o" / "manifest.json"));
  EXPECT_EQ(m["command"], "saliency");
  EXPECT_EQ(m["config"]["sess"]["n_scales"], 2);
  EXPECT_EQ(m["config"]["sess"]["target_class"], 1);
  EXPECT_TRUE(m.contains("model_identity"));
  EXPECT_EQ(m["image_sha256"].get<std::string>().size(), 64u);

  const auto map = sess::read_f32(dir_ / "o" / "saliency.f32", 240, 320);
  const auto v = map.values();
  const auto i = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  EXPECT_GE(i % 320, 200);
  EXPECT_LT(i % 320, 240);
  EXPECT_GE(i / 320, 30);
  EXPECT_LT(i / 320, 70);
}

TEST_F(Cli, RerunReproducesBytes) {
  const auto img = square_png("a.png", 224, 260, 20, 150, 50);
  ASSERT_EQ(run("saliency " + q(img) + " --class 2 --base rise --rise-masks 40 --seed 9 --out " +
                q(dir_ / "a") + kFast),
            0)
      << stderr_text();
  ASSERT_EQ(run("rerun " + q(dir_ / "a" / "manifest.json") + " --out " + q(dir_ / "b")), 0)
      << stderr_text();
  EXPECT_EQ(slurp(dir_ / "a" / "saliency.f32"), slurp(dir_ / "b" / "saliency.f32"));
}

TEST_F(Cli, IdentityReductionFlagsMatchBaseMethod) {
  const auto img = square_png("a.png", 224, 224, 120, 20, 60);
  const std::string common = " --class 1 --scales 1 --prefilter 0 --no-smooth --workers 1";
  ASSERT_EQ(run("saliency " + q(img) + common + " --out " + q(dir_ / "s")), 0) << stderr_text();
  ASSERT_EQ(run("saliency " + q(img) + common + " --method base --out " + q(dir_ / "b")), 0)
      << stderr_text();
  const auto a = sess::read_f32(dir_ / "s" / "saliency.f32", 224, 224);
  const auto b = sess::read_f32(dir_ / "b" / "saliency.f32", 224, 224);
  float d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, std::abs(a.values()[k] - b.values()[k]));
  }
  EXPECT_LT(d, 1e-6f);
}

TEST_F(Cli, InspectPatchesRowsMatchKeptCount) {
  const auto img = square_png("a.png", 224, 224, 10, 10, 60);
  ASSERT_EQ(run("inspect-patches " + q(img) + " --prefilter 0 --workers 1 --stride 32 --out " +
                q(dir_ / "o")),
            0)
      << stderr_text();
  const auto m = json::parse(slurp(dir_ / "o" / "manifest.json"));
  const auto kept = m["kept_count"].get<std::size_t>();
  EXPECT_EQ(kept, 22u);  // 1 + 4 + 4 + 4 + 9 at n = 5
  std::istringstream csv(slurp(dir_ / "o" / "scores.csv"));
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) lines += l.empty() ? 0 : 1;
  EXPECT_EQ(lines, kept + 1);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "montage.png"));
}

TEST_F(Cli, EvalInsdelResumesToSameReport) {
  const auto a = square_png("a.png", 224, 224, 20, 20, 50);
  const auto b = square_png("b.png", 240, 260, 180, 170, 50);
  write_lines(dir_ / "data.jsonl", {{{"image", "a.png"}, {"class", 0}},
                                    {{"image", "b.png"}, {"class", 3}}});
  const std::string flags = " --scales 2 --prefilter 50 --stride 32 --workers 1";
  ASSERT_EQ(run("eval-insdel " + q(dir_ / "data.jsonl") + flags + " --out " + q(dir_ / "full")), 0)
      << stderr_text();
  ASSERT_EQ(run("eval-insdel " + q(dir_ / "data.jsonl") + flags + " --max-images 1 --out " +
                q(dir_ / "part")),
            0)
      << stderr_text();
  const auto partial = json::parse(slurp(dir_ / "part" / "report.json"));
  EXPECT_FALSE(partial["complete"].get<bool>());
  ASSERT_EQ(run("eval-insdel " + q(dir_ / "data.jsonl") + flags + " --out " + q(dir_ / "part")), 0)
      << stderr_text();
  const auto full = json::parse(slurp(dir_ / "full" / "report.json"));
  const auto resumed = json::parse(slurp(dir_ / "part" / "report.json"));
  EXPECT_EQ(full, resumed);
  EXPECT_EQ(full["images"].size(), 2u);
  EXPECT_TRUE(full["complete"].get<bool>());
  const double mean =
      (full["images"][0]["overall"].get<double>() + full["images"][1]["overall"].get<double>()) / 2;
  EXPECT_NEAR(full["means"]["overall"].get<double>(), mean, 1e-12);

  // A different configuration may not reuse the checkpoint.
  EXPECT_EQ(run("eval-insdel " + q(dir_ / "data.jsonl") + " --scales 3 --out " +
                q(dir_ / "part")),
            2);
}

TEST_F(Cli, EvalPointingHandCount) {
  square_png("a.png", 224, 224, 20, 20, 50);
  square_png("b.png", 224, 224, 150, 20, 50);
  square_png("c.png", 224, 224, 20, 150, 50);
  // a and c: box around the square. b: box elsewhere, a miss.
  write_lines(dir_ / "data.jsonl",
              {{{"image", "a.png"}, {"objects", {{{"class", 0}, {"bbox", {15, 15, 75, 75}}}}}},
               {{"image", "b.png"}, {"objects", {{{"class", 1}, {"bbox", {0, 150, 60, 223}}}}}},
               {{"image", "c.png"}, {"objects", {{{"class", 2}, {"bbox", {15, 145, 75, 205}}}}}}});
  ASSERT_EQ(run("eval-pointing " + q(dir_ / "data.jsonl") + kFast + " --out " + q(dir_ / "o")), 0)
      << stderr_text();
  const auto r = json::parse(slurp(dir_ / "o" / "report.json"));
  EXPECT_EQ(r["all"]["per_class"]["0"]["hits"], 1);
  EXPECT_EQ(r["all"]["per_class"]["1"]["misses"], 1);
  EXPECT_EQ(r["all"]["per_class"]["2"]["hits"], 1);
  EXPECT_NEAR(r["all"]["mean_acc"].get<double>(), 2.0 / 3.0, 1e-12);
}

TEST_F(Cli, EvalPointingMissingBoxFile) {
  square_png("a.png", 224, 224, 20, 20, 50);
  write_lines(dir_ / "data.jsonl", {{{"image", "a.png"}, {"annotation", "nope.json"}}});
  EXPECT_EQ(run("eval-pointing " + q(dir_ / "data.jsonl") + " --out " + q(dir_ / "o")), 2);
  EXPECT_NE(stderr_text().find("FileNotFound"), std::string::npos) << stderr_text();
}

TEST_F(Cli, SweepSinglePoint) {
  square_png("a.png", 224, 224, 20, 20, 50);
  write_lines(dir_ / "data.jsonl", {{{"image", "a.png"}, {"class", 0}}});
  ASSERT_EQ(run("sweep " + q(dir_ / "data.jsonl") +
                " --axis scales --values 1 --stride 32 --workers 1 --out " + q(dir_ / "o")),
            0)
      << stderr_text();
  std::istringstream csv(slurp(dir_ / "o" / "sweep.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(csv, l);) {
    if (!l.empty()) lines.push_back(l);
  }
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].rfind("scales,", 0), 0u);
  EXPECT_EQ(lines[1].rfind("1,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "curves.png"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("saliency " + q(dir_ / "missing.png") + " --out " + q(dir_ / "o")), 2);
  EXPECT_NE(stderr_text().find("FileNotFound"), std::string::npos);

  const auto img = square_png("a.png", 224, 224, 20, 20, 50);
  EXPECT_EQ(run("saliency " + q(img) + " --model " + q(kFixtures / "two_inputs.onnx") +
                " --out " + q(dir_ / "o")),
            3);
  EXPECT_EQ(run("saliency " + q(img) + " --model " + q(kFixtures / "garbage.onnx") + " --out " +
                q(dir_ / "o")),
            3);
  EXPECT_EQ(run("saliency " + q(img) + " --scales 13 --out " + q(dir_ / "o")), 2);
  EXPECT_EQ(run("saliency " + q(img) + " --bogus"), 2);
  EXPECT_EQ(run("saliency " + q(img) + " --base external --adapter " +
                q(kFixtures / "adapter.sh") + "' fail' --scales 1 --out " + q(dir_ / "o")),
            3);
  EXPECT_EQ(run("saliency " + q(img) + " --base external --adapter " +
                q(kFixtures / "adapter.sh") + "' nan' --scales 1 --out " + q(dir_ / "o")),
            3);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, OnnxModelRuns) {
  const auto img = square_png("a.png", 224, 224, 150, 150, 50);
  ASSERT_EQ(run("saliency " + q(img) + " --model " + q(kFixtures / "quadrant.onnx") +
                " --class 3 --scales 1 --stride 32 --out " + q(dir_ / "o")),
            0)
      << stderr_text();
  const auto m = json::parse(slurp(dir_ / "o" / "manifest.json"));
  const auto id = m["model_identity"].get<std::string>();
  EXPECT_EQ(id.rfind("sha256:", 0), 0u) << id;
  EXPECT_EQ(id.size(), 7u + 64u);
}

}  // namespace
