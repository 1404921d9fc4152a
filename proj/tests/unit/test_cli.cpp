#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "xraydet/cli.hpp"
#include "xraydet/formats.hpp"
#include "xraydet/raster.hpp"

namespace fs = std::filesystem;
using xraydet::read_text_file;
using xraydet::write_text_file;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xraydet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = xraydet::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("xraydet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // One 100x100 image with GTs at [0,0,10,10] and [50,50,60,60].
  std::string two_box_manifest(const std::string& classes = "class gun\n") {
    write_text_file(path("a.txt"), "0 0.05 0.05 0.1 0.1\n0 0.55 0.55 0.1 0.1\n");
    write_text_file(path("m.txt"), classes + "image a 100 100 a.txt\n");
    return path("m.txt");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, EvalPerfectDetector) {
  const auto m = two_box_manifest();
  write_text_file(path("d.tsv"), "a\t0\t0.9\t0\t0\t10\t10\na\t0\t0.8\t50\t50\t60\t60\n");
  const CliRun r = cli({"eval", "--manifest", m, "--detections", path("d.tsv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mAP@0.5 = 1.000000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("mAP@0.5:0.95 = 1.000000000"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalTpFpTpFixtureWritesReportAndCurves) {
  const auto m = two_box_manifest();
  write_text_file(path("d.tsv"),
                  "a\t0\t0.9\t0\t0\t10\t10\na\t0\t0.8\t80\t80\t90\t90\na\t0\t0.7\t50\t50\t60\t60\n");
  const CliRun r = cli({"eval", "--manifest", m, "--detections", path("d.tsv"), "--iou", "0.5",
                     "--report", path("report.txt"), "--curves", path("curves.csv"),
                     "--total-seconds", "0.04"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string report = read_text_file(path("report.txt"));
  EXPECT_NE(report.find("mAP@0.5 = 0.833333333"), std::string::npos) << report;
  EXPECT_NE(report.find("fps = 25.000000000"), std::string::npos) << report;
  EXPECT_EQ(read_text_file(path("curves.csv")).rfind("kind,class,x,y\n", 0), 0u);
}

TEST_F(CliTest, EvalIndependentOfLineOrder) {
  const auto m = two_box_manifest();
  std::vector<std::string> lines{"a\t0\t0.9\t0\t0\t10\t10", "a\t0\t0.8\t1\t1\t11\t11",
                                 "a\t0\t0.7\t50\t50\t60\t60", "a\t0\t0.6\t52\t50\t62\t60",
                                 "a\t0\t0.5\t20\t20\t40\t40"};
  std::string first;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_text_file(path("d.tsv"), text);
    const CliRun r = cli({"eval", "--manifest", m, "--detections", path("d.tsv")});
    ASSERT_EQ(r.code, 0);
    if (trial == 0) first = r.out;
    EXPECT_EQ(r.out, first);
  }
}

TEST_F(CliTest, EvalDataErrors) {
  const auto m = two_box_manifest();
  write_text_file(path("d.tsv"), "a\t1\t0.9\t0\t0\t10\t10\n");
  EXPECT_EQ(cli({"eval", "--manifest", m, "--detections", path("d.tsv")}).code, 2);
  write_text_file(path("d.tsv"), "zzz\t0\t0.9\t0\t0\t10\t10\n");
  EXPECT_EQ(cli({"eval", "--manifest", m, "--detections", path("d.tsv")}).code, 2);
  EXPECT_EQ(cli({"eval", "--manifest", m, "--detections", path("missing.tsv")}).code, 2);
  EXPECT_EQ(cli({"eval", "--manifest", path("missing.txt"), "--detections", path("d.tsv")}).code, 2);
  write_text_file(path("d.tsv"), "");
  const CliRun empty = cli({"eval", "--manifest", two_box_manifest(""), "--detections", path("d.tsv")});
  EXPECT_EQ(empty.code, 2);
  EXPECT_NE(empty.err.find("no classes"), std::string::npos);
}

TEST_F(CliTest, EvalUsageErrors) {
  const auto m = two_box_manifest();
  write_text_file(path("d.tsv"), "");
  EXPECT_EQ(cli({"eval", "--manifest", m, "--detections", path("d.tsv"), "--iou", "0.5",
                 "--iou-range", "0.5:0.9:0.1"}).code, 1);
  EXPECT_EQ(cli({"eval", "--manifest", m, "--detections", path("d.tsv"), "--iou-range", "x"}).code, 1);
  EXPECT_EQ(cli({"eval", "--manifest", m, "--detections", path("d.tsv"), "--interp", "11"}).code, 1);
  EXPECT_EQ(cli({"eval", "--manifest", m}).code, 1);
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, NmsModes) {
  write_text_file(path("d.tsv"), "a\t0\t0.9\t0\t0\t10\t10\na\t0\t0.8\t0\t0\t10\t10\n");
  const CliRun hard = cli({"nms", path("d.tsv"), "--mode", "hard"});
  ASSERT_EQ(hard.code, 0) << hard.err;
  EXPECT_EQ(std::count(hard.out.begin(), hard.out.end(), '\n'), 1);

  const CliRun soft = cli({"nms", path("d.tsv"), "--mode", "soft_gaussian", "--sigma", "0.5"});
  ASSERT_EQ(soft.code, 0);
  const auto dets = xraydet::parse_detections(soft.out);
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_NEAR(dets[1].score, 0.108268, 1e-6);

  const CliRun warn = cli({"nms", path("d.tsv"), "--mode", "hard", "--sigma", "0.2",
                        "-o", path("out.tsv")});
  EXPECT_EQ(warn.code, 0);
  EXPECT_NE(warn.err.find("warning"), std::string::npos);
  EXPECT_EQ(xraydet::load_detections(path("out.tsv")).size(), 1u);

  write_text_file(path("e.tsv"), "");
  const CliRun empty = cli({"nms", path("e.tsv")});
  EXPECT_EQ(empty.code, 0);
  EXPECT_TRUE(empty.out.empty());

  EXPECT_EQ(cli({"nms", path("d.tsv"), "--iou-threshold", "1.5"}).code, 1);
  EXPECT_EQ(cli({"nms", path("d.tsv"), "--mode", "fuzzy"}).code, 1);
  EXPECT_EQ(cli({"nms", path("nope.tsv")}).code, 2);
}

TEST_F(CliTest, MosaicDeterministicAndFixture) {
  std::vector<std::string> images, labels;
  for (int q = 0; q < 4; ++q) {
    xraydet::RasterImage img(16, 16, xraydet::Rgb{std::uint8_t(40 * q), 7, 9});
    images.push_back(path("i" + std::to_string(q) + ".ppm"));
    labels.push_back(path("l" + std::to_string(q) + ".txt"));
    xraydet::write_ppm(images.back(), img);
    write_text_file(labels.back(), q == 0 ? "2 0.5 0.5 0.5 0.5\n" : "");
  }
  auto args = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> a{"mosaic", "--images"};
    a.insert(a.end(), images.begin(), images.end());
    a.push_back("--labels");
    a.insert(a.end(), labels.begin(), labels.end());
    a.insert(a.end(), {"--size", "16", "--out", path(out)});
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  ASSERT_EQ(cli(args("m1", {"--seed", "5"})).code, 0);
  ASSERT_EQ(cli(args("m2", {"--seed", "5"})).code, 0);
  EXPECT_EQ(read_text_file(path("m1.ppm")), read_text_file(path("m2.ppm")));
  EXPECT_EQ(read_text_file(path("m1.txt")), read_text_file(path("m2.txt")));

  const CliRun fixed = cli(args("m3", {"--center", "16,16"}));
  ASSERT_EQ(fixed.code, 0) << fixed.err;
  // [4, 4, 12, 12] on a 32x32 canvas
  const auto out = xraydet::parse_yolo_label_file(read_text_file(path("m3.txt")), {32, 32});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].class_id, 2);
  EXPECT_EQ(out[0].box, (xraydet::NormalizedBox{0.25, 0.25, 0.25, 0.25}));
}

TEST_F(CliTest, MosaicErrors) {
  std::vector<std::string> images;
  for (int q = 0; q < 4; ++q) {
    images.push_back(path("i" + std::to_string(q) + ".ppm"));
    xraydet::write_ppm(images.back(), xraydet::RasterImage(4, 4));
  }
  const CliRun three = cli({"mosaic", "--images", images[0], images[1], images[2], "--out", path("x")});
  EXPECT_EQ(three.code, 1);
  write_text_file(images[3], "not an image");
  EXPECT_EQ(cli({"mosaic", "--images", images[0], images[1], images[2], images[3], "--out",
                 path("x")}).code, 2);
}

TEST_F(CliTest, AttnCheck) {
  const CliRun ok = cli({"attn-check"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(std::count(ok.out.begin(), ok.out.end(), '\n'), 10);
  EXPECT_NE(ok.out.find("module=cbam seed=4"), std::string::npos);
  EXPECT_NE(ok.out.find("module=swin_block seed=4"), std::string::npos);

  const CliRun strict = cli({"attn-check", "--module", "cbam", "--seeds", "2", "--tol", "0"});
  EXPECT_NE(strict.code, 0);
  EXPECT_NE(strict.out.find("FAIL"), std::string::npos);

  EXPECT_EQ(cli({"attn-check", "--module", "resnet"}).code, 1);
}

TEST_F(CliTest, Bench) {
  const CliRun r = cli({"bench", "--boxes", "100", "--images", "3", "--repetitions", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("hard.fps = "), std::string::npos);
  EXPECT_NE(r.out.find("soft_gaussian.meets_25fps = "), std::string::npos);
  EXPECT_NE(r.out.find("soft_gaussian_over_hard_runtime = "), std::string::npos);
  EXPECT_EQ(cli({"bench", "--images", "0"}).code, 1);
}
