#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "xraydet/error.hpp"
#include "xraydet/formats.hpp"

using namespace xraydet;
namespace fs = std::filesystem;

TEST(YoloLabels, ParsesAndConverts) {
  const auto labels = parse_yolo_label_file("0 0.5 0.5 0.2 0.4\n", {100, 200});
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels[0].class_id, 0);
  const auto gts = to_ground_truth(labels, {100, 200}, "x");
  EXPECT_NEAR(gts[0].box.x_min, 40, 1e-12);
  EXPECT_NEAR(gts[0].box.y_min, 60, 1e-12);
  EXPECT_NEAR(gts[0].box.x_max, 60, 1e-12);
  EXPECT_NEAR(gts[0].box.y_max, 140, 1e-12);
  EXPECT_EQ(gts[0].image_id, "x");
}

TEST(YoloLabels, BlankInputAndBlankLines) {
  EXPECT_TRUE(parse_yolo_label_file("", {10, 10}).empty());
  EXPECT_EQ(parse_yolo_label_file("\n1 0.5 0.5 0.1 0.1\n\n  \n2 0.5 0.5 0.1 0.1", {10, 10}).size(), 2u);
  EXPECT_EQ(parse_yolo_label_file("1 0.5 0.5 0.1 0.1\r\n", {10, 10}).size(), 1u);
}

TEST(YoloLabels, ErrorsNameTheLine) {
  try {
    parse_yolo_label_file("0 0.5 0.5", {10, 10});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("expected 5 fields"), std::string::npos);
  }
  try {
    parse_yolo_label_file("0 0.5 0.5 0.1 0.1\n0 0.5 abc 0.1 0.1", {10, 10});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_yolo_label_file("0 1.5 0.5 0.1 0.1", {10, 10}), ParseError);
  EXPECT_THROW(parse_yolo_label_file("-1 0.5 0.5 0.1 0.1", {10, 10}), ParseError);
  EXPECT_THROW(parse_yolo_label_file("0 0.5 0.5 0 0.1", {10, 10}), ParseError);
}

TEST(YoloLabels, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LabeledBox> labels;
  for (int i = 0; i < 500; ++i) labels.push_back({i % 7, {u(rng), u(rng), 1.0 - u(rng), 1.0 - u(rng)}});
  const std::string text = serialize_yolo_labels(labels);
  const auto back = parse_yolo_label_file(text, {640, 480});
  EXPECT_EQ(back, labels);
  EXPECT_EQ(serialize_yolo_labels(back), text);
}

TEST(Detections, ParseOneLine) {
  const auto d = parse_detections("img_1\t2\t0.75\t1\t2\t3.5\t4\n");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].image_id, "img_1");
  EXPECT_EQ(d[0].class_id, 2);
  EXPECT_EQ(d[0].score, 0.75);
  EXPECT_EQ(d[0].box, (Box{1, 2, 3.5, 4}));
  EXPECT_TRUE(parse_detections("").empty());
}

TEST(Detections, RangeAndShapeErrors) {
  EXPECT_THROW(parse_detections("a\t0\t1.5\t0\t0\t1\t1"), ParseError);
  EXPECT_THROW(parse_detections("a 0 0.5 0 0 1 1"), ParseError);
  EXPECT_THROW(parse_detections("a\t0\t0.5\t2\t0\t1\t1"), ParseError);
  EXPECT_THROW(parse_detections("a\t0\tnan\t0\t0\t1\t1"), ParseError);
  EXPECT_THROW(parse_detections("a\t3\t0.5\t0\t0\t1\t1", 3), ParseError);
  EXPECT_NO_THROW(parse_detections("a\t2\t0.5\t0\t0\t1\t1", 3));
}

TEST(Detections, OrderPreservedAndRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Detection> dets;
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng) * 1000, y = u(rng) * 1000;
    dets.push_back({i % 5, u(rng), {x, y, x + u(rng) * 100, y + u(rng) * 100},
                    "image" + std::to_string(i % 13)});
  }
  const std::string text = serialize_detections(dets);
  const auto back = parse_detections(text);
  EXPECT_EQ(back, dets);
  EXPECT_EQ(serialize_detections(back), text);
}

TEST(Detections, LoadReportsPathOnError) {
  const fs::path p = fs::temp_directory_path() / "xraydet_bad_dets.tsv";
  write_text_file(p, "a\t0\t0.5\t0\t0\t1\t1\nbroken\n");
  try {
    load_detections(p);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(p.string()), std::string::npos);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
  }
  fs::remove(p);
  EXPECT_THROW(load_detections(p), DataError);
}

TEST(FormatReal, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.0}) {
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.5), "0.5");
}

TEST(Manifest, ParsesAndResolvesPaths) {
  const auto m = parse_manifest(
      "# dataset\nclass gun\nclass knife\nimage a 640 480 labels/a.txt\n"
      "image b 100 100 /abs/b.txt\n",
      "/data");
  EXPECT_EQ(m.class_names, (std::vector<std::string>{"gun", "knife"}));
  ASSERT_EQ(m.images.size(), 2u);
  EXPECT_EQ(m.images[0].dims, (ImageDims{640, 480}));
  EXPECT_EQ(m.images[0].label_path, fs::path("/data/labels/a.txt"));
  EXPECT_EQ(m.images[1].label_path, fs::path("/abs/b.txt"));
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse_manifest("image a 1 1 x\nimage a 1 1 y\n", "."), ParseError);
  EXPECT_THROW(parse_manifest("image a 0 1 x\n", "."), ParseError);
  EXPECT_THROW(parse_manifest("klass gun\n", "."), ParseError);
  EXPECT_THROW(parse_manifest("class a,b\n", "."), ParseError);
}

TEST(Manifest, GroundTruthRejectsUnknownClass) {
  const fs::path dir = fs::temp_directory_path() / "xraydet_manifest_test";
  fs::create_directories(dir);
  write_text_file(dir / "a.txt", "1 0.5 0.5 0.2 0.2\n");
  write_text_file(dir / "m.txt", "class gun\nimage a 10 10 a.txt\n");
  EXPECT_THROW(load_ground_truth(load_manifest(dir / "m.txt")), DataError);
  write_text_file(dir / "m.txt", "class gun\nclass knife\nimage a 10 10 a.txt\n");
  const auto gts = load_ground_truth(load_manifest(dir / "m.txt"));
  ASSERT_EQ(gts.size(), 1u);
  EXPECT_EQ(gts[0].class_id, 1);
  fs::remove_all(dir);
}

TEST(Report, KeyValueLayout) {
  const std::vector<GroundTruth> g{{0, {0, 0, 10, 10}, "a"}, {0, {50, 50, 60, 60}, "a"}};
  const std::vector<Detection> d{{0, 0.9, {0, 0, 10, 10}, "a"},
                                 {0, 0.8, {100, 100, 110, 110}, "a"},
                                 {0, 0.7, {50, 50, 60, 60}, "a"}};
  EvalOptions o;
  o.class_names = {"gun"};
  o.timing = make_fps_report(50, 2.0);
  const std::vector<double> t{0.5};
  const auto r = map_over_range(d, g, t, o);
  const std::string text = format_report(r);
  EXPECT_NE(text.find("mAP@0.5 = 0.833333333\n"), std::string::npos);
  EXPECT_NE(text.find("fps = 25.000000000\n"), std::string::npos);
  EXPECT_NE(text.find("[class gun]\n"), std::string::npos);
  EXPECT_NE(text.find("AP@0.5 = 0.833333333\n"), std::string::npos);

  const std::string curves = format_curves(r);
  EXPECT_EQ(curves.rfind("kind,class,x,y\n", 0), 0u);
  EXPECT_NE(curves.find("pr,gun,1,0.66666666666666663\n"), std::string::npos);
  EXPECT_NE(curves.find("f1_mean,all,0,"), std::string::npos);
}
