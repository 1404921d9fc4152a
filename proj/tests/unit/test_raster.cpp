#include <gtest/gtest.h>

#include <filesystem>

#include "xraydet/error.hpp"
#include "xraydet/raster.hpp"

using namespace xraydet;

TEST(Raster, ConstructAndAccess) {
  RasterImage img(3, 2, Rgb{1, 2, 3});
  EXPECT_EQ(img.pixels().size(), 18u);
  img.set(2, 1, {9, 8, 7});
  EXPECT_EQ(img.at(2, 1), (Rgb{9, 8, 7}));
  EXPECT_EQ(img.at(0, 0), (Rgb{1, 2, 3}));
  EXPECT_THROW(RasterImage(2, 2, std::vector<std::uint8_t>(5)), std::invalid_argument);
}

TEST(Ppm, EncodeDecodeRoundTrip) {
  RasterImage img(4, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      img.set(x, y, {std::uint8_t(x * 40), std::uint8_t(y * 70), std::uint8_t(x + y)});
  const std::string bytes = encode_ppm(img);
  EXPECT_EQ(bytes.substr(0, 11), "P6\n4 3\n255\n");
  EXPECT_EQ(decode_ppm(bytes), img);
}

TEST(Ppm, HeaderCommentsAccepted) {
  const std::string bytes = std::string("P6\n# made by hand\n1 1\n255\n") + "\x01\x02\x03";
  EXPECT_EQ(decode_ppm(bytes).at(0, 0), (Rgb{1, 2, 3}));
}

TEST(Ppm, MalformedInputsRejected) {
  EXPECT_THROW(decode_ppm("P3\n1 1\n255\n1 2 3"), DataError);
  EXPECT_THROW(decode_ppm("P6\n2 2\n255\n\x01"), DataError);
  EXPECT_THROW(decode_ppm("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06"), DataError);
  EXPECT_THROW(decode_ppm(""), DataError);
}

TEST(Ppm, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "xraydet_raster_test.ppm";
  RasterImage img(2, 2, Rgb{10, 20, 30});
  write_ppm(path, img);
  EXPECT_EQ(read_ppm(path), img);
  std::filesystem::remove(path);
  EXPECT_THROW(read_ppm(path), DataError);
}
