#include <sot/color_transfer.hpp>

#include <gtest/gtest.h>

#include "color_fixture.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>

using namespace sot;
namespace fs = std::filesystem;

namespace {

std::string tmp_file(const std::string& name) {
  fs::create_directories(SOT_TEST_TMP);
  return (fs::path(SOT_TEST_TMP) / name).string();
}

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

TransferSpec small_spec(double c_cut) {
  TransferSpec s;
  s.c_cut = c_cut;
  s.subsample_size = 8;
  s.cfg.epsilon = 0.05;
  return s;
}

}  // namespace

TEST(ImageIo, PngRoundTripWithinOneLevel) {
  const auto img = sot::testing::color_fixture(16, false);
  const auto path = tmp_file("rt.png");
  save_image(img, path);
  const auto back = load_image(path);
  ASSERT_EQ(back.width, 16);
  ASSERT_EQ(back.height, 16);
  EXPECT_LE(max_abs(back.colors, img.colors), 0.5 / 255 + 1e-12);
}

TEST(ImageIo, JpegRoundTripIsClose) {
  const auto img = sot::testing::color_fixture(16, true);
  const auto path = tmp_file("rt.jpg");
  save_image(img, path);
  const auto back = load_image(path);
  ASSERT_EQ(back.size(), img.size());
  EXPECT_LT((back.colors - img.colors).cwiseAbs().mean(), 0.05);
}

TEST(ImageIo, SinglePixelImage) {
  Matrix c(1, 3);
  c << 1.0, 0.0, 128.0 / 255;
  const auto path = tmp_file("one.png");
  save_image(PixelCloud(c, 1, 1), path);
  EXPECT_EQ(load_image(path).colors, c);
}

TEST(ImageIo, CorruptAndMissingFilesRaise) {
  const auto path = tmp_file("bad.png");
  {
    std::ofstream os(path, std::ios::binary);
    os << "\x89PNG\r\n\x1a\n garbage";
  }
  EXPECT_THROW(load_image(path), ImageError);
  const auto text = tmp_file("bad.txt");
  {
    std::ofstream os(text);
    os << "hello";
  }
  EXPECT_THROW(load_image(text), ImageError);
  EXPECT_THROW(load_image(tmp_file("missing.png")), ImageError);
}

TEST(PixelCloud, Validation) {
  EXPECT_THROW(PixelCloud(Matrix::Zero(3, 3), 2, 2), std::invalid_argument);
  EXPECT_THROW(PixelCloud(Matrix::Constant(4, 3, 1.5), 2, 2), std::invalid_argument);
}

TEST(Subsample, IdentityAtFullSize) {
  const auto img = sot::testing::color_fixture(12, false);
  EXPECT_LT(max_abs(subsample(img, 12).colors, img.colors), 1e-15);
}

TEST(Subsample, AveragesBlocks) {
  Matrix c(4, 3);
  c << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1;
  const auto s = subsample(PixelCloud(c, 2, 2), 1);
  EXPECT_NEAR(s.colors(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(s.colors(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(s.colors(0, 2), 0.25, 1e-15);
}

TEST(Subsample, ConstantImageStaysConstantAtAnySize) {
  const PixelCloud img(Matrix::Constant(7 * 7, 3, 0.3), 7, 7);
  for (int size = 1; size <= 7; ++size) {
    EXPECT_LT((subsample(img, size).colors.array() - 0.3).abs().maxCoeff(), 1e-14) << size;
  }
  EXPECT_THROW(subsample(img, 8), std::invalid_argument);
  EXPECT_THROW(subsample(img, 0), std::invalid_argument);
}

TEST(NearestIndices, LowestIndexWinsTies) {
  Matrix palette(3, 3);
  palette << 0, 0, 0, 1, 1, 1, 0, 0, 0;
  Matrix colors(3, 3);
  colors << 0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 0.5, 0.5, 0.5;
  EXPECT_EQ(nearest_indices(colors, palette), (std::vector<Eigen::Index>{0, 1, 0}));
}

TEST(ColorCost, ThresholdsTheSquaredDistance) {
  Matrix x(1, 3), y(2, 3);
  x << 0, 0, 0;
  y << 0.3, 0, 0, 0.5, 0, 0;
  const auto c = color_cost(x, y, 0.1);
  EXPECT_NEAR(c(0, 0), 0.09, 1e-15);
  EXPECT_TRUE(c.blocked(0, 1));
}

TEST(Transfer, IdenticalTargetBarelyMoves) {
  const auto img = sot::testing::quadrant_fixture(16);
  auto spec = small_spec(kInf);
  spec.cfg.epsilon = 0.01;
  const auto r = transfer(img, img, spec);
  EXPECT_LT(max_abs(r.output.colors, img.colors), 2.0 / 255);
}

TEST(Transfer, ZeroCutoffLeavesDistinctColorsUntouched) {
  const auto x = sot::testing::color_fixture(16, false);
  const auto y = sot::testing::color_fixture(16, true);
  const auto r = transfer(x, y, small_spec(0.0));
  EXPECT_EQ(r.output.colors, x.colors);
  EXPECT_EQ(r.solve.transported_mass, 0.0);
}

TEST(Transfer, NoCutoffMatchesBalancedCoupling) {
  const auto x = sot::testing::color_fixture(16, false);
  const auto y = sot::testing::color_fixture(16, true);
  const auto spec = small_spec(kInf);
  const auto r = transfer(x, y, spec);
  const Matrix p = sot::testing::balanced_sinkhorn_plan(r.input_small.colors, r.target_small.colors,
                                                   spec.cfg.epsilon, 5000);
  const Vector a = Vector::Constant(64, 1.0 / 64);
  const auto ref = recolor(x, r.input_small.colors, r.target_small.colors, TransportPlan(p), a);
  EXPECT_LT(max_abs(ref.colors, r.output.colors), 1.0 / 255);
}

TEST(Transfer, TransportedMassGrowsWithCutoff) {
  const auto x = sot::testing::color_fixture(16, false);
  const auto y = sot::testing::color_fixture(16, true);
  double previous = -1.0;
  for (double c_cut : {0.0, 0.1, 0.3, 1.0, kInf}) {
    // Partially blocked couplings converge slowly (about 5e5 sweeps at 0.3).
    auto spec = small_spec(c_cut);
    spec.cfg.max_iter = 2000000;
    const auto r = transfer(x, y, spec);
    EXPECT_GE(r.solve.transported_mass, previous - 1e-9) << c_cut;
    previous = r.solve.transported_mass;
  }
  EXPECT_NEAR(previous, 1.0, 1e-6);
}

TEST(Recolor, CountsClampedChannels) {
  Matrix xs(1, 3), ys(1, 3);
  xs << 0.5, 0.5, 0.5;
  ys << 1.0, 0.5, 0.0;
  Matrix in(2, 3);
  in << 0.5, 0.5, 0.5, 0.9, 0.5, 0.2;
  long clamped = -1;
  const auto out = recolor(PixelCloud(in, 2, 1), xs, ys, TransportPlan(Matrix::Constant(1, 1, 1.0)),
                           Vector::Constant(1, 1.0), &clamped);
  EXPECT_EQ(clamped, 2);  // 0.9 + 0.5 and 0.2 - 0.5
  EXPECT_EQ(out.colors(0, 0), 1.0);
  EXPECT_EQ(out.colors(1, 0), 1.0);
  EXPECT_EQ(out.colors(1, 2), 0.0);
}

TEST(Transfer, NonConvergenceCarriesThePartialResult) {
  const auto x = sot::testing::color_fixture(16, false);
  const auto y = sot::testing::color_fixture(16, true);
  auto spec = small_spec(kInf);
  spec.cfg.max_iter = 1;
  try {
    transfer(x, y, spec);
    FAIL() << "expected TransferError";
  } catch (const TransferError& e) {
    EXPECT_EQ(e.partial().output.size(), x.size());
    EXPECT_EQ(e.partial().solve.iterations, 1);
  }
}

TEST(Transfer, SinglePixelImages) {
  Matrix a(1, 3), b(1, 3);
  a << 0.2, 0.2, 0.2;
  b << 0.3, 0.2, 0.1;
  auto spec = small_spec(kInf);
  const auto r = transfer(PixelCloud(a, 1, 1), PixelCloud(b, 1, 1), spec);
  EXPECT_LT(max_abs(r.output.colors, b), 1e-9);
}
