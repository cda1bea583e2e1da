#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "tfta/terrain.hpp"

using namespace tfta;

namespace {

TerrainGrid::HeightMatrix heights(int rows, int cols, double value) {
  return TerrainGrid::HeightMatrix::Constant(rows, cols, value);
}

// Independent bilinear oracle over a plain row-major array.
double bilinear_oracle(const TerrainGrid& g, double x, double y) {
  const double u = (x - g.origin_x()) / g.cell_size();
  const double v = (y - g.origin_y()) / g.cell_size();
  int i = static_cast<int>(std::floor(u));
  int j = static_cast<int>(std::floor(v));
  i = std::min(i, static_cast<int>(g.n_cols()) - 2);
  j = std::min(j, static_cast<int>(g.n_rows()) - 2);
  const double fu = u - i;
  const double fv = v - j;
  const auto& h = g.heights();
  return (1 - fu) * (1 - fv) * h(j, i) + fu * (1 - fv) * h(j, i + 1) + (1 - fu) * fv * h(j + 1, i) +
         fu * fv * h(j + 1, i + 1);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tfta_test_" + name);
}

}  // namespace

TEST(Terrain, FlatGridIsConstant) {
  const TerrainGrid g(0.0, 0.0, 100.0, heights(5, 7, 300.0));
  EXPECT_DOUBLE_EQ(g.height_at(0.0, 0.0), 300.0);
  EXPECT_DOUBLE_EQ(g.height_at(123.4, 321.0), 300.0);
  EXPECT_DOUBLE_EQ(g.height_at(600.0, 400.0), 300.0);
}

TEST(Terrain, ExactAtCellCenters) {
  const TerrainGrid g = generate_terrain(3, 9, 6, 50.0, 700.0, -100.0, 20.0);
  for (std::uint32_t j = 0; j < g.n_rows(); ++j)
    for (std::uint32_t i = 0; i < g.n_cols(); ++i)
      EXPECT_EQ(g.height_at(-100.0 + 50.0 * i, 20.0 + 50.0 * j), g.heights()(j, i));
}

TEST(Terrain, MidpointOfTwoByTwo) {
  TerrainGrid::HeightMatrix h(2, 2);
  h << 0.0, 0.0, 100.0, 100.0;  // varies along y only
  const TerrainGrid g(0.0, 0.0, 10.0, h);
  EXPECT_DOUBLE_EQ(g.height_at(5.0, 5.0), 50.0);
  EXPECT_DOUBLE_EQ(g.agl(Vec3(5.0, 5.0, 750.0)), 700.0);
}

TEST(Terrain, MatchesBilinearOracle) {
  const TerrainGrid g = generate_terrain(11, 20, 15, 30.0, 900.0, 5.0, -7.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(g.origin_x(), g.max_x());
  std::uniform_real_distribution<double> uy(g.origin_y(), g.max_y());
  for (int k = 0; k < 1000; ++k) {
    const double x = ux(rng);
    const double y = uy(rng);
    EXPECT_NEAR(g.height_at(x, y), bilinear_oracle(g, x, y), 1e-9);
  }
}

TEST(Terrain, AglIdentityAndSurfaceContact) {
  const TerrainGrid flat(0.0, 0.0, 100.0, heights(3, 3, 300.0));
  EXPECT_DOUBLE_EQ(flat.agl(Vec3(50.0, 50.0, 800.0)), 500.0);
  const TerrainGrid g = generate_terrain(5, 30, 30, 40.0, 500.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, g.max_x());
  for (int k = 0; k < 200; ++k) {
    const Vec3 p(u(rng), u(rng), 1234.5);
    EXPECT_NEAR(g.agl(p) + g.height_at(p.x(), p.y()), p.z(), 1e-12);
    EXPECT_DOUBLE_EQ(g.agl(Vec3(p.x(), p.y(), g.height_at(p.x(), p.y()))), 0.0);
  }
}

TEST(Terrain, ContinuousOnGeneratedGrid) {
  const TerrainGrid g = generate_terrain(7, 64, 64, 100.0, 1000.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, g.max_x() - 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng);
    const double y = u(rng);
    EXPECT_LT(std::abs(g.height_at(x, y) - g.height_at(x + 1e-6, y + 1e-6)), 1e-3);
  }
}

TEST(Terrain, OutOfMapThrows) {
  const TerrainGrid g(0.0, 0.0, 100.0, heights(3, 3, 0.0));
  EXPECT_FALSE(g.contains(-1.0, 50.0));
  EXPECT_THROW(g.height_at(-1.0, 50.0), OutOfMapError);
  EXPECT_THROW(g.height_at(50.0, 200.5), OutOfMapError);
  EXPECT_THROW(g.agl(Vec3(201.0, 0.0, 0.0)), OutOfMapError);
  EXPECT_NO_THROW(g.height_at(200.0, 200.0));
}

TEST(Terrain, RejectsInvalidGrids) {
  EXPECT_THROW(TerrainGrid(0.0, 0.0, 100.0, heights(1, 3, 0.0)), Error);
  EXPECT_THROW(TerrainGrid(0.0, 0.0, 0.0, heights(3, 3, 0.0)), Error);
  auto h = heights(3, 3, 0.0);
  h(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(TerrainGrid(0.0, 0.0, 100.0, h), Error);
}

TEST(Terrain, GeneratorRelief) {
  const TerrainGrid flat = generate_terrain(7, 16, 16, 100.0, 0.0);
  EXPECT_EQ(flat.heights().cwiseAbs().maxCoeff(), 0.0);

  const TerrainGrid g = generate_terrain(7, 128, 96, 100.0, 1000.0);
  const double span = g.heights().maxCoeff() - g.heights().minCoeff();
  EXPECT_LE(span, 1000.0);
  EXPECT_GT(span, 900.0);
}

TEST(Terrain, GeneratorIsDeterministic) {
  EXPECT_EQ(generate_terrain(42, 40, 30, 50.0, 800.0), generate_terrain(42, 40, 30, 50.0, 800.0));
  EXPECT_FALSE(generate_terrain(42, 40, 30, 50.0, 800.0) == generate_terrain(43, 40, 30, 50.0, 800.0));
}

TEST(Terrain, DemRoundTrips) {
  const TerrainGrid g = generate_terrain(9, 33, 21, 75.0, 1200.0, 1000.0, -500.0);
  const auto bin = temp_path("roundtrip.dem");
  const auto txt = temp_path("roundtrip.txt");
  save_dem(g, bin);
  save_dem_text(g, txt);
  EXPECT_EQ(load_dem(bin), g);
  EXPECT_EQ(load_dem(txt), g);

  std::ifstream in(bin, std::ios::binary);
  std::string magic(9, '\0');
  in.read(magic.data(), 9);
  EXPECT_EQ(magic, "TFTA-DEM1");
  EXPECT_EQ(std::filesystem::file_size(bin), 9u + 8u + 24u + 4u * 33u * 21u);
  std::filesystem::remove(bin);
  std::filesystem::remove(txt);
}

TEST(Terrain, HandWrittenTextDem) {
  const auto path = temp_path("hand.txt");
  {
    std::ofstream out(path);
    out << "3 2 0 0 10\n1 2 3\n4 5 6\n";
  }
  const TerrainGrid g = load_dem(path);
  EXPECT_EQ(g.n_cols(), 3u);
  EXPECT_EQ(g.n_rows(), 2u);
  EXPECT_DOUBLE_EQ(g.height_at(20.0, 10.0), 6.0);
  EXPECT_DOUBLE_EQ(g.height_at(5.0, 5.0), 3.0);
  std::filesystem::remove(path);
}

TEST(Terrain, TruncatedDemIsRejected) {
  const auto path = temp_path("short.dem");
  save_dem(generate_terrain(1, 8, 8, 10.0, 10.0), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  EXPECT_THROW(load_dem(path), Error);
  EXPECT_THROW(load_dem(temp_path("does_not_exist.dem")), Error);
  std::filesystem::remove(path);
}
