#include "tfta/terrain.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace tfta {

namespace {

constexpr std::array<char, 9> kDemMagic = {'T', 'F', 'T', 'A', '-', 'D', 'E', 'M', '1'};

static_assert(std::endian::native == std::endian::little,
              "DEM I/O assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("DEM file truncated");
  return value;
}

}  // namespace

TerrainGrid::TerrainGrid(double origin_x, double origin_y, double cell_size, HeightMatrix heights)
    : origin_x_(origin_x), origin_y_(origin_y), cell_size_(cell_size), heights_(std::move(heights)) {
  if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_)) throw Error("terrain cell_size must be > 0");
  if (heights_.rows() < 2 || heights_.cols() < 2) throw Error("terrain grid needs at least 2x2 samples");
  if (!heights_.allFinite()) throw Error("terrain heights must be finite");
  if (!std::isfinite(origin_x_) || !std::isfinite(origin_y_)) throw Error("terrain origin must be finite");
}

bool TerrainGrid::contains(double x, double y) const {
  return x >= origin_x_ && x <= max_x() && y >= origin_y_ && y <= max_y();
}

double TerrainGrid::height_at(double x, double y) const {
  if (!contains(x, y)) {
    std::ostringstream msg;
    msg << "query (" << x << ", " << y << ") is outside the terrain map";
    throw OutOfMapError(msg.str());
  }
  const double gx = (x - origin_x_) / cell_size_;
  const double gy = (y - origin_y_) / cell_size_;
  const Eigen::Index last_col = heights_.cols() - 2;
  const Eigen::Index last_row = heights_.rows() - 2;
  const Eigen::Index i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(gx)), 0, last_col);
  const Eigen::Index j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(gy)), 0, last_row);
  const double fx = std::clamp(gx - static_cast<double>(i), 0.0, 1.0);
  const double fy = std::clamp(gy - static_cast<double>(j), 0.0, 1.0);

  // Weighted form (not nested lerp) so fx, fy in {0, 1} reproduce samples exactly.
  const double h00 = heights_(j, i);
  const double h10 = heights_(j, i + 1);
  const double h01 = heights_(j + 1, i);
  const double h11 = heights_(j + 1, i + 1);
  return (1.0 - fx) * (1.0 - fy) * h00 + fx * (1.0 - fy) * h10 + (1.0 - fx) * fy * h01 + fx * fy * h11;
}

TerrainGrid generate_terrain(std::uint64_t seed, std::uint32_t n_cols, std::uint32_t n_rows,
                             double cell_size, double relief, double origin_x, double origin_y) {
  if (!(relief >= 0.0)) throw Error("relief must be >= 0");
  if (n_cols < 2 || n_rows < 2) throw Error("terrain grid needs at least 2x2 samples");
  TerrainGrid::HeightMatrix h = TerrainGrid::HeightMatrix::Zero(n_rows, n_cols);
  if (relief == 0.0) return TerrainGrid(origin_x, origin_y, cell_size, std::move(h));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double width = cell_size * (n_cols - 1);
  const double height = cell_size * (n_rows - 1);
  const double extent = std::max(width, height);

  struct Bump {
    double cx, cy, sigma, amplitude;
  };
  constexpr int kBumps = 24;
  std::vector<Bump> bumps;
  bumps.reserve(kBumps);
  for (int k = 0; k < kBumps; ++k) {
    Bump b{};
    b.cx = unit(rng) * width;
    b.cy = unit(rng) * height;
    b.sigma = extent * (0.04 + 0.14 * unit(rng));
    // Mostly hills with some valleys.
    b.amplitude = (unit(rng) < 0.75 ? 1.0 : -0.6) * (0.3 + 0.7 * unit(rng));
    bumps.push_back(b);
  }

  for (std::uint32_t j = 0; j < n_rows; ++j) {
    const double y = cell_size * j;
    for (std::uint32_t i = 0; i < n_cols; ++i) {
      const double x = cell_size * i;
      double v = 0.0;
      for (const Bump& b : bumps) {
        const double dx = x - b.cx;
        const double dy = y - b.cy;
        v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      h(j, i) = v;
    }
  }

  const double lo = h.minCoeff();
  const double hi = h.maxCoeff();
  const double span = hi - lo;
  if (span <= 0.0) {
    h.setZero();
  } else {
    for (Eigen::Index j = 0; j < h.rows(); ++j)
      for (Eigen::Index i = 0; i < h.cols(); ++i)
        h(j, i) = static_cast<double>(static_cast<float>((h(j, i) - lo) / span * relief));
  }
  return TerrainGrid(origin_x, origin_y, cell_size, std::move(h));
}

void save_dem(const TerrainGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open DEM file for writing: " + path.string());
  out.write(kDemMagic.data(), kDemMagic.size());
  write_raw<std::uint32_t>(out, grid.n_cols());
  write_raw<std::uint32_t>(out, grid.n_rows());
  write_raw<double>(out, grid.origin_x());
  write_raw<double>(out, grid.origin_y());
  write_raw<double>(out, grid.cell_size());
  const auto& h = grid.heights();
  for (Eigen::Index j = 0; j < h.rows(); ++j)
    for (Eigen::Index i = 0; i < h.cols(); ++i) write_raw<float>(out, static_cast<float>(h(j, i)));
  if (!out) throw Error("failed writing DEM file: " + path.string());
}

void save_dem_text(const TerrainGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open DEM file for writing: " + path.string());
  out.precision(17);
  out << grid.n_cols() << ' ' << grid.n_rows() << ' ' << grid.origin_x() << ' ' << grid.origin_y() << ' '
      << grid.cell_size() << '\n';
  const auto& h = grid.heights();
  for (Eigen::Index j = 0; j < h.rows(); ++j) {
    for (Eigen::Index i = 0; i < h.cols(); ++i) out << (i ? " " : "") << h(j, i);
    out << '\n';
  }
  if (!out) throw Error("failed writing DEM file: " + path.string());
}

TerrainGrid load_dem(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open DEM file: " + path.string());
  std::array<char, 9> magic{};
  in.read(magic.data(), magic.size());
  if (in && magic == kDemMagic) {
    const auto n_cols = read_raw<std::uint32_t>(in);
    const auto n_rows = read_raw<std::uint32_t>(in);
    const auto ox = read_raw<double>(in);
    const auto oy = read_raw<double>(in);
    const auto cell = read_raw<double>(in);
    if (n_cols < 2 || n_rows < 2) throw Error("DEM header has fewer than 2x2 samples");
    TerrainGrid::HeightMatrix h(n_rows, n_cols);
    for (std::uint32_t j = 0; j < n_rows; ++j)
      for (std::uint32_t i = 0; i < n_cols; ++i) h(j, i) = static_cast<double>(read_raw<float>(in));
    return TerrainGrid(ox, oy, cell, std::move(h));
  }

  // Text variant.
  in.clear();
  in.seekg(0);
  long long n_cols = 0;
  long long n_rows = 0;
  double ox = 0.0;
  double oy = 0.0;
  double cell = 0.0;
  if (!(in >> n_cols >> n_rows >> ox >> oy >> cell)) throw Error("malformed DEM text header: " + path.string());
  if (n_cols < 2 || n_rows < 2) throw Error("DEM header has fewer than 2x2 samples");
  TerrainGrid::HeightMatrix h(n_rows, n_cols);
  for (long long j = 0; j < n_rows; ++j)
    for (long long i = 0; i < n_cols; ++i)
      if (!(in >> h(j, i))) throw Error("DEM text body truncated: " + path.string());
  return TerrainGrid(ox, oy, cell, std::move(h));
}

}  // namespace tfta
