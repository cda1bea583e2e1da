#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tfta/common.hpp"

namespace tfta {

/// Regular heightmap. Sample (i, j) sits at (origin_x + i*cell_size,
/// origin_y + j*cell_size); heights are row-major with j indexing rows.
/// Immutable after construction.
class TerrainGrid {
 public:
  using HeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  TerrainGrid(double origin_x, double origin_y, double cell_size, HeightMatrix heights);

  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double cell_size() const { return cell_size_; }
  std::uint32_t n_cols() const { return static_cast<std::uint32_t>(heights_.cols()); }
  std::uint32_t n_rows() const { return static_cast<std::uint32_t>(heights_.rows()); }
  const HeightMatrix& heights() const { return heights_; }

  double max_x() const { return origin_x_ + cell_size_ * (heights_.cols() - 1); }
  double max_y() const { return origin_y_ + cell_size_ * (heights_.rows() - 1); }

  bool contains(double x, double y) const;

  /// Bilinear interpolation; throws OutOfMapError outside the sample rectangle.
  double height_at(double x, double y) const;

  /// Height above ground (negative below the surface).
  double agl(const Vec3& position) const { return position.z() - height_at(position.x(), position.y()); }

  bool operator==(const TerrainGrid& other) const = default;

 private:
  double origin_x_;
  double origin_y_;
  double cell_size_;
  HeightMatrix heights_;
};

inline double height_at(const TerrainGrid& grid, double x, double y) { return grid.height_at(x, y); }
inline double agl(const TerrainGrid& grid, const Vec3& position) { return grid.agl(position); }

/// Seeded sum of Gaussian hills and valleys rescaled so that
/// max(h) - min(h) == relief (flat zeros when relief == 0). Heights are
/// rounded to float so a DEM save/load round trip is exact.
TerrainGrid generate_terrain(std::uint64_t seed, std::uint32_t n_cols, std::uint32_t n_rows,
                             double cell_size, double relief, double origin_x = 0.0,
                             double origin_y = 0.0);

// DEM files: binary "TFTA-DEM1" (little-endian) or the plain-text variant.
void save_dem(const TerrainGrid& grid, const std::filesystem::path& path);
void save_dem_text(const TerrainGrid& grid, const std::filesystem::path& path);
/// Detects binary vs text by the magic prefix.
TerrainGrid load_dem(const std::filesystem::path& path);

}  // namespace tfta
