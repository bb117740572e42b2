#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace valo::voxel {

struct Point {
  double x = 0.0, y = 0.0, z = 0.0; // meters
  double intensity = 0.0;           // [0, 1]
};

struct Coord {
  int32_t x = 0, y = 0, z = 0;

  bool operator==(const Coord&) const = default;
};

// Canonical coordinate order: lexicographic (z, y, x).
inline bool coord_less(const Coord& a, const Coord& b) {
  if (a.z != b.z) return a.z < b.z;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

// Placement of the voxel lattice in space.
struct GridGeometry {
  std::array<double, 3> voxel_size{0.075, 0.075, 0.2}; // meters per axis
  std::array<double, 3> origin{-54.0, -54.0, -5.0};    // min corner, meters
  std::array<int32_t, 3> dims{1440, 1440, 40};         // voxels per axis

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (voxel_size[a] <= 0.0)
        throw std::invalid_argument("grid: voxel_size must be > 0");
      if (dims[a] <= 0)
        throw std::invalid_argument("grid: dims must be > 0");
    }
  }
};

// COO sparse voxel tensor. Coordinates are unique and kept in canonical
// (z, y, x) lexicographic order; features is a flat row-major
// [num_voxels x feature_dim] array. voxelize() fills feature_dim = 2 with
// (point count, mean intensity).
struct SparseVoxelGrid {
  GridGeometry geom;
  std::vector<Coord> coords;
  std::vector<double> features;
  int feature_dim = 0;

  size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }

  const double* feature_row(size_t i) const {
    return features.data() + i * static_cast<size_t>(feature_dim);
  }
};

// Equal vertical slices of the grid along the x (width) axis.
struct RegionPartition {
  int num_regions = 18;
  int region_width = 80; // voxels

  static RegionPartition make(int grid_width, int num_regions) {
    if (num_regions < 2)
      throw std::invalid_argument("partition: num_regions must be >= 2");
    if (grid_width % num_regions != 0)
      throw std::invalid_argument(
          "partition: grid width " + std::to_string(grid_width) +
          " not divisible by num_regions " + std::to_string(num_regions));
    return RegionPartition{num_regions, grid_width / num_regions};
  }

  int region_of(int32_t ix) const { return ix / region_width; }
};

// Region index of an x coordinate at an arbitrary horizontal extent. Equals
// ix / (extent_x / num_regions) whenever the extent divides evenly; the
// general form keeps region attribution well-defined at downsampled extents.
inline int region_at_extent(int32_t ix, int32_t extent_x, int num_regions) {
  return static_cast<int>((static_cast<int64_t>(ix) * num_regions) / extent_x);
}

// Schedulable region span: ordered region indices from the first non-empty
// region to the last, with interior empty regions retained, and their
// aligned voxel counts.
struct RegionCounts {
  std::vector<int> regions;      // R_S
  std::vector<int64_t> counts;   // C_S

  bool empty() const { return regions.empty(); }
  int64_t total() const {
    int64_t s = 0;
    for (int64_t c : counts) s += c;
    return s;
  }
};

inline SparseVoxelGrid voxelize(const std::vector<Point>& points,
                                const GridGeometry& geom) {
  geom.validate();
  SparseVoxelGrid grid;
  grid.geom = geom;
  grid.feature_dim = 2;
  if (points.empty()) return grid;

  struct Binned {
    Coord c;
    double intensity;
  };
  std::vector<Binned> binned;
  binned.reserve(points.size());
  for (const Point& p : points) {
    const int64_t ix = static_cast<int64_t>(
        std::floor((p.x - geom.origin[0]) / geom.voxel_size[0]));
    const int64_t iy = static_cast<int64_t>(
        std::floor((p.y - geom.origin[1]) / geom.voxel_size[1]));
    const int64_t iz = static_cast<int64_t>(
        std::floor((p.z - geom.origin[2]) / geom.voxel_size[2]));
    if (ix < 0 || ix >= geom.dims[0] || iy < 0 || iy >= geom.dims[1] ||
        iz < 0 || iz >= geom.dims[2])
      continue; // outside extent
    binned.push_back({Coord{static_cast<int32_t>(ix), static_cast<int32_t>(iy),
                            static_cast<int32_t>(iz)},
                      p.intensity});
  }
  std::sort(binned.begin(), binned.end(),
            [](const Binned& a, const Binned& b) { return coord_less(a.c, b.c); });

  for (size_t i = 0; i < binned.size();) {
    size_t j = i;
    double intensity_sum = 0.0;
    while (j < binned.size() && binned[j].c == binned[i].c) {
      intensity_sum += binned[j].intensity;
      ++j;
    }
    const double n = static_cast<double>(j - i);
    grid.coords.push_back(binned[i].c);
    grid.features.push_back(n);
    grid.features.push_back(intensity_sum / n);
    i = j;
  }
  return grid;
}

// Alg. 1 count_voxels: per-region voxel counts over the span from the first
// non-empty region to the last. Leading/trailing empty regions are skipped;
// interior empty regions are retained so the span stays spatially contiguous.
inline RegionCounts count_voxels(const SparseVoxelGrid& grid,
                                 const RegionPartition& part) {
  RegionCounts rc;
  if (grid.empty()) return rc;
  std::vector<int64_t> per_region(part.num_regions, 0);
  for (const Coord& c : grid.coords) ++per_region[part.region_of(c.x)];
  int first = 0, last = part.num_regions - 1;
  while (per_region[first] == 0) ++first;
  while (per_region[last] == 0) --last;
  for (int r = first; r <= last; ++r) {
    rc.regions.push_back(r);
    rc.counts.push_back(per_region[r]);
  }
  return rc;
}

// Keep only voxels whose x index falls inside one of the selected regions.
// Canonical ordering is preserved (stable filter of an ordered list).
inline SparseVoxelGrid filter_regions(const SparseVoxelGrid& grid,
                                      const std::vector<int>& selected,
                                      const RegionPartition& part) {
  std::vector<char> keep(part.num_regions, 0);
  for (int r : selected) {
    if (r < 0 || r >= part.num_regions)
      throw std::invalid_argument("filter_regions: region out of range");
    keep[r] = 1;
  }
  SparseVoxelGrid out;
  out.geom = grid.geom;
  out.feature_dim = grid.feature_dim;
  for (size_t i = 0; i < grid.coords.size(); ++i) {
    if (!keep[part.region_of(grid.coords[i].x)]) continue;
    out.coords.push_back(grid.coords[i]);
    for (int f = 0; f < grid.feature_dim; ++f)
      out.features.push_back(grid.feature_row(i)[f]);
  }
  return out;
}

// Debug dump: CSV of (ix, iy, iz, count).
inline void write_grid_csv(const SparseVoxelGrid& grid,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "ix,iy,iz,count\n";
  for (size_t i = 0; i < grid.coords.size(); ++i) {
    const Coord& c = grid.coords[i];
    const int64_t n =
        grid.feature_dim > 0 ? static_cast<int64_t>(grid.feature_row(i)[0]) : 0;
    out << c.x << ',' << c.y << ',' << c.z << ',' << n << '\n';
  }
}

} // namespace valo::voxel
