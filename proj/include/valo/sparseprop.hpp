#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "valo/dense_grid.hpp"
#include "valo/rng.hpp"
#include "valo/voxel.hpp"

namespace valo::sparseprop {

using voxel::Coord;

enum class LayerKind { submanifold, sparse };

// One sparse-convolution layer, described only by what determines its active
// coordinate set: kernel and stride per axis. Weights never matter here.
struct LayerSpec {
  LayerKind kind = LayerKind::submanifold;
  std::array<int, 3> kernel{3, 3, 3};
  std::array<int, 3> stride{1, 1, 1};

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (kernel[a] < 1 || kernel[a] % 2 == 0)
        throw std::invalid_argument("layer: kernel must be odd and >= 1");
      if (stride[a] < 1)
        throw std::invalid_argument("layer: stride must be >= 1");
      if (kind == LayerKind::submanifold && stride[a] != 1)
        throw std::invalid_argument("layer: submanifold implies stride 1");
    }
  }

  bool preserves_active_set() const { return kind == LayerKind::submanifold; }
};

// A block is a maximal run of layers whose input active-set sizes all equal
// the block's input size, so only the final layer of a block may change the
// active set.
struct BlockSpec {
  std::vector<LayerSpec> layers;

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("block: no layers");
    for (size_t i = 0; i < layers.size(); ++i) {
      layers[i].validate();
      if (i + 1 < layers.size() && !layers[i].preserves_active_set())
        throw std::invalid_argument(
            "block: a layer that changes the active set must end its block");
    }
  }
};

struct BackboneSpec {
  std::vector<BlockSpec> blocks;

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("backbone: no blocks");
    for (const auto& b : blocks) b.validate();
  }

  size_t num_blocks() const { return blocks.size(); }

  // Split a flat layer chain into blocks at each active-set-changing layer.
  static BackboneSpec from_layers(const std::vector<LayerSpec>& chain) {
    BackboneSpec bb;
    BlockSpec cur;
    for (const auto& l : chain) {
      cur.layers.push_back(l);
      if (!l.preserves_active_set()) {
        bb.blocks.push_back(cur);
        cur.layers.clear();
      }
    }
    if (!cur.layers.empty()) bb.blocks.push_back(cur);
    bb.validate();
    return bb;
  }

  // Default 4-block stack with the count-change structure of a typical
  // voxel-encoder 3D backbone: three stride-2 downsampling stages.
  static BackboneSpec default_spec() {
    const LayerSpec sm{LayerKind::submanifold, {3, 3, 3}, {1, 1, 1}};
    const LayerSpec sp{LayerKind::sparse, {3, 3, 3}, {2, 2, 2}};
    BackboneSpec bb;
    bb.blocks = {BlockSpec{{sm, sm, sp}}, BlockSpec{{sm, sm, sp}},
                 BlockSpec{{sm, sm, sp}}, BlockSpec{{sm, sm}}};
    return bb;
  }
};

using Extent = std::array<int32_t, 3>;

inline Extent output_extent(const Extent& in, const LayerSpec& layer) {
  Extent out;
  for (int a = 0; a < 3; ++a)
    out[a] = (in[a] + layer.stride[a] - 1) / layer.stride[a]; // ceil
  return out;
}

// Active-set transform of one layer. Submanifold: identity. Sparse: an
// output coordinate is active wherever its filter footprint (kernel centered
// with same-padding, stride applied) overlaps at least one input coordinate;
// outputs are clipped to the strided extent.
inline std::vector<Coord> propagate(const std::vector<Coord>& coords,
                                    const Extent& extent,
                                    const LayerSpec& layer) {
  layer.validate();
  if (layer.preserves_active_set()) return coords;

  const Extent out_ext = output_extent(extent, layer);
  std::vector<uint64_t> keys;
  keys.reserve(coords.size() * 4);
  std::array<int, 3> half{layer.kernel[0] / 2, layer.kernel[1] / 2,
                          layer.kernel[2] / 2};
  auto out_range = [&](int32_t c, int axis, int32_t& lo, int32_t& hi) {
    // outputs o with o*stride in [c-half, c+half]
    const int s = layer.stride[axis];
    lo = static_cast<int32_t>(
        std::max<int64_t>(0, (c - half[axis] + s - 1) / s));
    if (c - half[axis] < 0) lo = 0;
    hi = static_cast<int32_t>(
        std::min<int64_t>(out_ext[axis] - 1, (c + half[axis]) / s));
  };
  for (const Coord& c : coords) {
    int32_t xlo, xhi, ylo, yhi, zlo, zhi;
    out_range(c.x, 0, xlo, xhi);
    out_range(c.y, 1, ylo, yhi);
    out_range(c.z, 2, zlo, zhi);
    for (int32_t z = zlo; z <= zhi; ++z)
      for (int32_t y = ylo; y <= yhi; ++y)
        for (int32_t x = xlo; x <= xhi; ++x)
          keys.push_back((static_cast<uint64_t>(z) << 42) |
                         (static_cast<uint64_t>(y) << 21) |
                         static_cast<uint64_t>(x));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::vector<Coord> out;
  out.reserve(keys.size());
  for (uint64_t k : keys)
    out.push_back(Coord{static_cast<int32_t>(k & 0x1fffff),
                        static_cast<int32_t>((k >> 21) & 0x1fffff),
                        static_cast<int32_t>(k >> 42)});
  return out;
}

struct BackboneTrace {
  std::vector<int64_t> block_input_counts; // |V_B1| .. |V_Bn|
  std::vector<Coord> final_coords;
  Extent final_extent{0, 0, 0};
  std::vector<Extent> block_extents; // extent at each block's input
};

inline BackboneTrace run_backbone(const std::vector<Coord>& coords,
                                  const Extent& extent,
                                  const BackboneSpec& backbone) {
  backbone.validate();
  BackboneTrace tr;
  std::vector<Coord> active = coords;
  Extent ext = extent;
  for (const BlockSpec& block : backbone.blocks) {
    tr.block_input_counts.push_back(static_cast<int64_t>(active.size()));
    tr.block_extents.push_back(ext);
    for (const LayerSpec& layer : block.layers) {
      active = propagate(active, ext, layer);
      ext = output_extent(ext, layer);
    }
  }
  tr.final_coords = std::move(active);
  tr.final_extent = ext;
  return tr;
}

inline BackboneTrace run_backbone(const voxel::SparseVoxelGrid& grid,
                                  const BackboneSpec& backbone) {
  return run_backbone(grid.coords, grid.geom.dims, backbone);
}

// Matrix [region x block]: entry (r, b) counts block-b input coordinates
// whose x index maps to region r at block b's own horizontal extent.
struct RegionBlockCounts {
  int num_regions = 0;
  int num_blocks = 0;
  std::vector<int64_t> data; // row-major [region][block]

  int64_t& at(int region, int block) {
    return data[static_cast<size_t>(region) * num_blocks + block];
  }
  int64_t at(int region, int block) const {
    return data[static_cast<size_t>(region) * num_blocks + block];
  }
  int64_t block_total(int block) const {
    int64_t s = 0;
    for (int r = 0; r < num_regions; ++r) s += at(r, block);
    return s;
  }
};

inline RegionBlockCounts per_region_block_counts(
    const voxel::SparseVoxelGrid& grid, const BackboneSpec& backbone,
    const voxel::RegionPartition& part) {
  backbone.validate();
  RegionBlockCounts m;
  m.num_regions = part.num_regions;
  m.num_blocks = static_cast<int>(backbone.num_blocks());
  m.data.assign(static_cast<size_t>(m.num_regions) * m.num_blocks, 0);

  std::vector<Coord> active = grid.coords;
  Extent ext = grid.geom.dims;
  for (size_t b = 0; b < backbone.blocks.size(); ++b) {
    for (const Coord& c : active)
      ++m.at(voxel::region_at_extent(c.x, ext[0], part.num_regions),
             static_cast<int>(b));
    for (const LayerSpec& layer : backbone.blocks[b].layers) {
      active = propagate(active, ext, layer);
      ext = output_extent(ext, layer);
    }
  }
  return m;
}

// Ground-truth per-block latency: quadratic in the block's input count with
// optional multiplicative lognormal noise. sigma = 0 gives the exact
// quadratic, so closed-loop tests can demand equality.
struct CostOracle {
  struct BlockCost {
    double a = 0.0; // ms / voxel^2
    double b = 0.0; // ms / voxel
    double c = 1.0; // ms
  };
  std::vector<BlockCost> blocks;
  double sigma = 0.0;
  uint64_t seed = 0;

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("cost oracle: no blocks");
    for (const auto& bc : blocks) {
      if (bc.a < 0.0 || bc.b < 0.0)
        throw std::invalid_argument("cost oracle: a, b must be >= 0");
      if (bc.c <= 0.0)
        throw std::invalid_argument("cost oracle: c must be > 0");
    }
    if (sigma < 0.0)
      throw std::invalid_argument("cost oracle: sigma must be >= 0");
  }

  double noiseless(int block, int64_t n) const {
    const BlockCost& bc = blocks.at(static_cast<size_t>(block));
    const double x = static_cast<double>(n);
    return bc.a * x * x + bc.b * x + bc.c;
  }

  // Block-heterogeneous defaults for the default 4-block backbone: later
  // blocks carry more quadratic curvature, earlier blocks more linear cost.
  static CostOracle default_oracle() {
    CostOracle o;
    o.blocks = {{1.0e-9, 9.0e-4, 2.0},
                {4.0e-9, 7.0e-4, 1.5},
                {1.2e-8, 6.0e-4, 1.2},
                {3.0e-8, 5.0e-4, 1.0}};
    return o;
  }
};

// Per-block simulated durations for one backbone run. The noise stream is
// owned by the caller and advanced one draw per block.
inline std::vector<double> simulate_cost(const std::vector<int64_t>& counts,
                                         const CostOracle& oracle, Rng& rng) {
  oracle.validate();
  if (counts.size() != oracle.blocks.size())
    throw std::invalid_argument("simulate_cost: counts/blocks size mismatch");
  std::vector<double> out(counts.size());
  for (size_t b = 0; b < counts.size(); ++b) {
    double ms = oracle.noiseless(static_cast<int>(b), counts[b]);
    if (oracle.sigma > 0.0) ms *= std::exp(oracle.sigma * rng.normal());
    out[b] = ms;
  }
  return out;
}

// Dense H x W x C birds-eye-view projection: cell (y, x) accumulates the
// feature vectors of all coordinates that share (x, y); empty cells stay 0.
inline DenseGrid2D project_to_bev(const std::vector<Coord>& coords,
                                  const std::vector<double>& features,
                                  int feature_dim, const Extent& extent) {
  DenseGrid2D bev(extent[1], extent[0], std::max(feature_dim, 1));
  for (size_t i = 0; i < coords.size(); ++i) {
    const Coord& c = coords[i];
    for (int f = 0; f < feature_dim; ++f)
      bev.at(c.y, c.x, f) += features[i * static_cast<size_t>(feature_dim) + f];
    if (feature_dim == 0) bev.at(c.y, c.x, 0) += 1.0;
  }
  return bev;
}

} // namespace valo::sparseprop
