#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "valo/dethead.hpp"
#include "valo/forecast.hpp"
#include "valo/rng.hpp"
#include "valo/sparseprop.hpp"

// Verification-only oracles and randomized suites. Everything here must stay
// independent of the implementation paths it checks: the sparse-propagation
// oracle works on a densified tensor, never on coordinate lists.
namespace valo::verify {

using sparseprop::Extent;
using sparseprop::LayerKind;
using sparseprop::LayerSpec;
using voxel::Coord;

// Dense-support oracle: densify the active set, convolve with an all-ones
// kernel (zero padding kernel/2, the layer's stride), keep cells with a
// positive response, re-sparsify in canonical order.
inline std::vector<Coord> dense_support_oracle(const std::vector<Coord>& coords,
                                               const Extent& extent,
                                               const LayerSpec& layer) {
  if (layer.kind == LayerKind::submanifold) return coords;
  const size_t nx = static_cast<size_t>(extent[0]);
  const size_t ny = static_cast<size_t>(extent[1]);
  const size_t nz = static_cast<size_t>(extent[2]);
  std::vector<uint8_t> dense(nx * ny * nz, 0);
  for (const Coord& c : coords)
    dense[(static_cast<size_t>(c.z) * ny + c.y) * nx + c.x] = 1;

  const Extent out_ext = sparseprop::output_extent(extent, layer);
  std::vector<Coord> out;
  const int hx = layer.kernel[0] / 2, hy = layer.kernel[1] / 2,
            hz = layer.kernel[2] / 2;
  for (int32_t oz = 0; oz < out_ext[2]; ++oz)
    for (int32_t oy = 0; oy < out_ext[1]; ++oy)
      for (int32_t ox = 0; ox < out_ext[0]; ++ox) {
        int64_t acc = 0;
        const int32_t bz = oz * layer.stride[2] - hz;
        const int32_t by = oy * layer.stride[1] - hy;
        const int32_t bx = ox * layer.stride[0] - hx;
        for (int kz = 0; kz < layer.kernel[2] && acc == 0; ++kz) {
          const int32_t z = bz + kz;
          if (z < 0 || z >= extent[2]) continue;
          for (int ky = 0; ky < layer.kernel[1] && acc == 0; ++ky) {
            const int32_t y = by + ky;
            if (y < 0 || y >= extent[1]) continue;
            for (int kx = 0; kx < layer.kernel[0]; ++kx) {
              const int32_t x = bx + kx;
              if (x < 0 || x >= extent[0]) continue;
              if (dense[(static_cast<size_t>(z) * ny + y) * nx + x]) {
                acc = 1;
                break;
              }
            }
          }
        }
        if (acc > 0) out.push_back(Coord{ox, oy, oz});
      }
  return out;
}

inline std::vector<Coord> random_coords(Rng& rng, const Extent& ext,
                                        int max_voxels) {
  const int n = static_cast<int>(rng.below(static_cast<uint64_t>(max_voxels) + 1));
  std::vector<Coord> coords;
  for (int i = 0; i < n; ++i)
    coords.push_back(Coord{static_cast<int32_t>(rng.below(ext[0])),
                           static_cast<int32_t>(rng.below(ext[1])),
                           static_cast<int32_t>(rng.below(ext[2]))});
  std::sort(coords.begin(), coords.end(), voxel::coord_less);
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  return coords;
}

inline LayerSpec random_layer(Rng& rng) {
  LayerSpec l;
  l.kind = rng.u01() < 0.4 ? LayerKind::submanifold : LayerKind::sparse;
  for (int a = 0; a < 3; ++a) {
    l.kernel[a] = 1 + 2 * static_cast<int>(rng.below(3)); // 1, 3, 5
    l.stride[a] =
        l.kind == LayerKind::submanifold ? 1 : 1 + static_cast<int>(rng.below(3));
  }
  return l;
}

struct SuiteResult {
  std::string name;
  int trials = 0;
  int failures = 0;
  double max_abs_deviation = 0.0;
  std::string note;

  bool passed() const { return failures == 0; }
};

// Exact set equality between propagate and the dense-support oracle over
// random grids and random layer stacks.
inline SuiteResult run_sparseprop_suite(int trials, uint64_t seed,
                                        int max_extent = 64,
                                        int max_voxels = 500) {
  SuiteResult res;
  res.name = "sparseprop-dense-oracle";
  res.trials = trials;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    Extent ext;
    for (int a = 0; a < 3; ++a)
      ext[a] = 4 + static_cast<int32_t>(rng.below(max_extent - 3));
    if (t % 8 == 0) ext = {max_extent, max_extent, max_extent};
    std::vector<Coord> coords = random_coords(rng, ext, max_voxels);
    const int layers = 1 + static_cast<int>(rng.below(3));
    for (int li = 0; li < layers; ++li) {
      const LayerSpec layer = random_layer(rng);
      const std::vector<Coord> got = sparseprop::propagate(coords, ext, layer);
      const std::vector<Coord> want = dense_support_oracle(coords, ext, layer);
      if (got.size() != want.size() ||
          !std::equal(got.begin(), got.end(), want.begin())) {
        ++res.failures;
        break;
      }
      coords = got;
      ext = sparseprop::output_extent(ext, layer);
    }
  }
  return res;
}

// Gathered-vs-full equivalence of the detection-head attribute convolutions,
// plus the MAC-ratio accounting. perturb feeds the mutation hook in the
// gathered path; any nonzero value must be caught as a failure.
inline SuiteResult run_dethead_suite(int trials, uint64_t seed,
                                     double tolerance = 1e-6,
                                     double perturb = 0.0) {
  SuiteResult res;
  res.name = "dethead-equivalence";
  res.trials = trials;
  Rng rng(seed);
  double min_ratio = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int h = 6 + static_cast<int>(rng.below(26));
    const int w = 6 + static_cast<int>(rng.below(26));
    const int cin = 1 + static_cast<int>(rng.below(3));
    const int k = 1 + 2 * static_cast<int>(rng.below(2)); // 1 or 3
    DenseGrid2D input(h, w, cin);
    for (double& v : input.data) v = rng.uniform(-1.0, 1.0);

    std::vector<dethead::ConvSpec> specs;
    const int num_specs = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < num_specs; ++s) {
      dethead::ConvSpec spec;
      spec.kernel = k;
      spec.in_channels = cin;
      spec.out_channels = 1 + static_cast<int>(rng.below(3));
      spec.weights.resize(static_cast<size_t>(spec.out_channels) * cin * k * k);
      spec.bias.resize(spec.out_channels);
      for (double& v : spec.weights) v = rng.uniform(-1.0, 1.0);
      for (double& v : spec.bias) v = rng.uniform(-0.5, 0.5);
      specs.push_back(spec);
    }

    const int np = static_cast<int>(rng.below(12)); // includes empty batches
    std::vector<dethead::Proposal> proposals;
    for (int p = 0; p < np; ++p)
      proposals.push_back({rng.u01(), static_cast<int>(rng.below(w)),
                           static_cast<int>(rng.below(h))});

    const dethead::PatchBatch patches =
        dethead::gather_patches(input, proposals, k);
    const auto gathered =
        dethead::attribute_conv_gathered(patches, specs, perturb);

    std::vector<DenseGrid2D> fulls;
    for (const auto& s : specs)
      fulls.push_back(dethead::attribute_conv_full(input, s));

    bool ok = true;
    for (size_t b = 0; b < proposals.size(); ++b) {
      size_t col = 0;
      for (size_t si = 0; si < specs.size(); ++si)
        for (int oc = 0; oc < specs[si].out_channels; ++oc, ++col) {
          const double dev = std::fabs(
              gathered[b][col] -
              fulls[si].at(proposals[b].y, proposals[b].x, oc));
          res.max_abs_deviation = std::max(res.max_abs_deviation, dev);
          if (dev > tolerance) ok = false;
        }
    }
    if (!ok) ++res.failures;

    dethead::MacDims dims{h, w, k, cin, specs[0].out_channels};
    const int64_t full = dethead::mac_count(dethead::MacMode::full, dims, np);
    const int64_t gath =
        dethead::mac_count(dethead::MacMode::gathered, dims, np);
    if (np > 0) {
      const double ratio = static_cast<double>(full) / static_cast<double>(gath);
      min_ratio = min_ratio == 0.0 ? ratio : std::min(min_ratio, ratio);
    }
  }
  res.note = "min MAC ratio " + std::to_string(min_ratio);
  return res;
}

// Forecast round trips: forward by dt then back by -dt with swapped ego
// poses must reproduce the pose.
inline SuiteResult run_forecast_suite(int trials, uint64_t seed,
                                      double tolerance = 1e-9) {
  SuiteResult res;
  res.name = "forecast-roundtrip";
  res.trials = trials;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    forecast::ObjectPose pose;
    pose.position = {rng.uniform(-50, 50), rng.uniform(-50, 50),
                     rng.uniform(-2, 2)};
    pose.heading = rng.uniform(-3.0, 3.0);
    pose.velocity = {rng.uniform(-15, 15), rng.uniform(-15, 15)};
    pose.t_det = rng.uniform(0.0, 10.0);

    EgoPose ego_a, ego_b;
    ego_a.timestamp = pose.t_det;
    ego_a.position = {rng.uniform(-100, 100), rng.uniform(-100, 100), 0.0};
    ego_a.yaw = normalize_angle(rng.uniform(-3.14, 3.14));
    const double dt = rng.uniform(0.05, 2.0);
    ego_b.timestamp = pose.t_det + dt;
    ego_b.position = {rng.uniform(-100, 100), rng.uniform(-100, 100), 0.0};
    ego_b.yaw = normalize_angle(rng.uniform(-3.14, 3.14));

    const forecast::ObjectPose fwd =
        forecast::forecast_pose(pose, ego_a, ego_b, pose.t_det + dt);
    const forecast::ObjectPose back =
        forecast::forecast_pose(fwd, ego_b, ego_a, pose.t_det);

    const double err = std::max(
        {std::fabs(back.position.x - pose.position.x),
         std::fabs(back.position.y - pose.position.y),
         std::fabs(back.position.z - pose.position.z),
         std::fabs(normalize_angle(back.heading - pose.heading))});
    res.max_abs_deviation = std::max(res.max_abs_deviation, err);
    if (err > tolerance) ++res.failures;
  }
  return res;
}

} // namespace valo::verify
