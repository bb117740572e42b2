#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "valo/dense_grid.hpp"

namespace valo::dethead {

struct Proposal {
  double confidence = 0.0;
  int x = 0, y = 0; // grid indices
};

// Dense k x k convolution, zero padding, stride 1.
struct ConvSpec {
  int kernel = 3;
  int in_channels = 1;
  int out_channels = 1;
  std::vector<double> weights; // [out][in][ky][kx]
  std::vector<double> bias;    // [out]

  void validate() const {
    if (kernel < 1 || kernel % 2 == 0)
      throw std::invalid_argument("conv: kernel must be odd");
    if (in_channels < 1 || out_channels < 1)
      throw std::invalid_argument("conv: channels must be >= 1");
    const size_t want = static_cast<size_t>(out_channels) * in_channels *
                        kernel * kernel;
    if (weights.size() != want)
      throw std::invalid_argument("conv: weight size mismatch");
    if (bias.size() != static_cast<size_t>(out_channels))
      throw std::invalid_argument("conv: bias size mismatch");
  }

  double weight(int oc, int ic, int ky, int kx) const {
    return weights[((static_cast<size_t>(oc) * in_channels + ic) * kernel +
                    ky) * kernel + kx];
  }
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

namespace detail {

inline double conv_at(const DenseGrid2D& in, const ConvSpec& spec, int oc,
                      int y, int x) {
  const int half = spec.kernel / 2;
  double acc = spec.bias[oc];
  for (int ic = 0; ic < spec.in_channels; ++ic)
    for (int ky = 0; ky < spec.kernel; ++ky) {
      const int sy = y + ky - half;
      if (sy < 0 || sy >= in.height) continue;
      for (int kx = 0; kx < spec.kernel; ++kx) {
        const int sx = x + kx - half;
        if (sx < 0 || sx >= in.width) continue;
        acc += spec.weight(oc, ic, ky, kx) * in.at(sy, sx, ic);
      }
    }
  return acc;
}

} // namespace detail

// Heatmap branch: full-grid convolution followed by sigmoid, so every cell
// holds a confidence in (0, 1).
inline DenseGrid2D compute_heatmap(const DenseGrid2D& bev,
                                   const ConvSpec& spec) {
  spec.validate();
  if (spec.in_channels != bev.channels)
    throw std::invalid_argument("compute_heatmap: channel mismatch");
  DenseGrid2D hm(bev.height, bev.width, spec.out_channels);
  for (int y = 0; y < bev.height; ++y)
    for (int x = 0; x < bev.width; ++x)
      for (int oc = 0; oc < spec.out_channels; ++oc)
        hm.at(y, x, oc) = sigmoid(detail::conv_at(bev, spec, oc, y, x));
  return hm;
}

// Cells scoring strictly above the threshold become proposals; multi-class
// heatmaps take the max over channels. Sorted by descending confidence,
// ties broken by (y, x) for a deterministic order.
inline std::vector<Proposal> extract_proposals(const DenseGrid2D& heatmap,
                                               double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("extract_proposals: threshold must be in (0,1)");
  std::vector<Proposal> out;
  for (int y = 0; y < heatmap.height; ++y)
    for (int x = 0; x < heatmap.width; ++x) {
      double best = heatmap.at(y, x, 0);
      for (int c = 1; c < heatmap.channels; ++c)
        best = std::max(best, heatmap.at(y, x, c));
      if (best > threshold) out.push_back({best, x, y});
    }
  std::sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return out;
}

// Batch of p x p x C patches, one per proposal, zero-padded at the borders.
// Batch order matches proposal order.
struct PatchBatch {
  int patch = 0, channels = 0;
  std::vector<double> data; // [batch][py][px][c]

  double& at(size_t b, int py, int px, int c) {
    return data[((b * patch + py) * patch + px) * channels + c];
  }
  double at(size_t b, int py, int px, int c) const {
    return data[((b * patch + py) * patch + px) * channels + c];
  }
  size_t count() const {
    return patch == 0 ? 0
                      : data.size() / (static_cast<size_t>(patch) * patch *
                                       channels);
  }
};

inline PatchBatch gather_patches(const DenseGrid2D& input,
                                 const std::vector<Proposal>& proposals,
                                 int patch_size) {
  if (patch_size < 1 || patch_size % 2 == 0)
    throw std::invalid_argument("gather_patches: patch size must be odd");
  PatchBatch batch;
  batch.patch = patch_size;
  batch.channels = input.channels;
  batch.data.assign(proposals.size() * static_cast<size_t>(patch_size) *
                        patch_size * input.channels,
                    0.0);
  const int half = patch_size / 2;
  for (size_t b = 0; b < proposals.size(); ++b) {
    const Proposal& p = proposals[b];
    for (int py = 0; py < patch_size; ++py) {
      const int sy = p.y + py - half;
      if (sy < 0 || sy >= input.height) continue;
      for (int px = 0; px < patch_size; ++px) {
        const int sx = p.x + px - half;
        if (sx < 0 || sx >= input.width) continue;
        for (int c = 0; c < input.channels; ++c)
          batch.at(b, py, px, c) = input.at(sy, sx, c);
      }
    }
  }
  return batch;
}

// Attribute branch over the full grid (the baseline path).
inline DenseGrid2D attribute_conv_full(const DenseGrid2D& input,
                                       const ConvSpec& spec) {
  spec.validate();
  if (spec.in_channels != input.channels)
    throw std::invalid_argument("attribute_conv_full: channel mismatch");
  DenseGrid2D out(input.height, input.width, spec.out_channels);
  for (int y = 0; y < input.height; ++y)
    for (int x = 0; x < input.width; ++x)
      for (int oc = 0; oc < spec.out_channels; ++oc)
        out.at(y, x, oc) = detail::conv_at(input, spec, oc, y, x);
  return out;
}

// Attribute branches over the gathered patch batch. All specs are evaluated
// in one fused pass over the shared batch; the result layout per proposal is
// the concatenation of every spec's output channels, identical to reading
// attribute_conv_full at the proposal cell.
//
// perturb is a verification hook: it is added to the first weight of the
// first spec in this path only, so a nonzero value must break the
// gathered-vs-full equivalence check.
inline std::vector<std::vector<double>> attribute_conv_gathered(
    const PatchBatch& patches, const std::vector<ConvSpec>& specs,
    double perturb = 0.0) {
  if (specs.empty())
    throw std::invalid_argument("attribute_conv_gathered: no specs");
  int total_out = 0;
  for (const auto& s : specs) {
    s.validate();
    if (s.in_channels != patches.channels)
      throw std::invalid_argument("attribute_conv_gathered: channel mismatch");
    if (s.kernel != patches.patch)
      throw std::invalid_argument(
          "attribute_conv_gathered: patch size must equal the kernel size");
    total_out += s.out_channels;
  }
  std::vector<std::vector<double>> out(patches.count());
  for (size_t b = 0; b < patches.count(); ++b) {
    std::vector<double>& row = out[b];
    row.reserve(total_out);
    for (size_t si = 0; si < specs.size(); ++si) {
      const ConvSpec& spec = specs[si];
      for (int oc = 0; oc < spec.out_channels; ++oc) {
        double acc = spec.bias[oc];
        for (int ic = 0; ic < spec.in_channels; ++ic)
          for (int ky = 0; ky < spec.kernel; ++ky)
            for (int kx = 0; kx < spec.kernel; ++kx) {
              double w = spec.weight(oc, ic, ky, kx);
              if (si == 0 && oc == 0 && ic == 0 && ky == 0 && kx == 0)
                w += perturb;
              acc += w * patches.at(b, ky, kx, ic);
            }
        row.push_back(acc);
      }
    }
  }
  return out;
}

inline std::vector<std::vector<double>> attribute_conv_gathered(
    const PatchBatch& patches, const ConvSpec& spec) {
  return attribute_conv_gathered(patches, std::vector<ConvSpec>{spec});
}

enum class MacMode { full, gathered };

struct MacDims {
  int64_t height = 0, width = 0;
  int64_t kernel = 3;
  int64_t in_channels = 1, out_channels = 1;
};

// Exact multiply-accumulate count of the attribute convolutions.
// Full-grid mode visits every cell; gathered mode visits one patch center
// per proposal, so its count is linear in |R| and independent of H x W.
inline int64_t mac_count(MacMode mode, const MacDims& d, int64_t proposals) {
  const int64_t per_site = d.kernel * d.kernel * d.in_channels * d.out_channels;
  if (mode == MacMode::full) return d.height * d.width * per_site;
  return proposals * per_site;
}

} // namespace valo::dethead
