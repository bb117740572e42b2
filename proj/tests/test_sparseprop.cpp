#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "valo/rng.hpp"
#include "valo/sparseprop.hpp"
#include "valo/verify.hpp"

using namespace valo;
using namespace valo::sparseprop;
using voxel::Coord;

namespace {

LayerSpec sm(int k = 3) {
  return {LayerKind::submanifold, {k, k, k}, {1, 1, 1}};
}
LayerSpec sp(int k, int s) { return {LayerKind::sparse, {k, k, k}, {s, s, s}}; }

// 2D slice helpers: z extent 1, kernel 1 on z
LayerSpec sp2d(int k, int s) {
  return {LayerKind::sparse, {k, k, 1}, {s, s, 1}};
}
LayerSpec sm2d(int k = 3) {
  return {LayerKind::submanifold, {k, k, 1}, {1, 1, 1}};
}

} // namespace

TEST_CASE("single voxel through a 3x3 stride-1 sparse conv activates 9 cells") {
  const Extent ext{16, 16, 1};
  const std::vector<Coord> in = {{5, 5, 0}};
  const auto out = propagate(in, ext, sp2d(3, 1));
  REQUIRE(out.size() == 9);
  for (const auto& c : out) {
    REQUIRE(std::abs(c.x - 5) <= 1);
    REQUIRE(std::abs(c.y - 5) <= 1);
  }
}

TEST_CASE("submanifold convolution is the identity on the active set") {
  Rng rng(3);
  const Extent ext{32, 32, 8};
  const auto in = verify::random_coords(rng, ext, 200);
  REQUIRE(propagate(in, ext, sm()) == in);
}

TEST_CASE("strided sparse conv matches the dense-support oracle") {
  Rng rng(5);
  const Extent ext{24, 24, 6};
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = verify::random_coords(rng, ext, 50);
    const LayerSpec layer = sp(3, 2);
    REQUIRE(propagate(in, ext, layer) ==
            verify::dense_support_oracle(in, ext, layer));
  }
}

TEST_CASE("propagate equals the dense oracle over random layer stacks") {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    Extent ext{static_cast<int32_t>(6 + rng.below(28)),
               static_cast<int32_t>(6 + rng.below(28)),
               static_cast<int32_t>(2 + rng.below(8))};
    auto coords = verify::random_coords(rng, ext, 120);
    for (int li = 0; li < 2; ++li) {
      const LayerSpec layer = verify::random_layer(rng);
      const auto got = propagate(coords, ext, layer);
      const auto want = verify::dense_support_oracle(coords, ext, layer);
      REQUIRE(got == want);
      coords = got;
      ext = output_extent(ext, layer);
    }
  }
}

TEST_CASE("sparse propagation is monotone under input growth") {
  Rng rng(21);
  const Extent ext{20, 20, 4};
  for (int trial = 0; trial < 25; ++trial) {
    auto small = verify::random_coords(rng, ext, 40);
    auto big = small;
    const auto extra = verify::random_coords(rng, ext, 20);
    big.insert(big.end(), extra.begin(), extra.end());
    std::sort(big.begin(), big.end(), voxel::coord_less);
    big.erase(std::unique(big.begin(), big.end()), big.end());

    const LayerSpec layer = sp(3, 1 + static_cast<int>(rng.below(2)));
    const auto out_small = propagate(small, ext, layer);
    const auto out_big = propagate(big, ext, layer);
    REQUIRE(std::includes(out_big.begin(), out_big.end(), out_small.begin(),
                          out_small.end(), voxel::coord_less));
  }
}

TEST_CASE("output extent follows the ceil rule") {
  REQUIRE(output_extent({1440, 1440, 40}, sp(3, 2)) == Extent{720, 720, 20});
  REQUIRE(output_extent({7, 7, 3}, sp(3, 2)) == Extent{4, 4, 2});
  REQUIRE(output_extent({7, 7, 3}, sm()) == Extent{7, 7, 3});
}

TEST_CASE("run_backbone reports per-block input counts") {
  SECTION("empty grid gives all-zero counts") {
    const auto tr = run_backbone(std::vector<Coord>{}, {32, 32, 4},
                                 BackboneSpec::default_spec());
    for (int64_t c : tr.block_input_counts) REQUIRE(c == 0);
    REQUIRE(tr.final_coords.empty());
  }

  SECTION("single voxel through two [SM, SP3x3 s1] blocks counts [1, 9]") {
    BackboneSpec bb;
    bb.blocks = {BlockSpec{{sm2d(), sp2d(3, 1)}},
                 BlockSpec{{sm2d(), sp2d(3, 1)}}};
    const auto tr = run_backbone({{8, 8, 0}}, {32, 32, 1}, bb);
    REQUIRE(tr.block_input_counts == std::vector<int64_t>{1, 9});
    REQUIRE(tr.final_coords.size() == 25); // 5x5 after the second dilation
  }

  SECTION("random grid matches the chained dense oracle") {
    Rng rng(31);
    Extent ext{24, 24, 6};
    auto coords = verify::random_coords(rng, ext, 100);
    const BackboneSpec bb = BackboneSpec::default_spec();
    const auto tr = run_backbone(coords, ext, bb);

    std::vector<int64_t> want_counts;
    for (const auto& block : bb.blocks) {
      want_counts.push_back(static_cast<int64_t>(coords.size()));
      for (const auto& layer : block.layers) {
        coords = verify::dense_support_oracle(coords, ext, layer);
        ext = output_extent(ext, layer);
      }
    }
    REQUIRE(tr.block_input_counts == want_counts);
    REQUIRE(tr.final_coords == coords);
    REQUIRE(tr.final_extent == ext);
  }
}

TEST_CASE("run_backbone counts never shrink when the input grows") {
  Rng rng(47);
  const Extent ext{28, 28, 6};
  const BackboneSpec bb = BackboneSpec::default_spec();
  for (int trial = 0; trial < 10; ++trial) {
    auto small = verify::random_coords(rng, ext, 80);
    auto big = small;
    const auto extra = verify::random_coords(rng, ext, 40);
    big.insert(big.end(), extra.begin(), extra.end());
    std::sort(big.begin(), big.end(), voxel::coord_less);
    big.erase(std::unique(big.begin(), big.end()), big.end());
    const auto tr_small = run_backbone(small, ext, bb);
    const auto tr_big = run_backbone(big, ext, bb);
    for (size_t b = 0; b < bb.num_blocks(); ++b)
      REQUIRE(tr_small.block_input_counts[b] <= tr_big.block_input_counts[b]);
  }
}

TEST_CASE("block validation rejects mid-block active-set changes") {
  BlockSpec bad;
  bad.layers = {sp(3, 2), sm()}; // count change must end the block
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  LayerSpec bad_subm = sm();
  bad_subm.stride = {2, 2, 2};
  REQUIRE_THROWS_AS(bad_subm.validate(), std::invalid_argument);

  LayerSpec even = sp(4, 1);
  REQUIRE_THROWS_AS(even.validate(), std::invalid_argument);
}

TEST_CASE("from_layers splits a chain at every count-changing layer") {
  const auto bb = BackboneSpec::from_layers(
      {sm(), sm(), sp(3, 2), sm(), sm(), sp(3, 2), sm(), sm()});
  REQUIRE(bb.num_blocks() == 3);
  REQUIRE(bb.blocks[0].layers.size() == 3);
  REQUIRE(bb.blocks[1].layers.size() == 3);
  REQUIRE(bb.blocks[2].layers.size() == 2);
}

TEST_CASE("per-region block counts attribute coordinates per block extent") {
  const auto part = voxel::RegionPartition::make(36, 6);
  voxel::GridGeometry g;
  g.voxel_size = {1.0, 1.0, 1.0};
  g.origin = {0.0, 0.0, 0.0};
  g.dims = {36, 36, 4};

  SECTION("empty grid gives a zero matrix") {
    voxel::SparseVoxelGrid grid;
    grid.geom = g;
    const auto m =
        per_region_block_counts(grid, BackboneSpec::default_spec(), part);
    for (int r = 0; r < m.num_regions; ++r)
      for (int b = 0; b < m.num_blocks; ++b) REQUIRE(m.at(r, b) == 0);
  }

  SECTION("one occupied region spills only into adjacent columns") {
    voxel::SparseVoxelGrid grid;
    grid.geom = g;
    // fill region 2 (x in [12, 18))
    for (int x = 12; x < 18; ++x)
      for (int y = 10; y < 14; ++y) grid.coords.push_back({x, y, 1});
    std::sort(grid.coords.begin(), grid.coords.end(), voxel::coord_less);
    const BackboneSpec bb = BackboneSpec::default_spec();
    const auto m = per_region_block_counts(grid, bb, part);
    for (int b = 0; b < m.num_blocks; ++b) {
      for (int r = 0; r < m.num_regions; ++r) {
        if (r < 1 || r > 3) REQUIRE(m.at(r, b) == 0); // halo stays adjacent
      }
      REQUIRE(m.at(2, b) > 0);
    }
    REQUIRE(m.at(1, 0) == 0); // no spill before the first sparse layer
    REQUIRE(m.at(3, 0) == 0);

    // direct count on the propagated set, block by block
    std::vector<Coord> coords = grid.coords;
    Extent ext = g.dims;
    for (size_t b = 0; b < bb.blocks.size(); ++b) {
      std::vector<int64_t> col(part.num_regions, 0);
      for (const auto& c : coords)
        ++col[voxel::region_at_extent(c.x, ext[0], part.num_regions)];
      for (int r = 0; r < part.num_regions; ++r)
        REQUIRE(m.at(r, static_cast<int>(b)) == col[r]);
      for (const auto& layer : bb.blocks[b].layers) {
        coords = propagate(coords, ext, layer);
        ext = output_extent(ext, layer);
      }
    }
  }

  SECTION("column sums equal run_backbone block totals") {
    Rng rng(41);
    voxel::SparseVoxelGrid grid;
    grid.geom = g;
    grid.coords = verify::random_coords(rng, g.dims, 300);
    const auto m =
        per_region_block_counts(grid, BackboneSpec::default_spec(), part);
    const auto tr = run_backbone(grid, BackboneSpec::default_spec());
    for (int b = 0; b < m.num_blocks; ++b)
      REQUIRE(m.block_total(b) == tr.block_input_counts[b]);
  }
}

TEST_CASE("simulate_cost evaluates the quadratic exactly at sigma 0") {
  CostOracle oracle;
  oracle.blocks = {{0.0, 0.0, 2.5}, {1e-6, 5e-3, 2.0}};
  Rng rng(1);

  SECTION("n = 0 yields the constant term") {
    const auto ms = simulate_cost({0, 0}, oracle, rng);
    REQUIRE(ms[0] == 2.5);
    REQUIRE(ms[1] == 2.0);
  }

  SECTION("known coefficients at n = 1000") {
    const auto ms = simulate_cost({0, 1000}, oracle, rng);
    REQUIRE(ms[1] == Catch::Approx(1e-6 * 1e6 + 5e-3 * 1e3 + 2.0).epsilon(1e-12));
  }

  SECTION("sigma 0 is deterministic and strictly increasing") {
    Rng r1(9), r2(9);
    const auto a = simulate_cost({500, 700}, oracle, r1);
    const auto b = simulate_cost({500, 700}, oracle, r2);
    REQUIRE(a == b);
    Rng r3(9);
    const auto c = simulate_cost({500, 800}, oracle, r3);
    REQUIRE(c[1] > a[1]);
  }
}

TEST_CASE("lognormal cost noise has the noiseless median") {
  CostOracle oracle;
  oracle.blocks = {{0.0, 1e-3, 1.0}};
  oracle.sigma = 0.05;
  const double noiseless = oracle.noiseless(0, 2000); // 3.0 ms
  Rng rng(77);
  std::vector<double> draws;
  for (int i = 0; i < 10000; ++i)
    draws.push_back(simulate_cost({2000}, oracle, rng)[0]);
  std::sort(draws.begin(), draws.end());
  const double median = draws[draws.size() / 2];
  REQUIRE(std::fabs(median - noiseless) / noiseless < 0.01);
}

TEST_CASE("BEV projection collapses z and preserves the nonzero set") {
  SECTION("empty input gives an all-zero grid") {
    const auto bev = project_to_bev({}, {}, 2, {8, 8, 4});
    for (double v : bev.data) REQUIRE(v == 0.0);
  }

  SECTION("one voxel lights exactly one cell") {
    const auto bev = project_to_bev({{3, 5, 2}}, {1.0, 0.5}, 2, {8, 8, 4});
    int nonzero = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        if (bev.at(y, x, 0) != 0.0) ++nonzero;
    REQUIRE(nonzero == 1);
    REQUIRE(bev.at(5, 3, 0) == 1.0);
    REQUIRE(bev.at(5, 3, 1) == 0.5);
  }

  SECTION("nonzero cells equal the z-collapsed coordinate set") {
    Rng rng(55);
    const Extent ext{16, 16, 6};
    const auto coords = verify::random_coords(rng, ext, 150);
    std::vector<double> features(coords.size(), 1.0);
    const auto bev = project_to_bev(coords, features, 1, ext);
    std::set<std::pair<int, int>> want;
    for (const auto& c : coords) want.insert({c.x, c.y});
    std::set<std::pair<int, int>> got;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (bev.at(y, x, 0) != 0.0) got.insert({x, y});
    REQUIRE(got == want);
  }
}

TEST_CASE("cost oracle validation") {
  CostOracle bad;
  bad.blocks = {{-1.0, 0.0, 1.0}};
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.blocks = {{0.0, 0.0, 0.0}};
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.blocks = {{0.0, 0.0, 1.0}};
  bad.sigma = -0.1;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}
