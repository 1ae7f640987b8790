#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pointvig/graph/ball_query.hpp"
#include "pointvig/graph/dilation.hpp"
#include "pointvig/graph/fixtures.hpp"
#include "pointvig/graph/knn.hpp"
#include "pointvig/graph/sampling.hpp"
#include "oracles.hpp"

namespace pointvig::graph {
namespace {

using namespace pointvig::testing;
using TD = Tensor<double>;

// ---- knn -------------------------------------------------------------------

TEST(Knn, ExcludeSelfExample) {
  TD f({3, 1}, {0, 1, 3});
  auto nb = knn_feature(f, 1, true);
  EXPECT_EQ(nb.at(0, 0), 1);
  EXPECT_EQ(nb.at(1, 0), 0);
  EXPECT_EQ(nb.at(2, 0), 1);
}

TEST(Knn, IncludeSelfK1IsIdentity) {
  std::mt19937_64 rng(1);
  auto f = random_tensor({20, 3}, rng);
  auto nb = knn_feature(f, 1, false);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(nb.at(i, 0), static_cast<Index>(i));
}

TEST(Knn, MatchesExhaustiveOracleOver100Seeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    auto f = random_tensor({64, 4}, rng);
    auto nb = knn_feature(f, 8, true);
    for (std::size_t i = 0; i < 64; ++i) {
      auto expect = oracle_knn_row(f, i, 8, true);
      for (std::size_t j = 0; j < 8; ++j) ASSERT_EQ(nb.at(i, j), expect[j]) << "seed " << seed;
    }
  }
}

TEST(Knn, TiesBreakByIndex) {
  TD f({4, 1}, {0, 1, -1, 1});
  auto nb = knn_feature(f, 3, true);
  EXPECT_EQ(nb.at(0, 0), 1);
  EXPECT_EQ(nb.at(0, 1), 2);
  EXPECT_EQ(nb.at(0, 2), 3);
}

TEST(Knn, CapacityError) {
  try {
    knn_feature(TD::zeros({4, 2}), 4, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::capacity);
  }
  EXPECT_NO_THROW(knn_feature(TD::zeros({4, 2}), 4, false));
}

TEST(Knn, SegmentedMatchesPerBlock) {
  std::mt19937_64 rng(3);
  auto f = random_tensor({30, 3}, rng);
  auto all = knn_feature_segmented(f, 3, 4, true);
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<double> block(f.data().begin() + s * 30, f.data().begin() + (s + 1) * 30);
    auto local = knn_feature(TD({10, 3}, block), 4, true);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(all.at(s * 10 + i, j), local.at(i, j) + Index(s * 10));
  }
}

// ---- ball query ----------------------------------------------------------

TEST(BallQuery, CollinearExample) {
  TD p({3, 3}, {0, 0, 0, 0.1, 0, 0, 0.5, 0, 0});
  TD c({1, 3}, {0, 0, 0});
  for (auto backend : {SearchBackend::brute_force, SearchBackend::grid}) {
    auto sub = ball_query(p, c, 0.2, 4, backend);
    EXPECT_EQ(std::vector<Index>(sub.indices.begin(), sub.indices.end()), (std::vector<Index>{0, 1, 0, 0}));
    EXPECT_EQ(std::vector<std::uint8_t>(sub.mask.begin(), sub.mask.end()), (std::vector<std::uint8_t>{1, 1, 0, 0}));
  }
}

TEST(BallQuery, HugeRadiusKeepsEverything) {
  std::mt19937_64 rng(4);
  auto p = random_tensor({16, 3}, rng);
  auto sub = ball_query(p, p, 10.0, 16);
  for (auto v : sub.mask) EXPECT_EQ(v, 1);
}

TEST(BallQuery, MembershipMatchesOracleAndBackendsAgree) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = random_tensor({128, 3}, rng, 0, 1);
    auto brute = ball_query(p, p, 0.2, 16, SearchBackend::brute_force);
    auto grid = ball_query(p, p, 0.2, 16, SearchBackend::grid);
    ASSERT_EQ(brute.indices, grid.indices);
    ASSERT_EQ(brute.mask, grid.mask);
    for (std::size_t i = 0; i < 128; ++i) {
      auto expect = oracle_ball_row(p, p, i, 0.2, 16);
      ASSERT_EQ(brute.valid_count(i), expect.size());
      for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_EQ(brute.indices[i * 16 + j], expect[j]);
      for (std::size_t j = expect.size(); j < 16; ++j) EXPECT_EQ(brute.indices[i * 16 + j], expect[0]);
    }
  }
}

TEST(BallQuery, EmptyBallForForeignCenter) {
  TD p({2, 3}, {0, 0, 0, 1, 0, 0});
  TD c({1, 3}, {5, 5, 5});
  try {
    ball_query(p, c, 0.2, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_input);
  }
}

TEST(BallQuery, TranslationInvariant) {
  // Dyadic coordinates keep every shifted difference exact.
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> q(0, 255);
  std::vector<double> v(200 * 3), shifted(200 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = q(rng) / 256.0;
    shifted[i] = v[i] + (i % 3 == 0 ? 3.0 : i % 3 == 1 ? -7.0 : 0.5);
  }
  TD p({200, 3}, v), ps({200, 3}, shifted);
  auto a = ball_query(p, p, 0.15, 12);
  auto b = ball_query(ps, ps, 0.15, 12);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(fps_downsample(p, 4), fps_downsample(ps, 4));
}

// ---- dilated selection ---------------------------------------------------

TEST(Adaptive, AllValidEqualsRestrictedKnn) {
  std::mt19937_64 rng(6);
  auto p = random_tensor({40, 3}, rng, 0, 1);
  auto f = random_tensor({40, 5}, rng);
  auto sub = ball_query(p, p, 10.0, 40);
  auto sel = adaptive_select(f, sub, 6);
  auto knn = knn_feature(f, 6, false);
  EXPECT_EQ(sel.indices, knn.indices);
}

TEST(Adaptive, DeficitRepeatsNearest) {
  Subgraph sub{1, 8, 1.0, {4, 2, 7, 4, 4, 4, 4, 4}, {1, 1, 1, 0, 0, 0, 0, 0}};
  // Feature distances from row 0: member 7 nearest, then 2, then 4.
  TD f({8, 1}, {0, 0, 0.5, 0, 0.9, 0, 0, 0.1});
  auto sel = adaptive_select(f, sub, 4);
  EXPECT_EQ(sel.indices, (std::vector<Index>{7, 2, 4, 7}));
}

TEST(Adaptive, NeverSelectsMaskedSlotsWhenEnoughValid) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = random_tensor({150, 3}, rng, 0, 1);
    auto f = random_tensor({150, 8}, rng);
    auto sub = ball_query(p, p, 0.2, 24);
    auto sel = adaptive_select(f, sub, 8);
    for (std::size_t i = 0; i < 150; ++i) {
      std::set<Index> valid;
      for (std::size_t j = 0; j < sub.m; ++j)
        if (sub.valid(i, j)) valid.insert(sub.indices[i * sub.m + j]);
      for (Index v : sel.row(i)) ASSERT_TRUE(valid.count(v)) << "seed " << seed << " row " << i;
      if (valid.size() >= 8) {
        std::set<Index> distinct(sel.row(i).begin(), sel.row(i).end());
        EXPECT_EQ(distinct.size(), 8u);
      }
    }
  }
}

TEST(Uniform, StrideOverValidEntries) {
  Subgraph sub{1, 10, 1.0, {9, 8, 7, 6, 5, 4, 3, 2, 9, 9}, {1, 1, 1, 1, 1, 1, 1, 1, 0, 0}};
  auto sel = uniform_select(sub, 4);
  EXPECT_EQ(sel.indices, (std::vector<Index>{9, 7, 5, 3}));
}

TEST(Uniform, RandomFullValidReturnsAll) {
  Subgraph sub{1, 6, 1.0, {3, 1, 4, 0, 5, 3}, {1, 1, 1, 1, 1, 0}};
  auto u = uniform_select(sub, 5);
  EXPECT_EQ(u.indices, (std::vector<Index>{3, 1, 4, 0, 5}));
  auto r = random_select(sub, 5, 7);
  std::multiset<Index> got(r.indices.begin(), r.indices.end());
  EXPECT_EQ(got, (std::multiset<Index>{0, 1, 3, 4, 5}));
}

TEST(Random, SeedDeterminismAndValidity) {
  std::mt19937_64 rng(8);
  auto p = random_tensor({100, 3}, rng, 0, 1);
  auto sub = ball_query(p, p, 0.3, 32);
  auto a = random_select(sub, 8, 42);
  auto b = random_select(sub, 8, 42);
  EXPECT_EQ(a.indices, b.indices);
  auto c = random_select(sub, 8, 43);
  EXPECT_NE(a.indices, c.indices);
  for (std::size_t i = 0; i < 100; ++i) {
    if (sub.valid_count(i) < 8) continue;
    std::set<Index> distinct(a.row(i).begin(), a.row(i).end());
    EXPECT_EQ(distinct.size(), 8u);
  }
}

TEST(Selection, RejectsKAboveM) {
  Subgraph sub{1, 2, 1.0, {0, 0}, {1, 0}};
  EXPECT_THROW(uniform_select(sub, 3), Error);
  EXPECT_THROW(adaptive_select(TD::zeros({1, 1}), sub, 3), Error);
}

// ---- farthest point sampling -----------------------------------------------

TEST(Fps, RatioOneKeepsAll) {
  std::mt19937_64 rng(9);
  auto p = random_tensor({7, 3}, rng);
  EXPECT_EQ(fps_downsample(p, 1), testing::iota_rows(7));
}

TEST(Fps, SquareCornersPickDiagonal) {
  TD sq({4, 3}, {0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0});
  auto s = fps_downsample(sq, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], 0);
  EXPECT_EQ(s[1], 2);
}

TEST(Fps, CountIsCeiling) {
  std::mt19937_64 rng(10);
  EXPECT_EQ(fps_downsample(random_tensor({10, 3}, rng), 4).size(), 3u);
  EXPECT_THROW(fps_downsample(TD::zeros({0, 3}), 2), Error);
}

TEST(Fps, BeatsRandomSubsetsOnMinSpacing) {
  auto min_spacing = [](const TD& p, const std::vector<Index>& s) {
    double best = 1e300;
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b) best = std::min(best, oracle_dist2(p, s[a], p, s[b]));
    return best;
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = random_tensor({200, 3}, rng, 0, 1);
    auto s = fps_downsample(p, 4);
    auto perm = testing::iota_rows(200);
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(s.size());
    EXPECT_GE(min_spacing(p, s), min_spacing(p, perm));
  }
}

// ---- interpolation ---------------------------------------------------------

TEST(Interpolate, CoincidentPointsReproduceFeatures) {
  std::mt19937_64 rng(11);
  auto pos = random_tensor({12, 3}, rng, 0, 1);
  auto feat = random_tensor({12, 4}, rng, 1, 2);
  auto out = interpolate_upsample(pos, feat, pos);
  for (std::size_t i = 0; i < feat.numel(); ++i) EXPECT_NEAR(out[i], feat[i], 1e-5 * std::abs(feat[i]));
}

TEST(Interpolate, MidpointIsMean) {
  TD sp({2, 3}, {0, 0, 0, 2, 0, 0});
  TD sf({2, 2}, {1, 10, 3, 20});
  auto out = interpolate_upsample(sp, sf, TD({1, 3}, {1, 0, 0}));
  EXPECT_NEAR(out[0], 2.0, 1e-12);
  EXPECT_NEAR(out[1], 15.0, 1e-12);
}

TEST(Interpolate, MatchesFormulaOracle) {
  std::mt19937_64 rng(12);
  auto sp = random_tensor({9, 3}, rng);
  auto sf = random_tensor({9, 3}, rng);
  auto dp = random_tensor({15, 3}, rng);
  auto out = interpolate_upsample(sp, sf, dp);
  for (std::size_t i = 0; i < 15; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < 9; ++j) d.push_back({oracle_dist2(dp, i, sp, j), j});
    std::sort(d.begin(), d.end());
    double wsum = 0, acc[3] = {0, 0, 0};
    for (int t = 0; t < 3; ++t) {
      const double w = 1.0 / (d[t].first + 1e-8);
      wsum += w;
      for (int c = 0; c < 3; ++c) acc[c] += w * sf.at(d[t].second, c);
    }
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(i, c), acc[c] / wsum, 1e-12);
  }
}

// ---- fixtures --------------------------------------------------------------

TEST(Fixtures, SubgraphCsvRoundTrip) {
  std::mt19937_64 rng(13);
  auto p = random_tensor({30, 3}, rng, 0, 1);
  auto sub = ball_query(p, p, 0.25, 6);
  std::stringstream ss;
  io::write_csv(ss, kFixtureHeader, to_csv_rows(sub));
  auto back = subgraph_from_csv(io::read_csv(ss), sub.radius);
  EXPECT_EQ(back.indices, sub.indices);
  EXPECT_EQ(back.mask, sub.mask);

  auto nb = knn_feature(p, 3, true);
  std::stringstream ns;
  io::write_csv(ns, kFixtureHeader, to_csv_rows(nb));
  EXPECT_EQ(neighbors_from_csv(io::read_csv(ns)).indices, nb.indices);
}

TEST(Csv, QuotingRoundTrip) {
  std::vector<io::CsvRow> rows{{"a,b", "say \"hi\"", "line\nbreak"}, {"", "x", "1.5"}};
  std::stringstream ss;
  io::write_csv(ss, {"c1", "c2", "c3"}, rows);
  auto back = io::read_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1], rows[0]);
  EXPECT_EQ(back[2], rows[1]);
}

}  // namespace
}  // namespace pointvig::graph
