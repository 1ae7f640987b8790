#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pointvig/numerics/grad_check.hpp"
#include "pointvig/numerics/ops.hpp"
#include "pointvig/numerics/param_store.hpp"
#include "pointvig/numerics/pvtn.hpp"
#include "oracles.hpp"

namespace pointvig {
namespace {

using testing::random_tensor;
using testing::op_grad_suite;
using TD = Tensor<double>;

BatchNormState<double> fresh_state(std::size_t d) {
  return {TD::zeros({d}), TD::full({d}, 1.0)};
}

TEST(Linear, IdentityWeights) {
  TD x({1, 2}, {1, 2});
  TD w({2, 2}, {1, 0, 0, 1});
  auto y = linear(x, w, TD::zeros({2}));
  EXPECT_EQ(y.at(0, 0), 1);
  EXPECT_EQ(y.at(0, 1), 2);
}

TEST(Linear, ZeroWeightsPassBias) {
  TD x({1, 2}, {1, 2});
  auto y = linear(x, TD::zeros({2, 2}), TD({2}, {3, 4}));
  EXPECT_EQ(y.at(0, 0), 3);
  EXPECT_EQ(y.at(0, 1), 4);
}

TEST(Linear, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({4, 3}, rng);
  auto w = random_tensor({3, 5}, rng);
  auto b = random_tensor({5}, rng);
  auto y = linear(x, w, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = b[j];
      for (std::size_t t = 0; t < 3; ++t) acc += x.at(i, t) * w.at(t, j);
      EXPECT_NEAR(y.at(i, j), acc, 1e-12);
    }
}

TEST(Linear, ShapeMismatchNamesAxes) {
  try {
    linear(TD::zeros({2, 3}), TD::zeros({4, 5}), TD::zeros({5}));
    FAIL() << "expected dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
    EXPECT_NE(std::string(e.what()).find("axis"), std::string::npos);
  }
}

TEST(Linear, LinearityInInput) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> alpha_dist(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor({5, 4}, rng);
    auto w = random_tensor({4, 3}, rng);
    auto b = random_tensor({3}, rng);
    const double alpha = alpha_dist(rng);
    auto lhs_a = linear(scale(x, alpha), w, b);
    auto lhs_b = linear(x, w, b);
    auto xw = linear(x, w, TD::zeros({3}));
    for (std::size_t i = 0; i < lhs_a.numel(); ++i)
      EXPECT_NEAR(lhs_a[i] - lhs_b[i], (alpha - 1.0) * xw[i], 1e-12);
  }
}

TEST(BatchNorm, ConstantChannelsGiveZeros) {
  TD x({3, 2}, {5, -1, 5, -1, 5, -1});
  auto st = fresh_state(2);
  auto y = batchnorm(x, TD::full({2}, 1.0), TD::zeros({2}), st, NormMode::train);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, ZeroGammaOutputsBeta) {
  std::mt19937_64 rng(3);
  auto x = random_tensor({6, 3}, rng);
  auto st = fresh_state(3);
  auto y = batchnorm(x, TD::zeros({3}), TD({3}, {0.5, -2, 7}), st, NormMode::train);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(y.at(i, 0), 0.5);
    EXPECT_EQ(y.at(i, 1), -2);
    EXPECT_EQ(y.at(i, 2), 7);
  }
}

TEST(BatchNorm, NormalisesToUnitStatistics) {
  std::mt19937_64 rng(4);
  auto x = random_tensor({8, 4}, rng, -3, 5);
  auto st = fresh_state(4);
  auto y = batchnorm(x, TD::full({4}, 1.0), TD::zeros({4}), st, NormMode::train);
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 8; ++i) mean += y.at(i, c);
    mean /= 8;
    for (std::size_t i = 0; i < 8; ++i) var += (y.at(i, c) - mean) * (y.at(i, c) - mean);
    var /= 8;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    // The epsilon in the denominator shrinks the variance by var/(var+eps).
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningStatisticsUseMomentum) {
  TD x({2, 1}, {1, 3});
  auto st = fresh_state(1);
  batchnorm(x, TD::full({1}, 1.0), TD::zeros({1}), st, NormMode::train);
  EXPECT_NEAR(st.running_mean[0], 0.1 * 2.0, 1e-15);
  // unbiased variance of {1,3} is 2
  EXPECT_NEAR(st.running_var[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-15);
}

TEST(BatchNorm, SingleRowTrainIsDegenerate) {
  auto st = fresh_state(2);
  try {
    batchnorm(TD::zeros({1, 2}), TD::full({2}, 1.0), TD::zeros({2}), st, NormMode::train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_batch);
  }
}

TEST(BatchNorm, EvalIsDeterministicAffine) {
  std::mt19937_64 rng(5);
  auto x = random_tensor({5, 3}, rng);
  BatchNormState<double> st{random_tensor({3}, rng), random_tensor({3}, rng, 0.5, 2.0)};
  auto g = random_tensor({3}, rng);
  auto b = random_tensor({3}, rng);
  auto y1 = batchnorm(x, g, b, st, NormMode::eval);
  auto y2 = batchnorm(x, g, b, st, NormMode::eval);
  for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_EQ(y1[i], y2[i]);
}

TEST(Activations, Examples) {
  auto r = relu(TD({3}, {-1, 0, 2}));
  EXPECT_EQ(r[0], 0);
  EXPECT_EQ(r[1], 0);
  EXPECT_EQ(r[2], 2);
  EXPECT_EQ(gelu(TD({1}, {0.0}))[0], 0.0);

  TD x({2}, {-1, 2});
  x.set_requires_grad(true);
  sum(relu(x)).backward();
  EXPECT_EQ(x.grad()[0], 0);
  EXPECT_EQ(x.grad()[1], 1);
}

TEST(Activations, ReluSubgradientAtZeroIsZero) {
  TD x({1}, {0.0});
  x.set_requires_grad(true);
  sum(relu(x)).backward();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(NeighborMax, Examples) {
  TD x({1, 2, 2}, {1, 5, 3, 2});
  auto r = neighbor_max(x);
  EXPECT_EQ(r.values.at(0, 0), 3);
  EXPECT_EQ(r.values.at(0, 1), 5);
  EXPECT_EQ(r.argmax[0], 1);
  EXPECT_EQ(r.argmax[1], 0);

  auto eq = neighbor_max(TD::full({2, 4, 3}, 7.0));
  for (Index a : eq.argmax) EXPECT_EQ(a, 0);
}

TEST(NeighborMax, MatchesScanOracle) {
  std::mt19937_64 rng(6);
  auto x = random_tensor({4, 6, 3}, rng);
  auto r = neighbor_max(x);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      double best = -1e300;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < 6; ++j) {
        const double v = x[(i * 6 + j) * 3 + c];
        if (v > best) {
          best = v;
          arg = j;
        }
      }
      EXPECT_EQ(r.values.at(i, c), best);
      EXPECT_EQ(r.argmax[i * 3 + c], static_cast<Index>(arg));
    }
}

TEST(NeighborMax, PermutationOfSlotsKeepsValuesBitExact) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_tensor({5, 7, 4}, rng);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(x.numel());
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        for (std::size_t c = 0; c < 4; ++c) permuted[(i * 7 + j) * 4 + c] = x[(i * 7 + perm[j]) * 4 + c];
    auto a = neighbor_max(x).values;
    auto b = neighbor_max(TD({5, 7, 4}, permuted)).values;
    for (std::size_t e = 0; e < a.numel(); ++e) EXPECT_EQ(a[e], b[e]);
  }
}

TEST(NeighborMax, EmptyNeighborhood) {
  try {
    neighbor_max(TD::zeros({2, 0, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_input);
  }
}

TEST(NeighborMax, TieRoutesGradientToLowestSlot) {
  TD x({1, 3, 1}, {2, 2, 1});
  x.set_requires_grad(true);
  sum(neighbor_max(x).values).backward();
  EXPECT_EQ(x.grad()[0], 1);
  EXPECT_EQ(x.grad()[1], 0);
  EXPECT_EQ(x.grad()[2], 0);
}

TEST(Concat, Examples) {
  auto c = concat_channels(TD({1, 1}, {1}), TD({1, 2}, {2, 3}));
  ASSERT_EQ(c.shape(), (Shape{1, 3}));
  EXPECT_EQ(c[0], 1);
  EXPECT_EQ(c[1], 2);
  EXPECT_EQ(c[2], 3);

  std::mt19937_64 rng(8);
  auto a = random_tensor({3, 2}, rng);
  auto same = concat_channels(a, TD::zeros({3, 0}));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(same[i], a[i]);
}

TEST(Concat, BackwardRoutesOnes) {
  TD a({2, 1}, {1, 2});
  TD b({2, 2}, {3, 4, 5, 6});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  sum(concat_channels(a, b)).backward();
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
  for (double g : b.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Concat, RowMismatch) {
  EXPECT_THROW(concat_channels(TD::zeros({2, 1}), TD::zeros({3, 1})), Error);
}

TEST(MeanPool, Examples) {
  auto m = mean_pool_rows(TD({2, 2}, {2, 4, 4, 8}));
  EXPECT_EQ(m[0], 3);
  EXPECT_EQ(m[1], 6);
  auto single = mean_pool_rows(TD({1, 3}, {1, 2, 3}));
  EXPECT_EQ(single[2], 3);

  std::mt19937_64 rng(9);
  auto x = random_tensor({5, 3}, rng);
  auto p = mean_pool_rows(x);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < 5; ++i) s += x.at(i, c);
    EXPECT_NEAR(p[c], s / 5, 1e-12);
  }
  EXPECT_THROW(mean_pool_rows(TD::zeros({0, 3})), Error);
}

TEST(Autograd, GradientAccumulatesAdditively) {
  std::mt19937_64 rng(10);
  auto x = random_tensor({3, 2}, rng);
  auto w = random_tensor({2, 2}, rng);
  auto b = random_tensor({2}, rng);
  w.set_requires_grad(true);
  auto loss = sum(gelu(linear(x, w, b)));
  loss.backward();
  std::vector<double> once(w.grad().begin(), w.grad().end());
  loss.backward();
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(w.grad()[i], 2.0 * once[i]);
}

TEST(GradCheck, LinearBelow1e7) {
  std::mt19937_64 rng(11);
  const double err = grad_check(
      [](const std::vector<TD>& in) { return linear(in[0], in[1], in[2]); },
      {random_tensor({3, 2}, rng), random_tensor({2, 4}, rng), random_tensor({4}, rng)});
  EXPECT_LT(err, 1e-7);
}

TEST(GradCheck, NeighborMaxTieFreeBelow1e7) {
  std::mt19937_64 rng(12);
  const double err =
      grad_check([](const std::vector<TD>& in) { return neighbor_max(in[0]).values; }, {random_tensor({4, 5, 3}, rng)});
  EXPECT_LT(err, 1e-7);
}

TEST(GradCheck, EveryDifferentiableOp) {
  for (const auto& [name, err] : op_grad_suite(13)) EXPECT_LT(err, 1e-4) << name;
}

TEST(GradCheck, NonFiniteIsReported) {
  try {
    grad_check([](const std::vector<TD>& in) { return scale(in[0], std::numeric_limits<double>::infinity()); },
               {TD({1}, {1.0})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric_instability);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  std::vector<int> labels{0, 3};
  auto loss = cross_entropy(TD::zeros({2, 5}), labels);
  EXPECT_NEAR(loss.item(), std::log(5.0), 1e-15);
  EXPECT_THROW(cross_entropy(TD::zeros({0, 5}), std::span<const int>{}), Error);
}

TEST(ParamStore, RejectsDuplicatesAndCounts) {
  ParamStore<float> store;
  Rng rng(1);
  auto lin = make_linear(store, "a.fc", 3, 4, rng);
  EXPECT_EQ(store.count_params(), 16u);
  EXPECT_TRUE(lin.weight.requires_grad());
  EXPECT_THROW(store.add_param("a.fc.weight", Tensor<float>::zeros({1})), Error);
  make_batchnorm(store, "a.bn", 4);
  EXPECT_EQ(store.count_params(), 24u);
  EXPECT_EQ(store.buffers().size(), 2u);
  std::vector<std::string> keys;
  for (const auto& [k, _] : store.params()) keys.push_back(k);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(ParamStore, SeededInitIsDeterministic) {
  auto build = [] {
    ParamStore<float> s;
    Rng rng(42);
    make_linear(s, "x", 8, 8, rng);
    return s;
  };
  auto a = build(), b = build();
  auto wa = a.param("x.weight").data(), wb = b.param("x.weight").data();
  EXPECT_TRUE(std::equal(wa.begin(), wa.end(), wb.begin()));
  const double bound = std::sqrt(6.0 / 8.0);
  for (float v : wa) EXPECT_LE(std::abs(v), bound);
}

TEST(Pvtn, RoundTripIsBitExact) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::uniform_int_distribution<std::size_t> extent(0, 5);
  for (int trial = 0; trial < 25; ++trial) {
    Shape shape(trial % 4);
    for (auto& e : shape) e = extent(rng);
    std::vector<float> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<float>(bits(rng));
    Tensor<float> t(shape, data);
    std::stringstream ss;
    pvtn::write_tensor(ss, t);
    auto back = pvtn::read_tensor(ss);
    ASSERT_EQ(back.shape(), shape);
    for (std::size_t i = 0; i < data.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(data[i]));
  }
}

TEST(Pvtn, LayoutIsLittleEndian) {
  std::stringstream ss;
  pvtn::write_tensor(ss, Tensor<float>({2}, {1.0f, -2.0f}));
  const std::string s = ss.str();
  ASSERT_EQ(s.size(), 4u + 1 + 4 + 8 + 8);
  EXPECT_EQ(s.substr(0, 4), "PVTN");
  EXPECT_EQ(s[4], 1);
  EXPECT_EQ(static_cast<unsigned char>(s[5]), 1u);  // rank
  EXPECT_EQ(static_cast<unsigned char>(s[9]), 2u);  // extent[0] low byte
  EXPECT_EQ(static_cast<unsigned char>(s[17 + 3]), 0x3fu);  // 1.0f = 0x3f800000
}

TEST(Pvtn, BadMagicIsCategorised) {
  std::stringstream ss("PVTX\x01");
  try {
    pvtn::read_tensor(ss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::bad_magic);
    EXPECT_NE(std::string(e.what()).find("bad container magic"), std::string::npos);
  }
}

TEST(Pvtn, ArchiveRoundTrip) {
  pvtn::Archive a;
  a.header = "seed=3\nepoch=2\n";
  a.entries["w"] = Tensor<float>({2, 2}, {1, 2, 3, 4});
  a.entries["b"] = Tensor<float>({1}, {5});
  std::stringstream ss;
  pvtn::write_archive(ss, a);
  auto back = pvtn::read_archive(ss);
  EXPECT_EQ(back.header, a.header);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries.at("w")[3], 4.0f);
}

}  // namespace
}  // namespace pointvig
