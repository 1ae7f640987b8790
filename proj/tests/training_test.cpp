#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "pointvig/training/trainer.hpp"

namespace pointvig {
namespace {

ParamStore<double> scalar_store(double w) {
  ParamStore<double> s;
  s.add_param("w", Tensor<double>({1}, {w}));
  return s;
}

void set_grad(ParamStore<double>& s, double g) {
  auto& p = s.param("w");
  p.zero_grad();
  p.mutable_grad()[0] = g;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto s = scalar_store(0.0);
  AdamState st;
  set_grad(s, 1.0);
  adam_step(s, st, 0.1);
  EXPECT_NEAR(s.param("w")[0], -0.1, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameterAndDecaysMoments) {
  auto s = scalar_store(0.5);
  AdamState st;
  set_grad(s, 2.0);
  adam_step(s, st, 0.01);
  const double w1 = s.param("w")[0], m1 = st.m["w"][0], v1 = st.v["w"][0];
  set_grad(s, 0.0);
  adam_step(s, st, 0.01);
  EXPECT_NEAR(st.m["w"][0], 0.9 * m1, 1e-15);
  EXPECT_NEAR(st.v["w"][0], 0.999 * v1, 1e-15);
  // The bias-corrected first moment is still nonzero, so w keeps moving the same way.
  EXPECT_LT(s.param("w")[0], w1);

  auto z = scalar_store(0.5);
  AdamState zs;
  set_grad(z, 0.0);
  adam_step(z, zs, 0.01);
  EXPECT_EQ(z.param("w")[0], 0.5);
}

TEST(Adam, MatchesRecurrence) {
  auto s = scalar_store(0.3);
  AdamState st;
  double w = 0.3, m = 0, v = 0;
  const double lr = 0.05, g = 0.7;
  for (int t = 1; t <= 5; ++t) {
    set_grad(s, g);
    adam_step(s, st, lr);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= lr * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(s.param("w")[0], w, 1e-12) << "step " << t;
  }
}

TEST(Adam, MissingGradientIsIncompleteBackward) {
  auto s = scalar_store(0.0);
  s.param("w").clear_grad();
  AdamState st;
  try {
    adam_step(s, st, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::incomplete_backward);
  }
}

TEST(Schedule, PublishedEndpointsAndMidpoint) {
  const ScheduleConfig c;
  EXPECT_DOUBLE_EQ(lr_at(0, c), 1e-3);
  EXPECT_NEAR(lr_at(12.5, c), 5.05e-4, 1e-15);
  EXPECT_DOUBLE_EQ(lr_at(25, c), 1e-3);
  EXPECT_NEAR(lr_at(24.999999, c), 1e-5, 1e-12);
}

TEST(Schedule, BoundedAndPeriodic) {
  const ScheduleConfig c;
  for (double e = 0; e < 100; e += 0.37) {
    const double lr = lr_at(e, c);
    EXPECT_GE(lr, c.lr_min);
    EXPECT_LE(lr, c.lr_max);
    EXPECT_NEAR(lr, lr_at(e + 25, c), 1e-15);
  }
  for (int e = 0; e < 25; ++e) EXPECT_EQ(lr_at(e, c), lr_at(e + 25, c));
}

TEST(Schedule, RejectsInvertedRange) {
  ScheduleConfig c;
  c.lr_min = 1e-2;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Augment, UnitScaleIsIdentity) {
  auto c = make_synthetic_shapes(1, 64, 3)[0];
  const auto same = augment_scale(c, 1.0, 1.0, 9);
  EXPECT_EQ(same.xyz, c.xyz);
}

TEST(Augment, SeededAndInRange) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const double a = draw_scale(0.7, 1 / 0.7, s);
    EXPECT_EQ(a, draw_scale(0.7, 1 / 0.7, s));
    EXPECT_GE(a, 0.7);
    EXPECT_LE(a, 1 / 0.7);
  }
}

TEST(Augment, PreservesDistanceRatiosAndAttributes) {
  SceneConfig sc;
  sc.n_points = 128;
  const auto c = make_synthetic_scenes(1, sc, 4)[0];
  const auto a = augment_scale(c, 0.7, 1 / 0.7, 21);
  const double s = draw_scale(0.7, 1 / 0.7, 21);
  EXPECT_EQ(a.rgb, c.rgb);
  EXPECT_EQ(a.point_labels, c.point_labels);
  auto dist = [](const PointCloud& p, std::size_t i, std::size_t j) {
    double d = 0;
    for (int k = 0; k < 3; ++k) d += (p.coord(i, k) - p.coord(j, k)) * (p.coord(i, k) - p.coord(j, k));
    return std::sqrt(d);
  };
  for (std::size_t i = 1; i < 20; ++i) {
    const double base = dist(c, 0, i);
    if (base == 0) continue;
    EXPECT_NEAR(dist(a, 0, i) / base, s, 1e-12);
  }
}

TEST(Loss, UniformLogitsGiveLogC) {
  Tensor<double> z({3, 5}, std::vector<double>(15, 0.25));
  EXPECT_NEAR(cross_entropy<double>(z, std::vector<int>{0, 2, 4}).item(), std::log(5.0), 1e-14);
}

TEST(Loss, EmptyBatchIsAnError) {
  Tensor<double> z({0, 5}, {});
  EXPECT_THROW(cross_entropy<double>(z, std::vector<int>{}), Error);
}

TEST(Metrics, HandComputedTwoClass) {
  Confusion c(2);
  c.add(0, 0);
  c.add(0, 0);
  c.add(0, 1);
  c.add(1, 1);
  const auto r = metrics(c);
  EXPECT_DOUBLE_EQ(r.overall_accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.mean_iou, 7.0 / 12.0);
  EXPECT_DOUBLE_EQ(r.mean_class_accuracy, (2.0 / 3.0 + 1.0) / 2.0);
}

TEST(Metrics, PerfectConfusion) {
  Confusion c(3);
  for (int k = 0; k < 3; ++k) c.add(k, k);
  const auto r = metrics(c);
  EXPECT_EQ(r.overall_accuracy, 1.0);
  EXPECT_EQ(r.mean_class_accuracy, 1.0);
  EXPECT_EQ(r.mean_iou, 1.0);
}

TEST(Metrics, AbsentClassExcludedFromIou) {
  Confusion c(3);
  c.add(0, 0);
  c.add(1, 1);
  const auto r = metrics(c);
  EXPECT_EQ(r.mean_iou, 1.0);
  EXPECT_TRUE(std::isnan(r.class_iou[2]));
}

TEST(Metrics, EmptyConfusionIsAnError) {
  EXPECT_THROW(metrics(Confusion(3)), Error);
}

TEST(Synthetic, ShapesArePureFunctionsOfSeed) {
  const auto a = make_synthetic_shapes(2, 64, 7), b = make_synthetic_shapes(2, 64, 7), c = make_synthetic_shapes(2, 64, 8);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].xyz, b[i].xyz);
    EXPECT_EQ(a[i].label, b[i].label);
  }
  EXPECT_NE(a[0].xyz, c[0].xyz);
}

TEST(Synthetic, EveryShapeClassPresent) {
  const auto a = make_synthetic_shapes(3, 64, 1);
  std::vector<int> hist(kShapeClasses.size());
  for (const auto& c : a) ++hist[c.label];
  for (int h : hist) EXPECT_EQ(h, 3);
}

TEST(Synthetic, SphereRadiusVarianceSmall) {
  for (const auto& c : make_synthetic_shapes(4, 512, 3)) {
    if (c.label != 0) continue;
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      double r = 0;
      for (int k = 0; k < 3; ++k) r += c.coord(i, k) * c.coord(i, k);
      r = std::sqrt(r);
      mean += r / c.size();
      sq += r * r / c.size();
    }
    EXPECT_LT(sq - mean * mean, 1e-3);
  }
}

TEST(Synthetic, ScenesDeterministicAndLabelled) {
  SceneConfig sc;
  const auto a = make_synthetic_scenes(6, sc, 5), b = make_synthetic_scenes(6, sc, 5);
  std::vector<int> hist(kSceneClasses.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].xyz, b[i].xyz);
    EXPECT_EQ(a[i].rgb, b[i].rgb);
    EXPECT_EQ(a[i].point_labels, b[i].point_labels);
    ASSERT_EQ(a[i].size(), sc.n_points);
    ASSERT_EQ(a[i].point_labels.size(), sc.n_points);
    std::vector<int> local(kSceneClasses.size());
    for (int l : a[i].point_labels) ++local[l], ++hist[l];
    EXPECT_GT(local[0], 0);  // every scene has a floor
    EXPECT_GE(std::count_if(local.begin() + 1, local.end(), [](int n) { return n > 0; }), 1);
  }
  for (int h : hist) EXPECT_GT(h, 0);
}

TEST(Synthetic, RejectsTinyClouds) { EXPECT_THROW(make_synthetic_shapes(1, 32, 1), Error); }

ModelSpec small_cls() {
  ModelSpec s;
  s.task = Task::classification;
  s.stages = {presets::knn_stage(8, 1, 4), presets::knn_stage(16, 2, 4)};
  s.head_widths = {16};
  s.num_classes = 2;
  return s;
}

TEST(Train, MemorizesTwoSamples) {
  auto data = make_synthetic_shapes(1, 64, 3);
  data.resize(2);  // sphere, cube
  data[1].label = 1;
  auto m = build_model<float>(small_cls(), 1);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 200;
  cfg.scale_lo = cfg.scale_hi = 1.0;
  cfg.schedule.period_epochs = 1000;
  const auto log = train(m, data, {}, cfg);
  EXPECT_LT(log.back().train_loss, 1e-2);
}

TEST(Train, DeterministicUnderFixedSeed) {
  auto data = make_synthetic_shapes(2, 64, 3);
  for (auto& c : data) c.label %= 2;
  auto run = [&] {
    auto m = build_model<float>(small_cls(), 1);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.seed = 9;
    const auto log = train(m, data, {}, cfg);
    std::vector<float> w;
    for (const auto& [_, p] : m.store.params()) w.insert(w.end(), p.data().begin(), p.data().end());
    return std::make_pair(log.back().train_loss, w);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, LearningRateLogRepeatsEvery25Epochs) {
  auto data = make_synthetic_shapes(1, 64, 3);
  data.resize(2);
  data[1].label = 1;
  auto m = build_model<float>(small_cls(), 1);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 50;
  const auto log = train(m, data, {}, cfg);
  for (std::size_t e = 0; e < 25; ++e) EXPECT_EQ(log[e].lr, log[e + 25].lr);
  const auto rows = epoch_log_rows(log);
  ASSERT_EQ(rows.size(), 50u);
  EXPECT_EQ(rows[0].size(), kEpochLogHeader.size());
}

TEST(Train, NonFiniteLossIsDivergence) {
  auto data = make_synthetic_shapes(1, 64, 3);
  data.resize(2);
  data[1].label = 1;
  auto m = build_model<float>(small_cls(), 1);
  auto& w = m.store.param("head.layer1.weight");
  w.mutable_data()[0] = std::numeric_limits<float>::infinity();
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 1;
  try {
    train(m, data, {}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
  }
}

TEST(Evaluate, CountsEveryPointForSegmentation) {
  SceneConfig sc;
  sc.n_points = 256;
  const auto data = make_synthetic_scenes(2, sc, 1);
  auto m = build_model<float>(presets::desk_scene_segmentation(), 1);
  const auto r = evaluate(m, data, 2);
  std::uint64_t total = 0;
  for (auto v : r.confusion.counts) total += v;
  EXPECT_EQ(total, 512u);
}

}  // namespace
}  // namespace pointvig
