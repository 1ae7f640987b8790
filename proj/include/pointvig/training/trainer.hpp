#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pointvig/io/csv.hpp"
#include "pointvig/networks/model.hpp"
#include "pointvig/training/metrics.hpp"
#include "pointvig/training/optim.hpp"
#include "pointvig/training/synthetic.hpp"

namespace pointvig {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  ScheduleConfig schedule;
  AdamConfig adam;
  double scale_lo = 0.7;
  double scale_hi = 1.0 / 0.7;
  bool strict_deterministic = true;

  void validate() const {
    schedule.validate();
    require(batch_size >= 1, ErrorKind::validation, "batch_size must be >= 1");
    require(epochs >= 1, ErrorKind::validation, "epochs must be >= 1");
    require(scale_lo > 0 && scale_lo <= scale_hi, ErrorKind::validation, "scale range must satisfy 0 < lo <= hi");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  MetricsReport metrics;  // held-out set, or the training predictions when none is given
};

struct EvalResult {
  Confusion confusion;
  MetricsReport report;
};

namespace detail {

inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  return mix_seed(seed ^ 0xa5a5a5a5ULL, epoch, index);
}

template <class T>
std::vector<int> batch_targets(const Model<T>& m, const Batch<T>& b) {
  if (!m.spec.segmentation()) return b.labels;
  require(b.point_labels.size() == b.rows(), ErrorKind::validation, "segmentation needs per-point labels");
  return b.point_labels;
}

}  // namespace detail

/// Eval-mode predictions over `data`, in order.
template <class T>
std::vector<int> predict(Model<T>& m, const std::vector<PointCloud>& data, std::size_t batch_size = 32) {
  NoGradGuard guard;
  std::vector<int> out;
  for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
    std::vector<const PointCloud*> group;
    for (std::size_t i = lo; i < std::min(data.size(), lo + batch_size); ++i) group.push_back(&data[i]);
    const auto pred = argmax_rows(forward(m, make_batch<T>(group, m.spec.input_width)));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

template <class T>
EvalResult evaluate(Model<T>& m, const std::vector<PointCloud>& data, std::size_t batch_size = 32) {
  require(!data.empty(), ErrorKind::empty_input, "evaluate: empty dataset");
  const auto pred = predict(m, data, batch_size);
  std::vector<int> truth;
  for (const auto& c : data) {
    if (m.spec.segmentation())
      truth.insert(truth.end(), c.point_labels.begin(), c.point_labels.end());
    else
      truth.push_back(c.label);
  }
  EvalResult r{Confusion(m.spec.num_classes), {}};
  r.confusion.add(truth, pred);
  r.report = metrics(r.confusion);
  return r;
}

/// Mini-batch Adam training with scale augmentation and the cosine restart
/// schedule (learning rate fixed within an epoch). Fully determined by the
/// model's initial parameters, the data and `cfg.seed`.
template <class T>
std::vector<EpochRecord> train(Model<T>& m, const std::vector<PointCloud>& train_set,
                               const std::vector<PointCloud>& test_set, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  require(!train_set.empty(), ErrorKind::empty_input, "train: empty training set");
  AdamState adam;
  std::vector<EpochRecord> log;
  std::vector<std::size_t> order(train_set.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(detail::mix_seed(cfg.seed, 7, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(static_cast<double>(epoch), cfg.schedule);
    double loss_sum = 0;
    std::size_t batches = 0;
    Confusion seen(m.spec.num_classes);
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      std::vector<PointCloud> clouds;
      for (std::size_t i = lo; i < std::min(order.size(), lo + cfg.batch_size); ++i)
        clouds.push_back(augment_scale(train_set[order[i]], cfg.scale_lo, cfg.scale_hi,
                                       detail::sample_seed(cfg.seed, epoch, order[i])));
      std::vector<const PointCloud*> ptrs;
      for (const auto& c : clouds) ptrs.push_back(&c);
      const auto batch = make_batch<T>(ptrs, m.spec.input_width);
      const auto targets = detail::batch_targets(m, batch);

      ForwardContext<T> ctx;
      ctx.mode = NormMode::train;
      ctx.seed = detail::mix_seed(cfg.seed, 11, step++);
      const Tensor<T> logits = forward(m, batch, ctx);
      Tensor<T> loss = cross_entropy<T>(logits, targets);
      const double value = static_cast<double>(loss.item());
      require(std::isfinite(value), ErrorKind::divergence,
              "non-finite training loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step - 1));
      m.store.zero_grad();
      loss.backward();
      adam_step(m.store, adam, lr, cfg.adam);
      loss_sum += value;
      ++batches;
      if (test_set.empty()) seen.add(targets, argmax_rows(logits));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.metrics = test_set.empty() ? metrics(seen) : evaluate(m, test_set, cfg.batch_size).report;
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

inline const io::CsvRow kEpochLogHeader{"epoch", "lr", "train_loss", "OA", "mAcc", "mIoU"};

inline std::vector<io::CsvRow> epoch_log_rows(const std::vector<EpochRecord>& log) {
  std::vector<io::CsvRow> rows;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& r : log)
    rows.push_back({std::to_string(r.epoch), num(r.lr), num(r.train_loss), num(r.metrics.overall_accuracy),
                    num(r.metrics.mean_class_accuracy), num(r.metrics.mean_iou)});
  return rows;
}

}  // namespace pointvig
