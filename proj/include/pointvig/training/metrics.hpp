#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pointvig/error.hpp"

namespace pointvig {

/// counts[truth * C + pred].
struct Confusion {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit Confusion(std::size_t c = 0) : classes(c), counts(c * c, 0) {}

  void add(int truth, int pred) {
    require(truth >= 0 && pred >= 0 && static_cast<std::size_t>(truth) < classes &&
                static_cast<std::size_t>(pred) < classes,
            ErrorKind::index, "confusion: label out of range");
    ++counts[static_cast<std::size_t>(truth) * classes + static_cast<std::size_t>(pred)];
  }

  void add(std::span<const int> truth, std::span<const int> pred) {
    require(truth.size() == pred.size(), ErrorKind::dimension, "confusion: label/prediction count mismatch");
    for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], pred[i]);
  }

  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }
};

struct MetricsReport {
  double overall_accuracy = 0;
  double mean_class_accuracy = 0;
  double mean_iou = 0;
  std::vector<double> class_accuracy;  // NaN for classes absent from the truth
  std::vector<double> class_iou;       // NaN for classes absent from truth and prediction
};

/// Accuracy averages over classes present in the truth; IoU over classes
/// present in either truth or prediction.
inline MetricsReport metrics(const Confusion& c) {
  const std::size_t C = c.classes;
  std::uint64_t total = 0, diag = 0;
  std::vector<std::uint64_t> truth(C, 0), pred(C, 0);
  for (std::size_t t = 0; t < C; ++t)
    for (std::size_t p = 0; p < C; ++p) {
      total += c.at(t, p);
      truth[t] += c.at(t, p);
      pred[p] += c.at(t, p);
    }
  require(total > 0, ErrorKind::empty_input, "metrics: empty confusion matrix");
  for (std::size_t i = 0; i < C; ++i) diag += c.at(i, i);
  MetricsReport r;
  r.overall_accuracy = static_cast<double>(diag) / static_cast<double>(total);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double acc_sum = 0, iou_sum = 0;
  std::size_t acc_n = 0, iou_n = 0;
  for (std::size_t i = 0; i < C; ++i) {
    const double tp = static_cast<double>(c.at(i, i));
    if (truth[i] > 0) {
      r.class_accuracy.push_back(tp / static_cast<double>(truth[i]));
      acc_sum += r.class_accuracy.back();
      ++acc_n;
    } else {
      r.class_accuracy.push_back(nan);
    }
    const double uni = static_cast<double>(truth[i] + pred[i]) - tp;
    if (uni > 0) {
      r.class_iou.push_back(tp / uni);
      iou_sum += r.class_iou.back();
      ++iou_n;
    } else {
      r.class_iou.push_back(nan);
    }
  }
  r.mean_class_accuracy = acc_sum / static_cast<double>(acc_n);
  r.mean_iou = iou_sum / static_cast<double>(iou_n);
  return r;
}

}  // namespace pointvig
