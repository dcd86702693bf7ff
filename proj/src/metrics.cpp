#include "aspectlens/metrics.hpp"

#include <stdexcept>

namespace aspectlens::sentiment {

EvalMetrics evaluate(std::span<const Label> predictions, std::span<const Label> gold) {
  if (predictions.size() != gold.size()) {
    throw std::invalid_argument("prediction and gold label counts differ");
  }
  if (gold.empty()) throw std::invalid_argument("cannot evaluate an empty label set");
  EvalMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predictions[i])];
    correct += gold[i] == predictions[i];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kClasses; ++c) {
    const double tp = static_cast<double>(m.confusion[c][c]);
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t o = 0; o < kClasses; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(m.confusion[o][c]);
      fn += static_cast<double>(m.confusion[c][o]);
    }
    const double denom = 2.0 * tp + fp + fn;
    if (denom == 0.0) {
      m.warnings.push_back("class " + std::string(to_string(static_cast<Label>(c))) +
                           " absent from gold and predictions; F1 counted as 0");
      m.per_class_f1[c] = 0.0;
    } else {
      m.per_class_f1[c] = 2.0 * tp / denom;
    }
    f1_sum += m.per_class_f1[c];
  }
  m.macro_f1 = f1_sum / static_cast<double>(kClasses);
  return m;
}

}  // namespace aspectlens::sentiment
