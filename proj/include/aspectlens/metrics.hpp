#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "aspectlens/sentiment.hpp"

namespace aspectlens::sentiment {

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  // confusion[gold][predicted]
  std::array<std::array<std::size_t, kClasses>, kClasses> confusion{};
  std::array<double, kClasses> per_class_f1{};
  // One entry per class absent from both gold and predictions.
  std::vector<std::string> warnings;
};

EvalMetrics evaluate(std::span<const Label> predictions, std::span<const Label> gold);

}  // namespace aspectlens::sentiment
