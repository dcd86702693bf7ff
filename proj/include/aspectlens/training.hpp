#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aspectlens/error.hpp"
#include "aspectlens/sentiment.hpp"

namespace aspectlens::sentiment {

struct Hyperparams {
  std::size_t dim = 25;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  double init_range = 0.05;
};

struct TrainResult {
  SentimentModel model;
  // Mean loss over the whole training set after each epoch.
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Mini-batch gradient descent on the mean cross-entropy. Batches come from a
// seeded shuffle each epoch; the run is a pure function of (dataset order,
// hyperparameters, seed).
TrainResult train(std::span<const Example> dataset, Head head, text::Vocabulary vocab,
                  const Hyperparams& hyper, std::uint64_t seed);

// Continues training an existing model.
TrainResult train(SentimentModel model, std::span<const Example> dataset,
                  const Hyperparams& hyper, std::uint64_t seed);

double mean_loss(const SentimentModel& model, std::span<const Example> dataset);
double accuracy(const SentimentModel& model, std::span<const Example> dataset);

Distribution predict(const SentimentModel& model, const Example& example);

// Largest relative difference between the analytic gradient and central
// finite differences over every parameter:
// |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
double gradient_check(const SentimentModel& model, const Example& example,
                      double epsilon = 1e-4);

}  // namespace aspectlens::sentiment
