#include "aspectlens/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aspectlens/random.hpp"

namespace aspectlens::sentiment {

Distribution predict(const SentimentModel& model, const Example& example) {
  const text::TokenSequence* aspect = example.aspect ? &*example.aspect : nullptr;
  return forward(model, example.tokens, model.head() == Head::target ? aspect : nullptr)
      .probabilities;
}

double mean_loss(const SentimentModel& model, std::span<const Example> dataset) {
  double total = 0.0;
  for (const auto& ex : dataset) total += loss_and_gradient(model, ex, {});
  return total / static_cast<double>(dataset.size());
}

double accuracy(const SentimentModel& model, std::span<const Example> dataset) {
  std::size_t correct = 0;
  for (const auto& ex : dataset) correct += argmax(predict(model, ex)) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainResult train(SentimentModel model, std::span<const Example> dataset,
                  const Hyperparams& hyper, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("training set is empty");
  if (hyper.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (model.head() == Head::target) {
    for (const auto& ex : dataset) {
      if (!ex.aspect) throw std::invalid_argument("target-head training needs aspects");
    }
  }
  Rng order_rng(derive_seed(seed, 1));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.layout().total);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        loss_and_gradient(model, dataset[order[i]], grad);
      }
      const double step = hyper.learning_rate / static_cast<double>(stop - start);
      auto params = model.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= step * grad[p];
    }
    const double loss = mean_loss(model, dataset);
    if (!std::isfinite(loss)) {
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(loss);
  }
  result.final_loss = result.epoch_loss.empty() ? mean_loss(model, dataset)
                                                : result.epoch_loss.back();
  result.train_accuracy = accuracy(model, dataset);
  result.model = std::move(model);
  return result;
}

TrainResult train(std::span<const Example> dataset, Head head, text::Vocabulary vocab,
                  const Hyperparams& hyper, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("training set is empty");
  SentimentModel model(head, std::move(vocab), hyper.dim, seed, hyper.init_range);
  return train(std::move(model), dataset, hyper, seed);
}

double gradient_check(const SentimentModel& model, const Example& example, double epsilon) {
  std::vector<double> analytic(model.layout().total, 0.0);
  loss_and_gradient(model, example, analytic);
  SentimentModel probe = model;
  auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double saved = params[p];
    params[p] = saved + epsilon;
    const double up = loss_and_gradient(probe, example, {});
    params[p] = saved - epsilon;
    const double down = loss_and_gradient(probe, example, {});
    params[p] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(analytic[p] - numeric) /
                       std::max(1e-8, std::abs(analytic[p]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace aspectlens::sentiment
