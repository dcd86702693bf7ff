#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aspectlens/text.hpp"

namespace aspectlens::sentiment {

enum class Label : std::uint8_t { negative = 0, neutral = 1, positive = 2 };

inline constexpr std::size_t kClasses = 3;
inline constexpr std::array<Label, kClasses> kAllLabels{Label::negative, Label::neutral,
                                                        Label::positive};

std::string_view to_string(Label label);

// Maps the five-point scale {-2..2} onto three classes by sign.
Label collapse_label(int raw);

// Accepts class names or five-point integers.
Label parse_label(std::string_view text);

using Distribution = std::array<double, kClasses>;

Label argmax(const Distribution& p);

enum class Head : std::uint8_t { message = 0, target = 1 };

std::string_view to_string(Head head);
Head parse_head(std::string_view text);

// Offsets of each parameter block inside the flat parameter vector.
struct ParameterLayout {
  struct Block {
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
    bool operator==(const Block&) const = default;
  };

  Block embeddings;  // V x E
  Block attention;   // W: E x E
  Block aspect;      // w_a: E x E (target head only, else empty)
  Block bias;        // b: E
  Block score;       // u: E
  Block output;      // V_out: 3 x E (message) or 3 x 2E (target)
  Block output_bias; // b_out: 3
  std::size_t total = 0;

  ParameterLayout() = default;
  ParameterLayout(Head head, std::size_t vocab_size, std::size_t dim);

  bool operator==(const ParameterLayout&) const = default;
};

// Embedding + attention-pooling classifier. The target head encodes the
// message and the aspect with the same embedding table and conditions the
// attention scores on the aspect representation.
class SentimentModel {
 public:
  SentimentModel() = default;
  // Random initialization: embeddings uniform in [-init_range, init_range],
  // dense weights Glorot-uniform, biases zero.
  SentimentModel(Head head, text::Vocabulary vocab, std::size_t dim, std::uint64_t seed,
                 double init_range = 0.05);
  // Explicit parameters (used by deserialization).
  SentimentModel(Head head, text::Vocabulary vocab, std::size_t dim, std::uint64_t seed,
                 std::vector<double> parameters);

  Head head() const { return head_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const text::Vocabulary& vocabulary() const { return vocab_; }
  const ParameterLayout& layout() const { return layout_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  double& at(const ParameterLayout::Block& block, std::size_t r, std::size_t c = 0) {
    return params_[block.offset + r * block.cols + c];
  }
  double at(const ParameterLayout::Block& block, std::size_t r, std::size_t c = 0) const {
    return params_[block.offset + r * block.cols + c];
  }
  std::span<const double> embedding(std::uint32_t token) const {
    return {params_.data() + layout_.embeddings.offset + token * dim_, dim_};
  }

  text::TokenSequence encode(std::string_view text) const {
    return text::preprocess(text, vocab_);
  }

  bool operator==(const SentimentModel&) const = default;

 private:
  Head head_ = Head::message;
  text::Vocabulary vocab_;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  ParameterLayout layout_;
  std::vector<double> params_;
};

// Intermediate values of one forward pass.
struct ForwardTrace {
  std::vector<double> attention;  // alpha, one weight per message token
  std::vector<double> hidden;     // tanh pre-score activations, n x E
  std::vector<double> context;    // E
  std::vector<double> aspect;     // E (target head)
  Distribution logits{};
  Distribution probabilities{};
};

Distribution forward_message(const SentimentModel& model, const text::TokenSequence& tokens);
Distribution forward_target(const SentimentModel& model, const text::TokenSequence& tokens,
                            const text::TokenSequence& aspect);

// Head-agnostic forward pass; `aspect` is required for the target head.
ForwardTrace forward(const SentimentModel& model, const text::TokenSequence& tokens,
                     const text::TokenSequence* aspect);

struct Example {
  text::TokenSequence tokens;
  std::optional<text::TokenSequence> aspect;
  Label label = Label::neutral;
};

// Cross-entropy loss of one example; adds d(loss)/d(parameters) into
// `gradient` when it is non-empty.
double loss_and_gradient(const SentimentModel& model, const Example& example,
                         std::span<double> gradient);

// Model file ("SNT1"): u8 head, u32 dim, u32 vocab size, u64 seed, the
// vocabulary as u16-length strings, u64 parameter count, float32 parameters.
void save_model(const std::filesystem::path& path, const SentimentModel& model);
SentimentModel load_model(const std::filesystem::path& path);

}  // namespace aspectlens::sentiment
