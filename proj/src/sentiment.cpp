#include "aspectlens/sentiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "aspectlens/binary_io.hpp"
#include "aspectlens/random.hpp"

namespace aspectlens::sentiment {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::negative: return "negative";
    case Label::neutral: return "neutral";
    case Label::positive: return "positive";
  }
  return "neutral";
}

Label collapse_label(int raw) {
  if (raw < -2 || raw > 2) {
    throw std::invalid_argument("five-point label out of range: " + std::to_string(raw));
  }
  if (raw < 0) return Label::negative;
  if (raw > 0) return Label::positive;
  return Label::neutral;
}

Label parse_label(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  for (Label l : kAllLabels) {
    if (text == to_string(l)) return l;
  }
  int raw = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), raw);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("unknown sentiment label \"" + std::string(text) + "\"");
  }
  return collapse_label(raw);
}

Label argmax(const Distribution& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kClasses; ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<Label>(best);
}

std::string_view to_string(Head head) { return head == Head::message ? "message" : "target"; }

Head parse_head(std::string_view text) {
  if (text == "message") return Head::message;
  if (text == "target") return Head::target;
  throw std::invalid_argument("unknown head \"" + std::string(text) + "\"");
}

ParameterLayout::ParameterLayout(Head head, std::size_t vocab_size, std::size_t dim) {
  std::size_t at = 0;
  auto block = [&](std::size_t rows, std::size_t cols) {
    Block b{at, rows, cols};
    at += rows * cols;
    return b;
  };
  embeddings = block(vocab_size, dim);
  attention = block(dim, dim);
  aspect = head == Head::target ? block(dim, dim) : block(0, dim);
  bias = block(dim, 1);
  score = block(dim, 1);
  output = block(kClasses, head == Head::target ? 2 * dim : dim);
  output_bias = block(kClasses, 1);
  total = at;
}

SentimentModel::SentimentModel(Head head, text::Vocabulary vocab, std::size_t dim,
                               std::uint64_t seed, double init_range)
    : head_(head), vocab_(std::move(vocab)), dim_(dim), seed_(seed),
      layout_(head, vocab_.size(), dim), params_(layout_.total, 0.0) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  Rng rng(seed);
  auto fill = [&](const ParameterLayout::Block& b, double range) {
    for (std::size_t i = 0; i < b.size(); ++i) params_[b.offset + i] = rng.uniform(-range, range);
  };
  const auto e = static_cast<double>(dim);
  fill(layout_.embeddings, init_range);
  fill(layout_.attention, std::sqrt(6.0 / (2.0 * e)));
  fill(layout_.aspect, std::sqrt(6.0 / (2.0 * e)));
  fill(layout_.score, std::sqrt(6.0 / (e + 1.0)));
  fill(layout_.output, std::sqrt(6.0 / (static_cast<double>(layout_.output.cols) + kClasses)));
}

SentimentModel::SentimentModel(Head head, text::Vocabulary vocab, std::size_t dim,
                               std::uint64_t seed, std::vector<double> parameters)
    : head_(head), vocab_(std::move(vocab)), dim_(dim), seed_(seed),
      layout_(head, vocab_.size(), dim), params_(std::move(parameters)) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (params_.size() != layout_.total) {
    throw std::invalid_argument("parameter count does not match model shape");
  }
}

namespace {

void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (auto& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (auto& x : v) x /= sum;
}

void check_tokens(const SentimentModel& model, const text::TokenSequence& seq, const char* what) {
  if (seq.tokens.empty()) throw std::invalid_argument(std::string(what) + " has no tokens");
  for (auto t : seq.tokens) {
    if (t >= model.vocabulary().size()) {
      throw std::invalid_argument(std::string(what) + " token index out of vocabulary");
    }
  }
}

}  // namespace

ForwardTrace forward(const SentimentModel& model, const text::TokenSequence& tokens,
                     const text::TokenSequence* aspect) {
  const auto& L = model.layout();
  const std::size_t E = model.dim();
  const bool target = model.head() == Head::target;
  check_tokens(model, tokens, "message");
  if (target) {
    if (aspect == nullptr) throw std::invalid_argument("target head needs an aspect");
    check_tokens(model, *aspect, "aspect");
  }

  ForwardTrace tr;
  std::vector<double> shift(E, 0.0);  // b (+ w_a a)
  for (std::size_t j = 0; j < E; ++j) shift[j] = model.at(L.bias, j);
  if (target) {
    tr.aspect.assign(E, 0.0);
    for (auto t : aspect->tokens) {
      const auto e = model.embedding(t);
      for (std::size_t j = 0; j < E; ++j) tr.aspect[j] += e[j];
    }
    const double inv = 1.0 / static_cast<double>(aspect->tokens.size());
    for (auto& v : tr.aspect) v *= inv;
    for (std::size_t r = 0; r < E; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < E; ++c) s += model.at(L.aspect, r, c) * tr.aspect[c];
      shift[r] += s;
    }
  }

  const std::size_t n = tokens.tokens.size();
  tr.hidden.assign(n * E, 0.0);
  tr.attention.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = model.embedding(tokens.tokens[i]);
    double score = 0.0;
    for (std::size_t r = 0; r < E; ++r) {
      double pre = shift[r];
      for (std::size_t c = 0; c < E; ++c) pre += model.at(L.attention, r, c) * e[c];
      const double h = std::tanh(pre);
      tr.hidden[i * E + r] = h;
      score += model.at(L.score, r) * h;
    }
    tr.attention[i] = score;
  }
  softmax_inplace(tr.attention);

  tr.context.assign(E, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = model.embedding(tokens.tokens[i]);
    for (std::size_t j = 0; j < E; ++j) tr.context[j] += tr.attention[i] * e[j];
  }
  for (std::size_t k = 0; k < kClasses; ++k) {
    double z = model.at(L.output_bias, k);
    for (std::size_t j = 0; j < E; ++j) z += model.at(L.output, k, j) * tr.context[j];
    if (target) {
      for (std::size_t j = 0; j < E; ++j) z += model.at(L.output, k, E + j) * tr.aspect[j];
    }
    tr.logits[k] = z;
  }
  tr.probabilities = tr.logits;
  softmax_inplace(tr.probabilities);
  return tr;
}

Distribution forward_message(const SentimentModel& model, const text::TokenSequence& tokens) {
  if (model.head() != Head::message) throw std::invalid_argument("model is not a message head");
  return forward(model, tokens, nullptr).probabilities;
}

Distribution forward_target(const SentimentModel& model, const text::TokenSequence& tokens,
                            const text::TokenSequence& aspect) {
  if (model.head() != Head::target) throw std::invalid_argument("model is not a target head");
  return forward(model, tokens, &aspect).probabilities;
}

double loss_and_gradient(const SentimentModel& model, const Example& example,
                         std::span<double> grad) {
  const bool target = model.head() == Head::target;
  const text::TokenSequence* aspect = example.aspect ? &*example.aspect : nullptr;
  const auto tr = forward(model, example.tokens, target ? aspect : nullptr);
  const auto y = static_cast<std::size_t>(example.label);

  const double zmax = *std::max_element(tr.logits.begin(), tr.logits.end());
  double lse = 0.0;
  for (double z : tr.logits) lse += std::exp(z - zmax);
  const double loss = zmax + std::log(lse) - tr.logits[y];
  if (grad.empty()) return loss;
  if (grad.size() != model.layout().total) {
    throw std::invalid_argument("gradient buffer has the wrong size");
  }

  const auto& L = model.layout();
  const std::size_t E = model.dim();
  const std::size_t n = example.tokens.tokens.size();
  auto g = [&](const ParameterLayout::Block& b, std::size_t r, std::size_t c = 0) -> double& {
    return grad[b.offset + r * b.cols + c];
  };

  Distribution dz = tr.probabilities;
  dz[y] -= 1.0;

  std::vector<double> dctx(E, 0.0);
  std::vector<double> daspect(target ? E : 0, 0.0);
  for (std::size_t k = 0; k < kClasses; ++k) {
    g(L.output_bias, k) += dz[k];
    for (std::size_t j = 0; j < E; ++j) {
      g(L.output, k, j) += dz[k] * tr.context[j];
      dctx[j] += dz[k] * model.at(L.output, k, j);
    }
    if (target) {
      for (std::size_t j = 0; j < E; ++j) {
        g(L.output, k, E + j) += dz[k] * tr.aspect[j];
        daspect[j] += dz[k] * model.at(L.output, k, E + j);
      }
    }
  }

  // Attention softmax backward.
  std::vector<double> dalpha(n, 0.0);
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = model.embedding(example.tokens.tokens[i]);
    double s = 0.0;
    for (std::size_t j = 0; j < E; ++j) s += dctx[j] * e[j];
    dalpha[i] = s;
    weighted += tr.attention[i] * s;
  }

  std::vector<double> dshift(E, 0.0);  // sum over tokens of d(pre)
  std::vector<double> dpre(E, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto tok = example.tokens.tokens[i];
    const auto e = model.embedding(tok);
    const double dscore = tr.attention[i] * (dalpha[i] - weighted);
    for (std::size_t r = 0; r < E; ++r) {
      const double h = tr.hidden[i * E + r];
      g(L.score, r) += dscore * h;
      dpre[r] = dscore * model.at(L.score, r) * (1.0 - h * h);
      dshift[r] += dpre[r];
    }
    for (std::size_t r = 0; r < E; ++r) {
      if (dpre[r] == 0.0) continue;
      for (std::size_t c = 0; c < E; ++c) g(L.attention, r, c) += dpre[r] * e[c];
    }
    for (std::size_t c = 0; c < E; ++c) {
      double de = tr.attention[i] * dctx[c];
      for (std::size_t r = 0; r < E; ++r) de += model.at(L.attention, r, c) * dpre[r];
      g(L.embeddings, tok, c) += de;
    }
  }
  for (std::size_t r = 0; r < E; ++r) g(L.bias, r) += dshift[r];

  if (target) {
    for (std::size_t r = 0; r < E; ++r) {
      for (std::size_t c = 0; c < E; ++c) {
        g(L.aspect, r, c) += dshift[r] * tr.aspect[c];
        daspect[c] += model.at(L.aspect, r, c) * dshift[r];
      }
    }
    const double inv = 1.0 / static_cast<double>(example.aspect->tokens.size());
    for (auto t : example.aspect->tokens) {
      for (std::size_t c = 0; c < E; ++c) g(L.embeddings, t, c) += daspect[c] * inv;
    }
  }
  return loss;
}

void save_model(const std::filesystem::path& path, const SentimentModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write model " + path.string());
  binio::write_magic(out, "SNT1");
  binio::write_le(out, static_cast<std::uint8_t>(model.head()));
  binio::write_le(out, static_cast<std::uint32_t>(model.dim()));
  binio::write_le(out, static_cast<std::uint32_t>(model.vocabulary().size()));
  binio::write_le(out, model.seed());
  for (const auto& w : model.vocabulary().words()) binio::write_string16(out, w);
  binio::write_le(out, static_cast<std::uint64_t>(model.parameters().size()));
  for (double v : model.parameters()) binio::write_f32(out, static_cast<float>(v));
  if (!out) throw FormatError("write failed: " + path.string());
}

SentimentModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read model " + path.string());
  binio::expect_magic(in, "SNT1");
  const auto head_tag = binio::read_le<std::uint8_t>(in, "head");
  if (head_tag > 1) throw FormatError(path.string() + ": unknown head tag");
  const auto dim = binio::read_le<std::uint32_t>(in, "dimension");
  const auto vocab_size = binio::read_le<std::uint32_t>(in, "vocabulary size");
  const auto seed = binio::read_le<std::uint64_t>(in, "seed");
  std::vector<std::string> words(vocab_size);
  for (auto& w : words) w = binio::read_string16(in, "vocabulary entry");
  const auto count = binio::read_le<std::uint64_t>(in, "parameter count");
  const ParameterLayout layout(static_cast<Head>(head_tag), vocab_size, dim);
  if (count != layout.total) throw FormatError(path.string() + ": parameter count mismatch");
  std::vector<double> params(count);
  for (auto& p : params) {
    p = binio::read_f32(in, "parameters");
    if (!std::isfinite(p)) throw FormatError(path.string() + ": non-finite parameter");
  }
  try {
    return SentimentModel(static_cast<Head>(head_tag), text::Vocabulary(std::move(words)), dim,
                          seed, std::move(params));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace aspectlens::sentiment
