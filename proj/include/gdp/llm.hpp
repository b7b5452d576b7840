#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gdp/errors.hpp"
#include "gdp/prompts.hpp"
#include "gdp/text.hpp"

namespace gdp {

struct LlmParams {
  std::string model = "gpt-3.5-turbo-1106";
  double temperature = 0.7;
  double top_p = 0.95;
};

/// Text-in, text-out language model. generate() either returns the model's
/// response or throws BackendError.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  virtual std::string name() const = 0;
  virtual const LlmParams& params() const = 0;
  virtual std::string generate(const std::string& prompt) = 0;

  /// `n` independent generations for one prompt.
  virtual std::vector<std::string> generate_n(const std::string& prompt, std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(generate(prompt));
    return out;
  }
};

/// Deterministic offline backend.
///
/// For a slide prompt it answers
///   Slide Title: Slide k: <first 8 words of the first paragraph>
///   Bullet Points:
///   - <first 15 words of paragraph 1>
///   - ...
/// where k is one more than the number of titles listed under "Previous
/// Slides:" and the paragraphs are the blank-line separated blocks of the
/// "Text:" section. For a judge prompt it answers the number of
/// whitespace-separated words of the presentation section modulo 11.
class MockLlm final : public LlmBackend {
 public:
  MockLlm() { params_.model = "mock"; }

  std::string name() const override { return "mock"; }
  const LlmParams& params() const override { return params_; }

  std::string generate(const std::string& prompt) override {
    ++calls_;
    prompts_.push_back(prompt);
    if (prompt.find("Score (an integer between 0 and 10):") != std::string::npos) return judge(prompt);
    return slide(prompt);
  }

  std::size_t calls() const noexcept { return calls_; }
  const std::vector<std::string>& prompts() const noexcept { return prompts_; }

  static std::string judge(const std::string& prompt) {
    const std::string head = "Presentation:\n";
    auto b = prompt.find(head);
    auto e = prompt.rfind("\n\nScore (an integer between 0 and 10):");
    std::string deck;
    if (b != std::string::npos && e != std::string::npos && e >= b + head.size())
      deck = prompt.substr(b + head.size(), e - b - head.size());
    return std::to_string(text::split_words(deck).size() % 11);
  }

  static std::string slide(const std::string& prompt) {
    const std::string prev_head = "Previous Slides:\n", text_head = "\n\nText:\n", tail = "\n\nSlide:";
    const auto pb = prompt.find(prev_head);
    const auto tb = prompt.find(text_head, pb == std::string::npos ? 0 : pb);
    const auto te = prompt.rfind(tail);
    std::size_t k = 1;
    std::vector<std::string> paragraphs;
    if (pb != std::string::npos && tb != std::string::npos && te != std::string::npos && te >= tb + text_head.size()) {
      for (const auto& line : text::split_lines(prompt.substr(pb + prev_head.size(), tb - pb - prev_head.size())))
        if (!text::trim(line).empty() && line != prompts::kNoPreviousSlides) ++k;
      const auto body = prompt.substr(tb + text_head.size(), te - tb - text_head.size());
      std::size_t start = 0;
      while (start <= body.size()) {
        auto sep = body.find("\n\n", start);
        auto block = text::trim(body.substr(start, sep == std::string::npos ? std::string::npos : sep - start));
        if (!block.empty()) paragraphs.push_back(std::move(block));
        if (sep == std::string::npos) break;
        start = sep + 2;
      }
    }
    if (paragraphs.empty()) paragraphs.push_back(text::normalize_whitespace(prompt));
    std::string out = "Slide Title: Slide " + std::to_string(k) + ": " + text::first_words(paragraphs.front(), 8) +
                      "\nBullet Points:\n";
    for (const auto& p : paragraphs) out += "- " + text::first_words(p, 15) + "\n";
    return out;
  }

 private:
  LlmParams params_;
  std::size_t calls_ = 0;
  std::vector<std::string> prompts_;
};

}  // namespace gdp
