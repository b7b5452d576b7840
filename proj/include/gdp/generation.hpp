#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdp/clustering.hpp"
#include "gdp/errors.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/llm.hpp"
#include "gdp/prompts.hpp"
#include "gdp/text.hpp"

namespace gdp {

/// Upper bound on bullets per slide, as the prompt instructs.
inline constexpr std::size_t kMaxBullets = 7;

struct GeneratedSlide {
  std::size_t index = 0;
  std::string title;
  std::vector<std::string> bullets;
  std::vector<std::size_t> attribution;  // ascending paragraph indices
  std::size_t retries = 0;
  bool fallback = false;

  friend bool operator==(const GeneratedSlide&, const GeneratedSlide&) = default;
};

struct GeneratedPresentation {
  std::string doc_id;
  std::vector<GeneratedSlide> slides;
  nlohmann::json metadata = nlohmann::json::object();
};

struct SlideText {
  std::string title;
  std::vector<std::string> bullets;
};

/// Fills the slide template. Previous titles are newline-joined ("None" when
/// there are none); paragraph texts are joined by blank lines in the order
/// given.
inline std::string render_slide_prompt(const std::vector<Paragraph>& cluster,
                                       const std::vector<std::string>& previous_titles) {
  if (cluster.empty()) throw EmptyCluster("render_slide_prompt: empty cluster");
  std::vector<Paragraph> ordered = cluster;
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  std::vector<std::string> texts;
  for (const auto& p : ordered) texts.push_back(p.text);
  const std::string prev =
      previous_titles.empty() ? std::string(prompts::kNoPreviousSlides) : text::join(previous_titles, "\n");
  auto out = prompts::substitute(std::string(prompts::kSlideTemplate), prompts::kPreviousSlidesPlaceholder, prev);
  return prompts::substitute(std::move(out), prompts::kParagraphsPlaceholder, text::join(texts, "\n\n"));
}

namespace detail {

/// Drops leading markdown/bullet decoration: '#', '*', '_', '>', '-', '+',
/// bullet and dash glyphs, numbering like "1." or "2)", and whitespace.
inline std::string strip_leading_markup(std::string_view line) {
  std::string s = text::trim(line);
  for (bool changed = true; changed && !s.empty();) {
    changed = false;
    for (std::string_view glyph : {"\xE2\x80\xA2", "\xE2\x80\x93", "\xE2\x80\x94", "\xC2\xB7", "\xE2\x96\xAA", "\xE2\x97\xA6"}) {
      if (s.rfind(glyph, 0) == 0) {
        s = text::trim(s.substr(glyph.size()));
        changed = true;
      }
    }
    if (!s.empty() && std::string_view("#*_>-+").find(s.front()) != std::string_view::npos) {
      s = text::trim(s.substr(1));
      changed = true;
    }
    std::size_t d = 0;
    while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
    if (d > 0 && d < s.size() && (s[d] == '.' || s[d] == ')') &&
        (d + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[d + 1])))) {
      s = text::trim(s.substr(d + 1));
      changed = true;
    }
  }
  return s;
}

inline std::string strip_trailing_markup(std::string s) {
  while (!s.empty() && (s.back() == '*' || s.back() == '_' || text::is_space(static_cast<unsigned char>(s.back()))))
    s.pop_back();
  return s;
}

/// Removes the label, markup around it, and leading separators.
inline std::string after_label(const std::string& line, std::size_t label_len) {
  std::string rest = line.substr(label_len);
  auto pos = rest.find_first_not_of("*_ \t");
  rest = pos == std::string::npos ? std::string() : rest.substr(pos);
  return strip_trailing_markup(text::trim(rest));
}

}  // namespace detail

/// Parses "Slide Title: ..." and the non-empty lines after "Bullet Points:".
/// Returns nothing when no title or no bullet is found. At most seven
/// bullets are kept.
inline std::optional<SlideText> parse_slide_response(const std::string& response) {
  const auto lines = text::split_lines(response);
  std::optional<std::string> title;
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    const auto s = detail::strip_leading_markup(lines[i]);
    if (text::starts_with_ci(s, "slide title:")) {
      title = detail::after_label(s, 12);
      ++i;
      break;
    }
  }
  if (!title || title->empty()) return std::nullopt;
  bool in_bullets = false;
  SlideText out{*title, {}};
  for (; i < lines.size(); ++i) {
    const auto s = detail::strip_leading_markup(lines[i]);
    if (!in_bullets) {
      if (text::starts_with_ci(s, "bullet points:")) {
        in_bullets = true;
        auto inline_rest = detail::after_label(s, 14);
        if (!inline_rest.empty()) out.bullets.push_back(std::move(inline_rest));
      }
      continue;
    }
    auto b = detail::strip_trailing_markup(s);
    if (!b.empty()) out.bullets.push_back(std::move(b));
  }
  if (out.bullets.empty()) return std::nullopt;
  if (out.bullets.size() > kMaxBullets) out.bullets.resize(kMaxBullets);
  return out;
}

struct SlideAttempt {
  SlideText slide;
  std::size_t retries = 0;
};

/// Calls the backend until the response parses, at most 1 + max_retries
/// times. Backend failures count as attempts; when the last attempt failed
/// in the backend BackendError is rethrown, otherwise MalformedOutput.
inline SlideAttempt generate_slide(LlmBackend& backend, const std::string& prompt, std::size_t max_retries = 3) {
  std::optional<BackendError> last_backend_error;
  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    try {
      const auto response = backend.generate(prompt);
      last_backend_error.reset();
      if (auto parsed = parse_slide_response(response)) return {std::move(*parsed), attempt};
    } catch (const BackendError& e) {
      last_backend_error = e;
    }
  }
  if (last_backend_error) throw *last_backend_error;
  throw MalformedOutput("generate_slide: no parsable response after " + std::to_string(max_retries + 1) + " attempts");
}

/// Deterministic replacement slide when the backend keeps answering in the
/// wrong shape: title from the first sentence of the lowest-index paragraph
/// (10 words), one bullet per paragraph from its first sentence.
inline SlideText fallback_slide(const std::vector<Paragraph>& cluster) {
  std::vector<Paragraph> ordered = cluster;
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  SlideText s;
  s.title = text::first_words(text::first_sentence(ordered.front().text), 10);
  for (const auto& p : ordered) {
    if (s.bullets.size() == kMaxBullets) break;
    s.bullets.push_back(text::first_sentence(p.text));
  }
  return s;
}

/// Raised when generation stops on a backend failure; carries the slides
/// produced so far.
class GenerationAborted : public BackendError {
 public:
  GenerationAborted(const std::string& what, GeneratedPresentation partial)
      : BackendError(what), partial_(std::move(partial)) {}
  const GeneratedPresentation& partial() const noexcept { return partial_; }

 private:
  GeneratedPresentation partial_;
};

struct GenerationOptions {
  std::size_t max_retries = 3;
};

inline std::vector<Paragraph> cluster_paragraphs(const Document& doc, const Cluster& cluster) {
  std::vector<Paragraph> out;
  for (auto idx : cluster) {
    if (idx >= doc.size()) throw SchemaError("plan references paragraph " + std::to_string(idx) + " outside the document");
    out.push_back(doc.paragraphs[idx]);
  }
  return out;
}

/// Generates the slides strictly in plan order; slide k sees the titles of
/// slides 1..k-1.
inline GeneratedPresentation generate_presentation(const Document& doc, const SlidePlan& plan, LlmBackend& backend,
                                                   const GenerationOptions& opts = {}) {
  GeneratedPresentation pres;
  pres.doc_id = doc.doc_id;
  std::vector<std::string> titles;
  nlohmann::json retries = nlohmann::json::array();
  nlohmann::json fallbacks = nlohmann::json::array();
  auto finish_metadata = [&] {
    pres.metadata["backend"] = backend.name();
    pres.metadata["model"] = backend.params().model;
    pres.metadata["temperature"] = backend.params().temperature;
    pres.metadata["top_p"] = backend.params().top_p;
    pres.metadata["retries"] = retries;
    pres.metadata["fallback_slides"] = fallbacks;
  };
  for (std::size_t k = 0; k < plan.k(); ++k) {
    const auto paras = cluster_paragraphs(doc, plan.ordered_clusters[k]);
    GeneratedSlide slide;
    slide.index = k;
    slide.attribution = plan.ordered_clusters[k];
    try {
      auto attempt = generate_slide(backend, render_slide_prompt(paras, titles), opts.max_retries);
      slide.title = std::move(attempt.slide.title);
      slide.bullets = std::move(attempt.slide.bullets);
      slide.retries = attempt.retries;
    } catch (const MalformedOutput&) {
      auto fb = fallback_slide(paras);
      slide.title = std::move(fb.title);
      slide.bullets = std::move(fb.bullets);
      slide.retries = opts.max_retries;
      slide.fallback = true;
      fallbacks.push_back(k);
    } catch (const BackendError& e) {
      finish_metadata();
      pres.metadata["failed"] = true;
      pres.metadata["failed_slide"] = k;
      throw GenerationAborted("slide " + std::to_string(k) + ": " + e.what(), std::move(pres));
    }
    retries.push_back(slide.retries);
    titles.push_back(slide.title);
    pres.slides.push_back(std::move(slide));
  }
  finish_metadata();
  return pres;
}

inline nlohmann::json presentation_to_json(const GeneratedPresentation& pres) {
  nlohmann::json slides = nlohmann::json::array();
  for (const auto& s : pres.slides)
    slides.push_back({{"title", s.title}, {"bullets", s.bullets}, {"attribution", s.attribution}});
  return {{"doc_id", pres.doc_id}, {"slides", std::move(slides)}, {"metadata", pres.metadata}};
}

/// Reads a generated presentation. "attribution" and "metadata" are
/// optional, so reference decks load too.
inline GeneratedPresentation presentation_from_json(const nlohmann::json& j) {
  GeneratedPresentation pres;
  pres.doc_id = detail::require_string(j, "doc_id", "presentation");
  const auto& slides = detail::require(j, "slides", "presentation");
  if (!slides.is_array()) throw SchemaError("presentation.slides: expected an array");
  for (std::size_t i = 0; i < slides.size(); ++i) {
    const std::string where = "presentation.slides[" + std::to_string(i) + "]";
    GeneratedSlide s;
    s.index = i;
    s.title = detail::optional_string(slides[i], "title", where).value_or("");
    try {
      s.bullets = detail::require(slides[i], "bullets", where).get<std::vector<std::string>>();
      if (slides[i].contains("attribution"))
        s.attribution = slides[i].at("attribution").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::type_error& e) {
      throw SchemaError(where + ": " + e.what());
    }
    pres.slides.push_back(std::move(s));
  }
  if (j.contains("metadata")) pres.metadata = j.at("metadata");
  if (pres.metadata.is_object()) {
    const auto fb = pres.metadata.value("fallback_slides", nlohmann::json::array());
    const auto rt = pres.metadata.value("retries", nlohmann::json::array());
    for (std::size_t i = 0; i < pres.slides.size(); ++i) {
      if (i < rt.size() && rt[i].is_number_unsigned()) pres.slides[i].retries = rt[i].get<std::size_t>();
      pres.slides[i].fallback = std::find(fb.begin(), fb.end(), nlohmann::json(i)) != fb.end();
    }
  }
  return pres;
}

/// Title followed by bullets, newline separated.
inline std::string slide_text(const GeneratedSlide& s) {
  std::vector<std::string> parts{s.title};
  parts.insert(parts.end(), s.bullets.begin(), s.bullets.end());
  return text::join(parts, "\n");
}

/// Whole deck: slide texts separated by blank lines.
inline std::string deck_text(const GeneratedPresentation& p) {
  std::vector<std::string> parts;
  for (const auto& s : p.slides) parts.push_back(slide_text(s));
  return text::join(parts, "\n\n");
}

}  // namespace gdp
