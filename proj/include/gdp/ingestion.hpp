#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdp/errors.hpp"
#include "gdp/text.hpp"

namespace gdp {

using json = nlohmann::json;

struct Paragraph {
  std::size_t index = 0;
  std::string text;
  std::optional<std::string> section_title;
  std::optional<std::string> subsection_title;

  friend bool operator==(const Paragraph&, const Paragraph&) = default;
};

struct Document {
  std::string doc_id;
  std::vector<Paragraph> paragraphs;
  std::optional<std::string> source_path;

  std::size_t size() const noexcept { return paragraphs.size(); }

  friend bool operator==(const Document&, const Document&) = default;
};

struct ReferenceSlide {
  std::size_t index = 0;
  std::string title;
  std::string body_text;

  friend bool operator==(const ReferenceSlide&, const ReferenceSlide&) = default;
};

struct ReferencePresentation {
  std::string doc_id;
  std::vector<ReferenceSlide> slides;

  friend bool operator==(const ReferencePresentation&, const ReferencePresentation&) = default;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << bytes;
  if (!out) throw IoError("write failed: " + path.string());
}

inline json parse_json(const std::string& bytes, const std::string& what) {
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError(what + ": invalid JSON: " + e.what());
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing required key '" + key + "'");
  return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const json& obj, const char* key,
                                                  const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(where + "." + key + ": expected a string or null");
  return it->get<std::string>();
}

}  // namespace detail

/// Builds a Document from its JSON form. Paragraph text is whitespace
/// normalized; indices follow array order.
inline Document document_from_json(const json& j) {
  Document doc;
  doc.doc_id = detail::require_string(j, "doc_id", "document");
  const auto& paras = detail::require(j, "paragraphs", "document");
  if (!paras.is_array()) throw SchemaError("document.paragraphs: expected an array");
  if (paras.empty()) throw SchemaError("document.paragraphs: empty paragraph list");
  doc.paragraphs.reserve(paras.size());
  for (std::size_t i = 0; i < paras.size(); ++i) {
    const std::string where = "document.paragraphs[" + std::to_string(i) + "]";
    Paragraph p;
    p.index = i;
    p.text = text::normalize_whitespace(detail::require_string(paras[i], "text", where));
    if (p.text.empty()) throw SchemaError(where + ".text: empty after whitespace normalization");
    p.section_title = detail::optional_string(paras[i], "section_title", where);
    p.subsection_title = detail::optional_string(paras[i], "subsection_title", where);
    doc.paragraphs.push_back(std::move(p));
  }
  return doc;
}

inline json document_to_json(const Document& doc) {
  json paras = json::array();
  for (const auto& p : doc.paragraphs) {
    paras.push_back({{"text", p.text},
                     {"section_title", p.section_title ? json(*p.section_title) : json(nullptr)},
                     {"subsection_title",
                      p.subsection_title ? json(*p.subsection_title) : json(nullptr)}});
  }
  return {{"doc_id", doc.doc_id}, {"paragraphs", std::move(paras)}};
}

inline Document load_document(const std::filesystem::path& path) {
  auto doc = document_from_json(detail::parse_json(detail::read_file(path), path.string()));
  doc.source_path = path.string();
  return doc;
}

inline void save_document(const Document& doc, const std::filesystem::path& path) {
  detail::write_file(path, document_to_json(doc).dump(2) + "\n");
}

/// Reference slides keep their lines verbatim; body_text joins the bullet
/// lines with '\n'. A missing or null title reads as "".
inline ReferencePresentation reference_presentation_from_json(const json& j) {
  ReferencePresentation pres;
  pres.doc_id = detail::require_string(j, "doc_id", "presentation");
  const auto& slides = detail::require(j, "slides", "presentation");
  if (!slides.is_array()) throw SchemaError("presentation.slides: expected an array");
  if (slides.empty()) throw SchemaError("presentation.slides: no slides");
  for (std::size_t i = 0; i < slides.size(); ++i) {
    const std::string where = "presentation.slides[" + std::to_string(i) + "]";
    ReferenceSlide s;
    s.index = i;
    s.title = detail::optional_string(slides[i], "title", where).value_or("");
    const auto& bullets = detail::require(slides[i], "bullets", where);
    if (!bullets.is_array()) throw SchemaError(where + ".bullets: expected an array");
    std::vector<std::string> lines;
    for (const auto& b : bullets) {
      if (!b.is_string()) throw SchemaError(where + ".bullets: expected strings");
      lines.push_back(b.get<std::string>());
    }
    s.body_text = text::join(lines, "\n");
    pres.slides.push_back(std::move(s));
  }
  return pres;
}

inline json reference_presentation_to_json(const ReferencePresentation& pres) {
  json slides = json::array();
  for (const auto& s : pres.slides) {
    json bullets = json::array();
    if (!s.body_text.empty())
      for (auto& line : text::split_lines(s.body_text)) bullets.push_back(std::move(line));
    slides.push_back({{"title", s.title}, {"bullets", std::move(bullets)}});
  }
  return {{"doc_id", pres.doc_id}, {"slides", std::move(slides)}};
}

inline ReferencePresentation load_reference_presentation(const std::filesystem::path& path) {
  return reference_presentation_from_json(
      detail::parse_json(detail::read_file(path), path.string()));
}

inline void save_reference_presentation(const ReferencePresentation& pres,
                                        const std::filesystem::path& path) {
  detail::write_file(path, reference_presentation_to_json(pres).dump(2) + "\n");
}

/// Text of a reference slide as used for embedding: title, newline, body.
inline std::string slide_embedding_text(const ReferenceSlide& slide) {
  return slide.title + "\n" + slide.body_text;
}

}  // namespace gdp
