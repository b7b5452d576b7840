#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace gdp::text {

inline bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences; treat them as word
// characters so non-ASCII words survive tokenization intact.
inline bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

/// Collapses internal whitespace runs to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (unsigned char c : in) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

inline std::string trim(std::string_view in) {
  std::size_t b = 0, e = in.size();
  while (b < e && is_space(static_cast<unsigned char>(in[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(in[e - 1]))) --e;
  return std::string(in.substr(b, e - b));
}

inline std::string to_lower(std::string_view in) {
  std::string out(in);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Lowercased maximal runs of word characters. Everything else separates.
inline std::vector<std::string> tokenize(std::string_view in) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : in) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Splits on '.', '?' or '!' followed by whitespace; pieces are trimmed and
/// empty pieces dropped. The terminator stays with its sentence.
inline std::vector<std::string> split_sentences(std::string_view in) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if ((c == '.' || c == '?' || c == '!') && i + 1 < in.size() &&
        is_space(static_cast<unsigned char>(in[i + 1]))) {
      auto piece = trim(in.substr(start, i + 1 - start));
      if (!piece.empty()) out.push_back(std::move(piece));
      start = i + 1;
    }
  }
  auto tail = trim(in.substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

inline std::vector<std::string> split_words(std::string_view in) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : in) {
    if (is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// First `n` whitespace-separated words, re-joined with single spaces.
inline std::string first_words(std::string_view in, std::size_t n) {
  auto words = split_words(in);
  std::string out;
  for (std::size_t i = 0; i < words.size() && i < n; ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

inline std::string first_sentence(std::string_view in) {
  auto sentences = split_sentences(in);
  return sentences.empty() ? std::string() : sentences.front();
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Splits on '\n'; a trailing '\r' on each line is removed.
inline std::vector<std::string> split_lines(std::string_view in) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= in.size()) {
    auto nl = in.find('\n', start);
    auto line = in.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

}  // namespace gdp::text
