#include <gtest/gtest.h>

#include <algorithm>

#include "gdp/ingestion.hpp"
#include "gdp/text.hpp"
#include "support.hpp"

using namespace gdp;
using gdp::testing::data_dir;
using gdp::testing::temp_dir;

TEST(Text, NormalizeWhitespaceCollapsesAndTrims) {
  EXPECT_EQ(text::normalize_whitespace("  a \t b\n\nc  "), "a b c");
  EXPECT_EQ(text::normalize_whitespace("   "), "");
}

TEST(Text, TokenizeLowercasesAndSplitsOnNonAlnum) {
  EXPECT_EQ(text::tokenize("Hello, World! x2-y"), (std::vector<std::string>{"hello", "world", "x2", "y"}));
  EXPECT_TRUE(text::tokenize("...").empty());
}

TEST(Text, SentenceSplitNeedsWhitespaceAfterTerminator) {
  EXPECT_EQ(text::split_sentences("One. Two? Three! e.g.x"),
            (std::vector<std::string>{"One.", "Two?", "Three!", "e.g.x"}));
}

TEST(Text, FirstWords) {
  EXPECT_EQ(text::first_words("a b  c d", 3), "a b c");
  EXPECT_EQ(text::first_words("a", 3), "a");
}

TEST(Ingestion, PreservesOrderAndAssignsIndices) {
  const auto dir = temp_dir("ingest-order");
  detail::write_file(dir / "d.json",
                     R"({"doc_id":"d","paragraphs":[{"text":"a"},{"text":"b"},{"text":"c"}]})");
  const auto doc = load_document(dir / "d.json");
  ASSERT_EQ(doc.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(doc.paragraphs[i].index, i);
  EXPECT_EQ(doc.paragraphs[0].text, "a");
  EXPECT_EQ(doc.paragraphs[2].text, "c");
}

TEST(Ingestion, WhitespaceOnlyParagraphIsSchemaError) {
  const auto dir = temp_dir("ingest-ws");
  detail::write_file(dir / "d.json", R"({"doc_id":"d","paragraphs":[{"text":"   "}]})");
  EXPECT_THROW(load_document(dir / "d.json"), SchemaError);
}

TEST(Ingestion, SchemaErrors) {
  const auto dir = temp_dir("ingest-schema");
  detail::write_file(dir / "a.json", R"({"paragraphs":[{"text":"x"}]})");
  detail::write_file(dir / "b.json", R"({"doc_id":"d","paragraphs":[]})");
  detail::write_file(dir / "c.json", R"({"doc_id":"d","paragraphs":[{"section_title":"s"}]})");
  detail::write_file(dir / "e.json", R"({"doc_id":"d",)");
  EXPECT_THROW(load_document(dir / "a.json"), SchemaError);
  EXPECT_THROW(load_document(dir / "b.json"), SchemaError);
  EXPECT_THROW(load_document(dir / "c.json"), SchemaError);
  EXPECT_THROW(load_document(dir / "e.json"), SchemaError);
  EXPECT_THROW(load_document(dir / "missing.json"), IoError);
}

TEST(Ingestion, FixtureDocumentSections) {
  const auto doc = load_document(data_dir() / "fixture.doc.json");
  EXPECT_EQ(doc.doc_id, "fixture-001");
  ASSERT_EQ(doc.size(), 12u);
  // Hand-checked mapping: paragraphs 0-3, 4-7 and 8-11 form the three sections.
  const std::vector<std::string> sections{"Graph Encoders", "Spectral Clustering", "Slide Generation"};
  for (std::size_t i = 0; i < 12; ++i) {
    ASSERT_TRUE(doc.paragraphs[i].section_title.has_value());
    EXPECT_EQ(*doc.paragraphs[i].section_title, sections[i / 4]) << i;
  }
  EXPECT_FALSE(doc.paragraphs[0].subsection_title.has_value());
  EXPECT_EQ(doc.paragraphs[1].subsection_title.value_or(""), "Convolution");
}

TEST(Ingestion, SortingByIndexIsNoOpAndLoadIsPure) {
  const auto a = load_document(data_dir() / "fixture.doc.json");
  const auto b = load_document(data_dir() / "fixture.doc.json");
  EXPECT_EQ(a, b);
  auto sorted = a.paragraphs;
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.index < y.index; });
  EXPECT_EQ(sorted, a.paragraphs);
}

TEST(Ingestion, ReferencePresentationIndicesAndEmptyTitle) {
  const auto dir = temp_dir("ingest-pres");
  detail::write_file(dir / "p.json",
                     R"({"doc_id":"d","slides":[{"title":"T","bullets":["x","y"]},{"title":"","bullets":["z"]}]})");
  const auto p = load_reference_presentation(dir / "p.json");
  ASSERT_EQ(p.slides.size(), 2u);
  EXPECT_EQ(p.slides[0].index, 0u);
  EXPECT_EQ(p.slides[1].index, 1u);
  EXPECT_EQ(p.slides[0].body_text, "x\ny");
  EXPECT_EQ(p.slides[1].title, "");
}

TEST(Ingestion, SevenSlideFixtureRoundTrips) {
  const auto path = data_dir() / "fixture.pres.json";
  const auto p = load_reference_presentation(path);
  ASSERT_EQ(p.slides.size(), 7u);
  const auto dir = temp_dir("ingest-rt");
  save_reference_presentation(p, dir / "out.json");
  const auto original = nlohmann::json::parse(detail::read_file(path));
  const auto saved = nlohmann::json::parse(detail::read_file(dir / "out.json"));
  EXPECT_EQ(original, saved);  // nlohmann objects compare independent of key order
  EXPECT_EQ(load_reference_presentation(dir / "out.json"), p);
}

TEST(Ingestion, DocumentRoundTrip) {
  const auto doc = load_document(data_dir() / "fixture.doc.json");
  const auto dir = temp_dir("ingest-doc-rt");
  save_document(doc, dir / "d.json");
  auto again = load_document(dir / "d.json");
  again.source_path = doc.source_path;
  EXPECT_EQ(again, doc);
}
