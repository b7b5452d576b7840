#pragma once

#include <string>
#include <string_view>

namespace gdp::prompts {

inline constexpr std::string_view kPreviousSlidesPlaceholder = "##previous_slides##";
inline constexpr std::string_view kParagraphsPlaceholder = "##Combined_paragraphs##";
inline constexpr std::string_view kPresentationPlaceholder = "##presentation##";

/// Per-slide generation prompt. Table line wraps that split a sentence are
/// joined with a space; the two indented structure lines use four spaces.
inline constexpr std::string_view kSlideTemplate =
    "You are an AI assistant tasked with creating a presentation. You will be given some "
    "paragraphs for which you must create a slide for the presentation. Following are the "
    "detailed instructions on creating the slide, follow them while creating the slide.\n"
    "1. Read these paragraphs, combine them to form a slide.\n"
    "2. The slide will contain a short title and bullet points.\n"
    "3. The slide should have AT MAX 7 bullet points. Each bullet point should have around 15 "
    "words.\n"
    "4. If you're given a title for the previous slide, ensure that the flow between the slides "
    "is maintained.\n"
    "5. Please follow the following structure in the output.\n"
    "    Slide Title: The slide title\n"
    "    Bullet Points:\n"
    "Previous Slides:\n"
    "##previous_slides##\n"
    "\n"
    "Text:\n"
    "##Combined_paragraphs##\n"
    "\n"
    "Slide:";

/// LLM-judge prompt for overall deck quality.
inline constexpr std::string_view kJudgeTemplate =
    "On a scale of 0-10, rate the effectiveness, clarity, and overall quality of the following "
    "text presentation, considering factors such as organization, coherence, and the ability to "
    "convey complex ideas to the audience.\n"
    "0 is the lowest score, whereas 10 is the highest score.\n"
    "\n"
    "Presentation:\n"
    "##presentation##\n"
    "\n"
    "Score (an integer between 0 and 10):";

/// Rendering of an empty previous-slides list.
inline constexpr std::string_view kNoPreviousSlides = "None";

/// Replaces the first occurrence of `placeholder`.
inline std::string substitute(std::string tmpl, std::string_view placeholder, std::string_view value) {
  const auto pos = tmpl.find(placeholder);
  if (pos != std::string::npos) tmpl.replace(pos, placeholder.size(), value);
  return tmpl;
}

}  // namespace gdp::prompts
