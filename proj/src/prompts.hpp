#pragma once

namespace llmfrac::prompts {

// Prompt text is a versioned asset: corpora generated under different
// prompt versions must never be silently mixed, so the version string is
// stamped into every generation record.
inline constexpr const char* kVersion = "v1";

inline constexpr const char* kSummarizeToOutline =
    "The aim here is to reverse-engineer the author's writing process by taking a piece of "
    "text from a paper and compressing it into a more concise form. This process simulates "
    "how an author might distill their thoughts and key points into a structured, yet not "
    "overly condensed form. \n\nNow as a first step, first summarize the goal of the text, "
    "e.g., is it introduction, or method, results? and then given a complete piece of text "
    "from a paper, reverse-engineer it into a list of bullet points.";

inline constexpr const char* kExpandOutline =
    "Following the initial step of reverse-engineering the author's writing process by "
    "compressing a text segment from a paper, you now enter the second phase. Here, your "
    "objective is to expand upon the concise version previously crafted. This stage simulates "
    "how an author elaborates on the distilled thoughts and key points, enriching them into a "
    "detailed, structured narrative. \n\nGiven the concise output from the previous step, "
    "your task is to develop it into a fully fleshed-out text.";

inline constexpr const char* kProofread =
    "Your task is to proofread the provided sentence for grammatical accuracy. Ensure that "
    "the corrections introduce minimal distortion to the original content. ";

} // namespace llmfrac::prompts
