#pragma once

#include <string>
#include <vector>

#include "biasaudit/backends.hpp"

namespace biasaudit {

// Tolerant parser for LLM bias-proposal output. The protocol asks the model
// for JSON only, but real models wrap it in prose or code fences, vary key
// names, or emit an object keyed Bias1/Bias2 instead of an array. Accepted
// shapes:
//   [{"name": ..., "classes": [...], "question": ..., "present_in_prompt": ...}, ...]
//   {"biases": [...]}
//   {"Bias1": {...}, "Bias2": {...}}
// Key aliases: name|bias|bias_name, classes|class_set, present_in_prompt|present.
// Throws ParseError (raw text attached) when no conforming triplet is found.
std::vector<BiasProposal> parse_proposals_text(const std::string& text);

// Extracts the first balanced top-level JSON array or object from free text
// (handles ```json fences). Returns an empty string when none exists.
std::string extract_json_block(const std::string& text);

// Default system prompt implementing the proposal protocol; used by the HTTP
// proposer unless the backend config overrides it.
const std::string& default_proposal_system_prompt();

// Parses a yes/no style answer ("Yes, because ..." -> true). Throws
// ParseError when neither token is found.
bool parse_yes_no(const std::string& text);

}  // namespace biasaudit
