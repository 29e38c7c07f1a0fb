#pragma once

#include <memory>
#include <string>

#include "biasaudit/backends.hpp"

namespace biasaudit {

// Thin HTTP clients so remote foundation models can be plugged in without the
// core ever importing model code. Wire format (JSON bodies both ways):
//
//   POST /propose  {"model": id, "system": str, "caption": str}
//                  -> {"text": "<model output>"}          (tolerant-parsed)
//   POST /check    {"model": id, "caption": str, "question": str}
//                  -> {"text": "yes"|"no"|free text}
//   POST /generate {"model": id, "prompt": str, "seed": int, "params": {...}}
//                  -> {"image_b64": str} or {"features": [...]}
//   POST /answer   {"model": id, "question": str, "classes": [...],
//                   "image_b64"?: str, "features"?: [...]}
//                  -> {"logits": [...]}                    (aligned with classes)
//   POST /yesno    {"model": id, "question": str, "image_b64"?: str}
//                  -> {"yes": p} or {"yes_logit": x, "no_logit": y}
//
// Transport failures raise BackendError, protocol violations ParseError; both
// carry the raw response body.

std::shared_ptr<ProposerBackend> make_http_proposer(const BackendConfig& cfg);
std::shared_ptr<GeneratorBackend> make_http_generator(const BackendConfig& cfg);
std::shared_ptr<AnswerModelBackend> make_http_answer_model(const BackendConfig& cfg);
std::shared_ptr<YesNoScorer> make_http_yes_no(const BackendConfig& cfg);

void register_http_backends(BackendRegistry& registry);

// base64 helpers for image payloads.
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace biasaudit
