#include "biasaudit/http_backends.hpp"

#include <httplib.h>

#include "biasaudit/llm_parse.hpp"

namespace biasaudit {

namespace {

struct ParsedEndpoint {
    std::string host_port;  // scheme://host:port
    std::string base_path;  // path prefix, no trailing slash
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
    if (endpoint.empty()) throw ConfigError("http backend needs an endpoint");
    std::size_t scheme = endpoint.find("://");
    std::size_t path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string path = endpoint.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {endpoint.substr(0, path_start), path};
}

nlohmann::json post_json(const BackendConfig& cfg, const std::string& route,
                         const nlohmann::json& body) {
    ParsedEndpoint ep = split_endpoint(cfg.endpoint);
    httplib::Client client(ep.host_port);
    client.set_connection_timeout(cfg.params.value("timeout_s", 30));
    client.set_read_timeout(cfg.params.value("timeout_s", 30));
    auto res = client.Post(ep.base_path + route, body.dump(), "application/json");
    if (!res) {
        throw BackendError("backend '" + cfg.name + "' unavailable at " + cfg.endpoint + route);
    }
    if (res->status != 200) {
        throw BackendError("backend '" + cfg.name + "' returned HTTP " +
                               std::to_string(res->status) + " for " + route,
                           res->body);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("backend '" + cfg.name + "' sent a non-JSON body: " + e.what(),
                         res->body);
    }
}

std::string text_of(const BackendConfig& cfg, const nlohmann::json& reply) {
    if (reply.contains("text") && reply["text"].is_string()) {
        return reply["text"].get<std::string>();
    }
    throw ParseError("backend '" + cfg.name + "' reply lacks a 'text' field", reply.dump());
}

class HttpProposer : public ProposerBackend {
public:
    explicit HttpProposer(BackendConfig cfg) : cfg_(std::move(cfg)) {
        system_prompt_ = cfg_.params.value("system_prompt", default_proposal_system_prompt());
    }

    ProposeResult propose(const std::string& caption) const override {
        if (trim(caption).empty()) throw DataError("propose: caption must be nonempty");
        nlohmann::json body{
            {"model", cfg_.model_id}, {"system", system_prompt_}, {"caption", caption}};
        nlohmann::json reply = post_json(cfg_, "/propose", body);
        ProposeResult out;
        out.raw_payload = text_of(cfg_, reply);
        out.proposals = parse_proposals_text(out.raw_payload);
        return out;
    }

    bool is_answer_in_caption(const std::string& caption,
                              const std::string& question) const override {
        if (trim(caption).empty() || trim(question).empty()) {
            throw DataError("is_answer_in_caption: caption and question must be nonempty");
        }
        nlohmann::json body{
            {"model", cfg_.model_id}, {"caption", caption}, {"question", question}};
        nlohmann::json reply = post_json(cfg_, "/check", body);
        return parse_yes_no(text_of(cfg_, reply));
    }

private:
    BackendConfig cfg_;
    std::string system_prompt_;
};

// Remote generators hand back opaque images; no gradient access.
class HttpTrace : public GenerationTrace {
public:
    HttpTrace(TokenizedPrompt prompt, std::uint64_t seed, Image image)
        : prompt_(std::move(prompt)), seed_(seed), image_(std::move(image)) {}

    const TokenizedPrompt& prompt() const override { return prompt_; }
    std::uint64_t seed() const override { return seed_; }
    int steps() const override { return 1; }
    const Image& image() const override { return image_; }
    bool differentiable() const override { return false; }

    std::vector<double> step_features(int) const override { throw_nd(); }
    std::vector<double> step_features_at(int, const Matrix&) const override { throw_nd(); }
    Matrix backprop_to_embeddings(int, const std::vector<double>&) const override { throw_nd(); }

private:
    [[noreturn]] static void throw_nd() {
        throw NotDifferentiableError("remote generator does not expose gradients");
    }

    TokenizedPrompt prompt_;
    std::uint64_t seed_;
    Image image_;
};

class HttpGenerator : public GeneratorBackend {
public:
    explicit HttpGenerator(BackendConfig cfg) : cfg_(std::move(cfg)) {}

    std::unique_ptr<GenerationTrace> generate(const std::string& prompt,
                                              std::uint64_t seed) const override {
        if (trim(prompt).empty()) throw DataError("generate: prompt must be nonempty");
        nlohmann::json body{{"model", cfg_.model_id},
                            {"prompt", prompt},
                            {"seed", seed},
                            {"params", cfg_.params}};
        nlohmann::json reply = post_json(cfg_, "/generate", body);
        Image img;
        if (reply.contains("features") && reply["features"].is_array()) {
            img.kind = "planted.features.v1";
            img.features = reply["features"].get<std::vector<double>>();
        } else if (reply.contains("image_b64") && reply["image_b64"].is_string()) {
            img.kind = "png";
            img.blob = base64_decode(reply["image_b64"].get<std::string>());
        } else {
            throw ParseError("generator reply lacks 'features' or 'image_b64'", reply.dump());
        }
        TokenizedPrompt tp;
        tp.text = prompt;
        for (const auto& raw : split_words(prompt)) {
            std::string w = strip_punct(raw);
            if (!w.empty()) tp.words.push_back(w);
        }
        return std::make_unique<HttpTrace>(std::move(tp), seed, std::move(img));
    }

    bool differentiable() const override { return false; }
    std::string fingerprint() const override { return cfg_.fingerprint(); }

private:
    BackendConfig cfg_;
};

class HttpAnswerModel : public AnswerModelBackend {
public:
    explicit HttpAnswerModel(BackendConfig cfg) : cfg_(std::move(cfg)) {}

    AnswerLogits answer_logits(const Image& image, const std::string& question,
                               const std::vector<std::string>& classes) const override {
        if (classes.size() < 2) throw DataError("answer_logits: need at least 2 classes");
        nlohmann::json body{{"model", cfg_.model_id}, {"question", question},
                            {"classes", classes}};
        if (!image.features.empty()) body["features"] = image.features;
        if (!image.blob.empty()) body["image_b64"] = base64_encode(image.blob);
        nlohmann::json reply = post_json(cfg_, "/answer", body);
        if (!reply.contains("logits") || !reply["logits"].is_array() ||
            reply["logits"].size() != classes.size()) {
            throw ParseError("answer reply lacks a logits vector aligned with classes",
                             reply.dump());
        }
        AnswerLogits out;
        out.classes = classes;
        out.logits = reply["logits"].get<std::vector<double>>();
        return out;
    }

    std::string fingerprint() const override { return cfg_.fingerprint(); }

private:
    BackendConfig cfg_;
};

class HttpYesNo : public YesNoScorer {
public:
    explicit HttpYesNo(BackendConfig cfg) : cfg_(std::move(cfg)) {}

    double yes_probability(const std::string& question, const Image* image) const override {
        nlohmann::json body{{"model", cfg_.model_id}, {"question", question}};
        if (image && !image->blob.empty()) body["image_b64"] = base64_encode(image->blob);
        if (image && !image->features.empty()) body["features"] = image->features;
        nlohmann::json reply = post_json(cfg_, "/yesno", body);
        if (reply.contains("yes") && reply["yes"].is_number()) {
            double p = reply["yes"].get<double>();
            if (p < 0.0 || p > 1.0) throw ParseError("'yes' probability outside [0,1]",
                                                     reply.dump());
            return p;
        }
        if (reply.contains("yes_logit") && reply.contains("no_logit")) {
            // Normalize over {yes, no} mass only.
            double y = reply["yes_logit"].get<double>();
            double n = reply["no_logit"].get<double>();
            return 1.0 / (1.0 + std::exp(n - y));
        }
        throw ParseError("yesno reply lacks 'yes' or 'yes_logit'/'no_logit'", reply.dump());
    }

private:
    BackendConfig cfg_;
};

}  // namespace

std::shared_ptr<ProposerBackend> make_http_proposer(const BackendConfig& cfg) {
    return std::make_shared<HttpProposer>(cfg);
}
std::shared_ptr<GeneratorBackend> make_http_generator(const BackendConfig& cfg) {
    return std::make_shared<HttpGenerator>(cfg);
}
std::shared_ptr<AnswerModelBackend> make_http_answer_model(const BackendConfig& cfg) {
    return std::make_shared<HttpAnswerModel>(cfg);
}
std::shared_ptr<YesNoScorer> make_http_yes_no(const BackendConfig& cfg) {
    return std::make_shared<HttpYesNo>(cfg);
}

void register_http_backends(BackendRegistry& registry) {
    registry.register_proposer("http_proposer", make_http_proposer);
    registry.register_generator("http_generator", make_http_generator);
    registry.register_answer_model("http_answer", make_http_answer_model);
    registry.register_yes_no("http_yesno", make_http_yes_no);
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += kB64[v & 63];
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += kB64[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || std::isspace(static_cast<unsigned char>(c))) continue;
        int v = value_of(c);
        if (v < 0) throw ParseError("invalid base64 payload", text);
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace biasaudit
