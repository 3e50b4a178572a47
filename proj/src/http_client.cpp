#include "llmhg/errors.hpp"
#include "llmhg/llm_profile.hpp"

// httplib drags in OpenSSL headers whose macros clash with Eigen internals, so
// it must come after every Eigen-dependent header
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include <json.hpp>

namespace llmhg {

HttpChatClient::HttpChatClient(std::string base_url, std::string api_key, int timeout_seconds)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
    if (base_url_.empty()) throw InvalidConfig("empty API base URL");
}

std::unique_ptr<HttpChatClient> HttpChatClient::from_env() {
    const char* base = std::getenv("LLMHG_API_BASE");
    const char* key = std::getenv("LLMHG_API_KEY");
    if (!base || !*base) throw InvalidConfig("LLMHG_API_BASE not set (required for live mode)");
    return std::make_unique<HttpChatClient>(base, key ? key : "");
}

LlmResponse HttpChatClient::complete(const PromptRequest& request) {
    live_request_count().fetch_add(1);

    nlohmann::json body{
        {"model", request.model_id},
        {"messages", nlohmann::json::array({nlohmann::json{
                         {"role", "user"}, {"content", request.rendered_text}}})},
        {"temperature", 0.0}};

    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto result = client.Post("/chat/completions", headers, body.dump(), "application/json");
    if (!result) throw IoError("LLM request failed: " + httplib::to_string(result.error()));
    if (result->status != 200)
        throw IoError("LLM request returned HTTP " + std::to_string(result->status) + ": " +
                      result->body);

    try {
        auto j = nlohmann::json::parse(result->body);
        LlmResponse response;
        response.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            response.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
            response.usage.completion_tokens =
                j["usage"].value("completion_tokens", std::int64_t{0});
        }
        return response;
    } catch (const std::exception& e) {
        throw LlmParseError(std::string("malformed chat-completion response: ") + e.what());
    }
}

}  // namespace llmhg
