// Live HTTP provider speaking the chat-completion shape
// {model, messages:[{role, content}]} with bearer-token auth taken from an
// environment variable named in the config. Separated from gateway.hpp so
// only the CLI and the provider tests pay for the HTTP client include.
#pragma once

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "refevo/gateway.hpp"

namespace refevo {

namespace detail {

struct ParsedUrl {
    std::string host_port;  // scheme://host:port
    std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
    const size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw Error(ErrorCode::config_error, "endpoint must include scheme: " + url);
    const size_t path_start = url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

class HttpProvider : public Provider {
public:
    explicit HttpProvider(ProviderConfig config) : config_(std::move(config)) {
        validate_provider_config(config_);
        if (config_.kind != ProviderKind::http)
            throw Error(ErrorCode::config_error, "HttpProvider requires kind=http");
    }

    std::string complete(const CompletionRequest& req) override {
        const auto url = detail::parse_url(*config_.endpoint);
        const json body = {{"model", *config_.model_name},
                           {"messages", json::array({json{{"role", "user"},
                                                          {"content", req.prompt}}})},
                           {"max_tokens", req.max_output_tokens},
                           {"temperature", req.temperature_hint}};
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);

        std::string last_error;
        for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
            if (attempt > 1)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config_.retry.backoff_ms * (attempt - 1)));
            httplib::Client client(url.host_port);
            client.set_read_timeout(120, 0);
            auto res = client.Post(url.path, headers, body.dump(), "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error(ErrorCode::transport_error,
                            "status " + std::to_string(res->status) + ": " + res->body);
            return extract_assistant_text(res->body);
        }
        throw Error(ErrorCode::transport_error,
                    last_error + " after " + std::to_string(config_.retry.max_attempts) +
                        " attempt(s)");
    }

    static std::string extract_assistant_text(const std::string& body) {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded())
            throw Error(ErrorCode::malformed_provider_response, "response is not JSON");
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception&) {
            throw Error(ErrorCode::malformed_provider_response,
                        "missing choices[0].message.content");
        }
    }

private:
    ProviderConfig config_;
};

inline std::unique_ptr<Provider> make_provider(const ProviderConfig& config) {
    validate_provider_config(config);
    if (config.kind == ProviderKind::mock)
        return MockScriptProvider::from_file(*config.script_path);
    return std::make_unique<HttpProvider>(config);
}

}  // namespace refevo
