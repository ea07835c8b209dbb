#include "sva/llm_client.hpp"

#include "sva/error.hpp"
#include "sva/hashing.hpp"
#include "sva/http.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sva {

using nlohmann::json;

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string{};
}

std::string excerpt(std::string_view body) {
    constexpr std::size_t kMax = 200;
    return std::string(body.substr(0, kMax)) + (body.size() > kMax ? "..." : "");
}

std::string severity_line(Severity s) { return "SEVERITY: " + std::string(to_string(s)); }

}  // namespace

LlmConfig LlmConfig::from_env() {
    LlmConfig config;
    config.base_url = env_or_empty("SVA_LLM_BASE_URL");
    config.model_name = env_or_empty("SVA_LLM_MODEL");
    config.api_key = env_or_empty("SVA_LLM_API_KEY");
    return config;
}

void LlmConfig::validate() const {
    if (base_url.empty()) throw Error(ErrorKind::ConfigError, "LLM base URL is not set");
    if (model_name.empty()) throw Error(ErrorKind::ConfigError, "LLM model name is not set");
    if (max_retries < 0) throw Error(ErrorKind::ConfigError, "max_retries must be >= 0");
    if (max_in_flight < 1) throw Error(ErrorKind::ConfigError, "max_in_flight must be >= 1");
}

std::string prompt_sha256(const AssembledPrompt& prompt) {
    return sha256_hex(prompt.system_text + "\n\n" + prompt.user_text);
}

json build_chat_request(const AssembledPrompt& prompt, const LlmConfig& config) {
    return json{{"model", config.model_name},
                {"temperature", config.temperature},
                {"messages", json::array({json{{"role", "system"}, {"content", prompt.system_text}},
                                          json{{"role", "user"}, {"content", prompt.user_text}}})}};
}

Completion parse_chat_response(std::string_view body) {
    try {
        const json payload = json::parse(body);
        Completion c;
        c.reply = payload.at("choices").at(0).at("message").at("content").get<std::string>();
        if (payload.contains("usage") && payload["usage"].is_object()) {
            const auto& usage = payload["usage"];
            if (usage.contains("prompt_tokens")) c.input_tokens = usage["prompt_tokens"].get<std::int64_t>();
            if (usage.contains("completion_tokens")) {
                c.output_tokens = usage["completion_tokens"].get<std::int64_t>();
            }
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ProviderError,
                    std::string("unreadable completion: ") + e.what() + " in '" + excerpt(body) + "'");
    }
}

// --- HTTP client ---

ChatCompletionClient::ChatCompletionClient(LlmConfig config, std::shared_ptr<HttpTransport> transport,
                                           Sleeper sleeper, std::uint64_t jitter_seed)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(static_cast<std::ptrdiff_t>(config_.max_in_flight)),
      rng_(jitter_seed) {
    config_.validate();
}

std::chrono::milliseconds ChatCompletionClient::backoff(int attempt) {
    double jitter = 1.0;
    {
        std::lock_guard lock(rng_mutex_);
        jitter = std::uniform_real_distribution<double>(0.8, 1.2)(rng_);
    }
    const double ms = static_cast<double>(config_.backoff_base.count()) *
                      static_cast<double>(1LL << attempt) * jitter;
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

Completion ChatCompletionClient::complete(const AssembledPrompt& prompt) {
    HttpRequest request;
    request.method = "POST";
    request.url = join_url(config_.base_url, "chat/completions");
    request.body = build_chat_request(prompt, config_).dump();
    request.timeout = config_.timeout;
    if (!config_.api_key.empty()) {
        request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    }

    struct SlotGuard {
        std::counting_semaphore<>& sem;
        explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
        ~SlotGuard() { sem.release(); }
    };

    for (int attempt = 0;; ++attempt) {
        const bool last = attempt >= config_.max_retries;
        HttpResponse response;
        try {
            SlotGuard slot(in_flight_);
            response = transport_->send(request);
        } catch (const Error& e) {
            if (last || !e.retryable()) throw;
            sleeper_(backoff(attempt));
            continue;
        }
        const int status = response.status;
        if (status >= 200 && status < 300) return parse_chat_response(response.body);
        if (status == 401 || status == 403) {
            throw Error(ErrorKind::AuthFailed, "HTTP " + std::to_string(status) + " " + excerpt(response.body));
        }
        if (status == 429) {
            if (last) throw Error(ErrorKind::RateLimited, "HTTP 429 after " + std::to_string(attempt + 1) + " attempts");
            sleeper_(backoff(attempt));
            continue;
        }
        if (status >= 500 && !last) {
            sleeper_(backoff(attempt));
            continue;
        }
        throw Error(ErrorKind::ProviderError, "HTTP " + std::to_string(status) + " " + excerpt(response.body));
    }
}

// --- Mock ---

MockLlm MockLlm::echo_majority() { return MockLlm(MockPolicy::EchoMajorityDemoLabel); }

MockLlm MockLlm::fixed(Severity label) {
    MockLlm m(MockPolicy::FixedLabel);
    m.fixed_label_ = label;
    return m;
}

MockLlm MockLlm::script(std::map<std::string, std::string> replies) {
    MockLlm m(MockPolicy::Script);
    m.script_ = std::move(replies);
    return m;
}

MockLlm MockLlm::script(const std::filesystem::path& transcript) {
    std::ifstream in(transcript);
    if (!in) throw Error(ErrorKind::FileNotFound, transcript.string());
    std::map<std::string, std::string> replies;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            replies[j.at("prompt_sha256").get<std::string>()] = j.at("reply").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError,
                        transcript.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return script(std::move(replies));
}

std::string MockLlm::id() const {
    switch (policy_) {
    case MockPolicy::EchoMajorityDemoLabel: return "mock:echo-majority";
    case MockPolicy::FixedLabel: return "mock:fixed-" + std::string(to_string(fixed_label_));
    case MockPolicy::Script: return "mock:script";
    }
    return "mock";
}

Completion MockLlm::complete(const AssembledPrompt& prompt) {
    Completion c;
    switch (policy_) {
    case MockPolicy::FixedLabel:
        c.reply = severity_line(fixed_label_);
        break;
    case MockPolicy::Script: {
        const auto key = prompt_sha256(prompt);
        auto it = script_.find(key);
        if (it == script_.end()) throw Error(ErrorKind::ScriptMiss, "no transcript reply for prompt " + key);
        c.reply = it->second;
        break;
    }
    case MockPolicy::EchoMajorityDemoLabel: {
        std::array<std::size_t, kSeverityCount> votes{};
        std::size_t total = 0;
        std::istringstream lines(prompt.user_text);
        std::string line;
        while (std::getline(lines, line)) {
            if (!line.starts_with(kDemoLabelPrefix)) continue;
            if (auto s = severity_from_label(std::string_view(line).substr(kDemoLabelPrefix.size()))) {
                ++votes[index_of(*s)];
                ++total;
            }
        }
        if (total == 0) {
            c.reply = "No demonstrations to compare against; unable to decide.";
            break;
        }
        Severity best = Severity::Low;
        for (Severity s : kAllSeverities) {
            if (votes[index_of(s)] >= votes[index_of(best)]) best = s;  // >= : ties go up
        }
        c.reply = "Majority of retrieved demonstrations.\n" + severity_line(best);
        break;
    }
    }
    return c;
}

std::string mock_complete(const AssembledPrompt& prompt, MockLlm& mock) { return mock.complete(prompt).reply; }

}  // namespace sva
