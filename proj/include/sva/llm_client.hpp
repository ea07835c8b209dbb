#pragma once

#include "sva/enrichment.hpp"
#include "sva/prompting.hpp"
#include "sva/severity.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>

namespace sva {

class HttpTransport;

struct LlmConfig {
    std::string base_url;
    std::string model_name;
    std::string api_key;
    double temperature = 0.0;
    int max_retries = 3;
    std::chrono::milliseconds timeout{120000};
    std::chrono::milliseconds backoff_base{1000};
    std::size_t max_in_flight = 4;

    /// SVA_LLM_BASE_URL, SVA_LLM_MODEL, SVA_LLM_API_KEY.
    static LlmConfig from_env();
    void validate() const;
};

struct Completion {
    std::string reply;
    std::optional<std::int64_t> input_tokens;
    std::optional<std::int64_t> output_tokens;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual Completion complete(const AssembledPrompt& prompt) = 0;
    /// Recorded in run manifests.
    virtual std::string id() const = 0;
};

/// Key used by scripted transcripts: sha256(system_text + "\n\n" + user_text).
std::string prompt_sha256(const AssembledPrompt& prompt);

/// OpenAI-compatible chat-completions body.
nlohmann::json build_chat_request(const AssembledPrompt& prompt, const LlmConfig& config);

/// Reads choices[0].message.content and usage.{prompt,completion}_tokens.
Completion parse_chat_response(std::string_view body);

/// POST {base_url}/chat/completions with bearer auth.
/// Retries 429, 5xx and transport failures with 1s * 2^attempt (+-20% jitter)
/// up to max_retries; 401/403 -> AuthFailed at once; other 4xx -> ProviderError.
class ChatCompletionClient final : public LlmBackend {
public:
    ChatCompletionClient(LlmConfig config, std::shared_ptr<HttpTransport> transport,
                         Sleeper sleeper = real_sleeper(), std::uint64_t jitter_seed = 0x5eed);

    Completion complete(const AssembledPrompt& prompt) override;
    std::string id() const override { return "chat:" + config_.model_name; }

    const LlmConfig& config() const noexcept { return config_; }

private:
    std::chrono::milliseconds backoff(int attempt);

    LlmConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    std::counting_semaphore<> in_flight_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
};

enum class MockPolicy { EchoMajorityDemoLabel, FixedLabel, Script };

/// Offline stand-in for a provider. Never touches the network.
class MockLlm final : public LlmBackend {
public:
    /// Modal label among the prompt's demonstrations; ties go to the higher
    /// severity. With no demonstrations the reply carries no label.
    static MockLlm echo_majority();
    static MockLlm fixed(Severity label);
    /// Transcript JSONL of {"prompt_sha256","reply"}.
    static MockLlm script(const std::filesystem::path& transcript);
    static MockLlm script(std::map<std::string, std::string> replies);

    Completion complete(const AssembledPrompt& prompt) override;
    std::string id() const override;

    MockPolicy policy() const noexcept { return policy_; }

private:
    explicit MockLlm(MockPolicy policy) : policy_(policy) {}

    MockPolicy policy_;
    Severity fixed_label_ = Severity::Low;
    std::map<std::string, std::string> script_;
};

/// The raw reply of `mock.complete(prompt)`; throws ScriptMiss for an unknown
/// prompt under the script policy.
std::string mock_complete(const AssembledPrompt& prompt, MockLlm& mock);

}  // namespace sva
