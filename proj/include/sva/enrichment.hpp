#pragma once

#include "sva/knowledge_base.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sva {

class HttpTransport;

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// Token bucket with capacity 1: successive acquire() calls are spaced at
/// least `interval` apart. Thread-safe.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds interval);
    void acquire();
    std::chrono::milliseconds interval() const noexcept { return interval_; }

private:
    std::chrono::milliseconds interval_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
};

struct NvdClientConfig {
    static constexpr const char* kPublicBaseUrl = "https://services.nvd.nist.gov/rest/json/cves/2.0";

    std::string base_url;
    std::optional<std::string> api_key;
    std::chrono::milliseconds min_interval{1200};
    int max_retries = 3;
    std::chrono::milliseconds retry_base{2000};
};

/// NVD_INFO plus the weakness ids NVD links to the CVE; the ids drive the
/// CWE lookup and are not stored in the knowledge entry.
struct NvdLookup {
    NvdInfo info;
    std::vector<std::string> cwe_ids;
};

/// Parses an NVD CVE API 2.0 payload. Prefers cvssMetricV31 over V30 and the
/// "Primary" source within a version. nullopt when the payload lists no CVE.
/// Throws ParseError with a payload excerpt on malformed JSON.
std::optional<NvdLookup> parse_nvd_response(std::string_view body);

class NvdClient {
public:
    NvdClient(NvdClientConfig config, std::shared_ptr<HttpTransport> transport,
              Sleeper sleeper = real_sleeper());

    /// nullopt when NVD has no such CVE (HTTP 404 or an empty result set).
    /// Throws NetworkError, RateLimited (after honoring Retry-After for
    /// max_retries attempts) or ParseError.
    std::optional<NvdLookup> fetch(const std::string& cve_id);

    std::size_t request_count() const noexcept { return requests_; }

private:
    NvdClientConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    RateLimiter limiter_;
    std::atomic<std::size_t> requests_{0};
};

struct CweClientConfig {
    static constexpr const char* kPublicBaseUrl = "https://cwe-api.mitre.org/api/v1";

    std::string base_url;
    std::chrono::milliseconds min_interval{0};
};

/// Parses a CWE REST API weakness payload ({"Weaknesses":[{...}]}).
/// Throws UnknownCwe when the list is empty, ParseError on malformed JSON.
CweInfo parse_cwe_response(std::string_view body, const std::string& cwe_id);

/// Fetches `{base}/cwe/weakness/{number}`; results are cached per id.
class CweClient {
public:
    CweClient(CweClientConfig config, std::shared_ptr<HttpTransport> transport);

    CweInfo fetch(const std::string& cwe_id);

    std::size_t request_count() const noexcept { return requests_; }

private:
    CweClientConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    RateLimiter limiter_;
    std::mutex cache_mutex_;
    std::map<std::string, CweInfo> cache_;
    std::atomic<std::size_t> requests_{0};
};

/// nullopt is the absent-info marker (CVE unknown to NVD), distinct from errors.
std::optional<NvdInfo> enrich_with_nvd(const VulnerabilityRecord& record, NvdClient& client);
CweInfo enrich_with_cwe(const std::string& cwe_id, CweClient& client);

struct EnrichReport {
    std::size_t nvd_found = 0;
    std::size_t nvd_absent = 0;
    std::size_t cwe_found = 0;
    std::vector<std::string> failures;  // "CVE-...: reason"
};

/// Fills nvd/cwe for each entry from the first valid CWE id NVD links to it.
/// Per-entry failures are collected in the report and leave the entry as is.
EnrichReport enrich_entries(std::vector<KnowledgeEntry>& entries, NvdClient& nvd, CweClient& cwe);

}  // namespace sva
