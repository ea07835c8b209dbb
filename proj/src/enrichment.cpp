#include "sva/enrichment.hpp"

#include "sva/error.hpp"
#include "sva/http.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <thread>

namespace sva {

using nlohmann::json;

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RateLimiter::RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}

void RateLimiter::acquire() {
    if (interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_slot_);
        next_slot_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

namespace {

std::string excerpt(std::string_view body) {
    constexpr std::size_t kMax = 160;
    return std::string(body.substr(0, kMax)) + (body.size() > kMax ? "..." : "");
}

std::chrono::milliseconds retry_after(const HttpResponse& response,
                                      std::chrono::milliseconds fallback) {
    const std::string value = response.header("retry-after");
    if (value.empty()) return fallback;
    try {
        return std::chrono::seconds(std::stol(value));
    } catch (const std::exception&) {
        return fallback;  // HTTP-date form is not worth parsing here
    }
}

std::string cwe_number(const std::string& cwe_id) { return cwe_id.substr(4); }

}  // namespace

// --- NVD ---

std::optional<NvdLookup> parse_nvd_response(std::string_view body) {
    json payload;
    try {
        payload = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string(e.what()) + " in '" + excerpt(body) + "'");
    }
    try {
        const auto vulns = payload.value("vulnerabilities", json::array());
        if (vulns.empty()) return std::nullopt;
        const json& cve = vulns.at(0).at("cve");

        NvdLookup lookup;
        const json metrics = cve.value("metrics", json::object());
        for (const char* key : {"cvssMetricV31", "cvssMetricV30"}) {
            const json list = metrics.value(key, json::array());
            if (list.empty()) continue;
            auto chosen = std::find_if(list.begin(), list.end(), [](const json& m) {
                return m.value("type", "") == "Primary";
            });
            const json& metric = chosen != list.end() ? *chosen : list.front();
            const json& data = metric.at("cvssData");
            lookup.info.cvss_version = data.at("version").get<std::string>();
            lookup.info.vector_string = data.at("vectorString").get<std::string>();
            lookup.info.base_score = data.at("baseScore").get<double>();
            lookup.info.impact_score = metric.value("impactScore", 0.0);
            lookup.info.exploitability_score = metric.value("exploitabilityScore", 0.0);
            break;
        }

        for (const auto& config : cve.value("configurations", json::array())) {
            for (const auto& node : config.value("nodes", json::array())) {
                for (const auto& match : node.value("cpeMatch", json::array())) {
                    if (!match.value("vulnerable", false)) continue;
                    auto cpe = match.at("criteria").get<std::string>();
                    auto& cpes = lookup.info.affected_cpes;
                    if (std::find(cpes.begin(), cpes.end(), cpe) == cpes.end()) {
                        cpes.push_back(std::move(cpe));
                    }
                }
            }
        }

        for (const auto& weakness : cve.value("weaknesses", json::array())) {
            for (const auto& d : weakness.value("description", json::array())) {
                auto id = d.value("value", "");
                if (is_valid_cwe_id(id) &&
                    std::find(lookup.cwe_ids.begin(), lookup.cwe_ids.end(), id) ==
                        lookup.cwe_ids.end()) {
                    lookup.cwe_ids.push_back(std::move(id));
                }
            }
        }
        return lookup;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string(e.what()) + " in '" + excerpt(body) + "'");
    }
}

NvdClient::NvdClient(NvdClientConfig config, std::shared_ptr<HttpTransport> transport,
                     Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      limiter_(config_.min_interval) {
    if (config_.base_url.empty()) {
        throw Error(ErrorKind::ConfigError, "NVD base URL is not configured");
    }
}

std::optional<NvdLookup> NvdClient::fetch(const std::string& cve_id) {
    if (!is_valid_cve_id(cve_id)) {
        throw Error(ErrorKind::InvalidArgument, "invalid CVE id '" + cve_id + "'");
    }
    HttpRequest request;
    request.url = config_.base_url + (config_.base_url.find('?') == std::string::npos ? "?" : "&") +
                  "cveId=" + url_encode(cve_id);
    if (config_.api_key) request.headers.emplace_back("apiKey", *config_.api_key);

    for (int attempt = 0;; ++attempt) {
        const bool last = attempt >= config_.max_retries;
        limiter_.acquire();
        ++requests_;
        HttpResponse response;
        try {
            response = transport_->send(request);
        } catch (const Error& e) {
            if (last) throw Error(ErrorKind::NetworkError, cve_id + ": " + e.what());
            sleeper_(config_.retry_base * (1 << attempt));
            continue;
        }
        if (response.status == 200) return parse_nvd_response(response.body);
        if (response.status == 404) return std::nullopt;
        // NVD answers 403 as well as 429 when a client exceeds its request window.
        if (response.status == 429 || response.status == 403) {
            if (last) {
                throw Error(ErrorKind::RateLimited,
                            cve_id + ": HTTP " + std::to_string(response.status));
            }
            sleeper_(retry_after(response, config_.retry_base * (1 << attempt)));
            continue;
        }
        if (response.status >= 500 && !last) {
            sleeper_(config_.retry_base * (1 << attempt));
            continue;
        }
        throw Error(ErrorKind::NetworkError, cve_id + ": HTTP " + std::to_string(response.status) +
                                                 " " + excerpt(response.body));
    }
}

std::optional<NvdInfo> enrich_with_nvd(const VulnerabilityRecord& record, NvdClient& client) {
    auto lookup = client.fetch(record.cve_id);
    if (!lookup) return std::nullopt;
    return std::move(lookup->info);
}

// --- CWE ---

CweInfo parse_cwe_response(std::string_view body, const std::string& cwe_id) {
    json payload;
    try {
        payload = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string(e.what()) + " in '" + excerpt(body) + "'");
    }
    try {
        const auto weaknesses = payload.value("Weaknesses", json::array());
        if (weaknesses.empty()) throw Error(ErrorKind::UnknownCwe, cwe_id);
        const json& w = weaknesses.at(0);

        CweInfo info;
        info.cwe_id = "CWE-" + (w.contains("ID") ? w.at("ID").get<std::string>() : cwe_number(cwe_id));
        info.name = w.at("Name").get<std::string>();
        info.description = w.value("Description", "");
        info.extended_description = w.value("ExtendedDescription", "");
        for (const auto& c : w.value("CommonConsequences", json::array())) {
            std::string line;
            for (const auto& scope : c.value("Scope", json::array())) {
                line += (line.empty() ? "" : ", ") + scope.get<std::string>();
            }
            std::string impacts;
            for (const auto& impact : c.value("Impact", json::array())) {
                impacts += (impacts.empty() ? "" : ", ") + impact.get<std::string>();
            }
            if (!impacts.empty()) line += (line.empty() ? "" : ": ") + impacts;
            if (!line.empty()) info.common_consequences.push_back(std::move(line));
        }
        return info;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string(e.what()) + " in '" + excerpt(body) + "'");
    }
}

CweClient::CweClient(CweClientConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), limiter_(config_.min_interval) {
    if (config_.base_url.empty()) {
        throw Error(ErrorKind::ConfigError, "CWE base URL is not configured");
    }
}

CweInfo CweClient::fetch(const std::string& cwe_id) {
    if (!is_valid_cwe_id(cwe_id)) {
        throw Error(ErrorKind::InvalidArgument, "invalid CWE id '" + cwe_id + "'");
    }
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(cwe_id); it != cache_.end()) return it->second;
    }
    HttpRequest request;
    request.url = join_url(config_.base_url, "cwe/weakness/" + cwe_number(cwe_id));
    limiter_.acquire();
    HttpResponse response;
    try {
        ++requests_;
        response = transport_->send(request);
    } catch (const Error& e) {
        throw Error(ErrorKind::NetworkError, cwe_id + ": " + e.what());
    }
    if (response.status == 404) throw Error(ErrorKind::UnknownCwe, cwe_id);
    if (response.status != 200) {
        throw Error(ErrorKind::NetworkError,
                    cwe_id + ": HTTP " + std::to_string(response.status) + " " + excerpt(response.body));
    }
    CweInfo info = parse_cwe_response(response.body, cwe_id);
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(cwe_id, std::move(info)).first->second;
}

CweInfo enrich_with_cwe(const std::string& cwe_id, CweClient& client) { return client.fetch(cwe_id); }

EnrichReport enrich_entries(std::vector<KnowledgeEntry>& entries, NvdClient& nvd, CweClient& cwe) {
    EnrichReport report;
    for (auto& entry : entries) {
        const std::string& id = entry.record.cve_id;
        try {
            auto lookup = nvd.fetch(id);
            if (!lookup) {
                ++report.nvd_absent;
                continue;
            }
            ++report.nvd_found;
            entry.nvd = std::move(lookup->info);
            for (const auto& cwe_id : lookup->cwe_ids) {
                try {
                    entry.cwe = cwe.fetch(cwe_id);
                    ++report.cwe_found;
                    break;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::UnknownCwe) throw;
                    report.failures.push_back(id + ": " + e.what());
                }
            }
        } catch (const Error& e) {
            report.failures.push_back(id + ": " + e.what());
        }
    }
    return report;
}

}  // namespace sva
