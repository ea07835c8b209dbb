#include "sva/enrichment.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <chrono>

using namespace sva;
using namespace std::chrono_literals;
using sva::test::FakeTransport;
using sva::test::fixture;
using sva::test::read_file;

namespace {

NvdClientConfig nvd_config() {
    NvdClientConfig c;
    c.base_url = "http://nvd.test/rest/json/cves/2.0";
    c.min_interval = 0ms;
    c.max_retries = 2;
    c.retry_base = 10ms;
    return c;
}

std::shared_ptr<FakeTransport> fixture_server() {
    return std::make_shared<FakeTransport>([](const HttpRequest& r) {
        if (r.url.find("cveId=CVE-2023-38545") != std::string::npos) {
            return HttpResponse{200, read_file(fixture("nvd_CVE-2023-38545.json")), {}};
        }
        if (r.url.find("cveId=CVE-1999-0001") != std::string::npos) {
            return HttpResponse{200, read_file(fixture("nvd_empty.json")), {}};
        }
        if (r.url == "http://cwe.test/api/v1/cwe/weakness/787") {
            return HttpResponse{200, read_file(fixture("cwe_787.json")), {}};
        }
        return HttpResponse{404, "not found", {}};
    });
}

}  // namespace

TEST_CASE("NVD fixture replay") {
    auto transport = fixture_server();
    NvdClient client(nvd_config(), transport);
    const auto rec = sva::test::record("CVE-2023-38545", "x", "SOCKS5 heap overflow", Severity::Critical);
    const auto info = enrich_with_nvd(rec, client);
    REQUIRE(info.has_value());
    CHECK(info->base_score == doctest::Approx(9.8));
    CHECK(info->cvss_version == "3.1");
    CHECK(info->vector_string == "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H");
    CHECK(info->impact_score == doctest::Approx(5.9));
    CHECK(info->exploitability_score == doctest::Approx(3.9));
    CHECK(info->affected_cpes == std::vector<std::string>{"cpe:2.3:a:haxx:libcurl:*:*:*:*:*:*:*:*",
                                                          "cpe:2.3:a:haxx:curl:*:*:*:*:*:*:*:*"});
    CHECK(severity_from_score(info->base_score) == Severity::Critical);

    const auto lookup = client.fetch("CVE-2023-38545");
    REQUIRE(lookup.has_value());
    CHECK(lookup->cwe_ids == std::vector<std::string>{"CWE-787"});
}

TEST_CASE("NVD absent CVE") {
    auto transport = fixture_server();
    NvdClient client(nvd_config(), transport);
    CHECK_FALSE(enrich_with_nvd(sva::test::record("CVE-2000-0404", "", "d", Severity::Low), client));
    CHECK_FALSE(enrich_with_nvd(sva::test::record("CVE-1999-0001", "", "d", Severity::Low), client));
}

TEST_CASE("NVD malformed payload") {
    auto transport = std::make_shared<FakeTransport>();
    transport->push(200, "{\"vulnerabilities\": [ {\"cve\": ");
    NvdClient client(nvd_config(), transport);
    try {
        client.fetch("CVE-2023-38545");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
    CHECK_THROWS_AS(parse_nvd_response("[1,2"), Error);
}

TEST_CASE("NVD retries rate limits honoring Retry-After") {
    auto transport = std::make_shared<FakeTransport>();
    transport->push(429, "", {{"retry-after", "3"}});
    transport->push(503, "");
    transport->push(200, read_file(fixture("nvd_CVE-2023-38545.json")));
    std::vector<std::chrono::milliseconds> sleeps;
    NvdClient client(nvd_config(), transport, [&](auto d) { sleeps.push_back(d); });
    CHECK(client.fetch("CVE-2023-38545").has_value());
    CHECK(client.request_count() == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[0] == 3000ms);
    CHECK(sleeps[1] == 20ms);
}

TEST_CASE("NVD gives up after max_retries") {
    auto transport = std::make_shared<FakeTransport>();
    for (int i = 0; i < 3; ++i) transport->push(429, "");
    NvdClient client(nvd_config(), transport, [](auto) {});
    try {
        client.fetch("CVE-2023-38545");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RateLimited);
    }
    CHECK(transport->requests.size() == 3);

    auto down = std::make_shared<FakeTransport>();
    for (int i = 0; i < 3; ++i) down->push_network_error();
    NvdClient offline(nvd_config(), down, [](auto) {});
    try {
        offline.fetch("CVE-2023-38545");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NetworkError);
    }
}

TEST_CASE("NVD request carries the id and api key") {
    auto transport = fixture_server();
    auto config = nvd_config();
    config.api_key = "k-123";
    NvdClient client(config, transport);
    client.fetch("CVE-2023-38545");
    REQUIRE(transport->requests.size() == 1);
    CHECK(transport->requests[0].url == "http://nvd.test/rest/json/cves/2.0?cveId=CVE-2023-38545");
    CHECK(transport->requests[0].headers.at(0) == std::pair<std::string, std::string>{"apiKey", "k-123"});
}

TEST_CASE("CWE fixture replay and cache") {
    auto transport = fixture_server();
    CweClient client(CweClientConfig{"http://cwe.test/api/v1", 0ms}, transport);
    const auto info = enrich_with_cwe("CWE-787", client);
    CHECK(info.cwe_id == "CWE-787");
    CHECK(info.name == "Out-of-bounds Write");
    CHECK(info.description == "The product writes data past the end, or before the beginning, of the intended buffer.");
    REQUIRE(info.common_consequences.size() == 1);
    CHECK(info.common_consequences[0] ==
          "Integrity, Availability: Modify Memory, DoS: Crash, Exit, or Restart, Execute Unauthorized Code or Commands");
    CHECK(client.request_count() == 1);

    const auto again = enrich_with_cwe("CWE-787", client);
    CHECK(again == info);
    CHECK(client.request_count() == 1);
}

TEST_CASE("unknown CWE") {
    auto transport = fixture_server();
    CweClient client(CweClientConfig{"http://cwe.test/api/v1", 0ms}, transport);
    try {
        enrich_with_cwe("CWE-0", client);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownCwe);
    }
    try {
        parse_cwe_response("{\"Weaknesses\":[]}", "CWE-5");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownCwe);
    }
}

TEST_CASE("enrich_entries fills both sections and counts absences") {
    auto transport = fixture_server();
    NvdClient nvd(nvd_config(), transport);
    CweClient cwe(CweClientConfig{"http://cwe.test/api/v1", 0ms}, transport);
    std::vector<KnowledgeEntry> entries{
        normalize_entry(sva::test::record("CVE-2023-38545", "x", "overflow", Severity::Critical)),
        normalize_entry(sva::test::record("CVE-2000-0404", "x", "unknown", Severity::Low)),
    };
    const auto report = enrich_entries(entries, nvd, cwe);
    CHECK(report.nvd_found == 1);
    CHECK(report.nvd_absent == 1);
    CHECK(report.cwe_found == 1);
    CHECK(report.failures.empty());
    REQUIRE(entries[0].cwe.has_value());
    CHECK(entries[0].cwe->name == "Out-of-bounds Write");
    CHECK_FALSE(entries[1].nvd.has_value());
}

TEST_CASE("rate limiter spacing") {
    RateLimiter limiter(20ms);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 4; ++i) limiter.acquire();
    CHECK(std::chrono::steady_clock::now() - start >= 60ms);
}
