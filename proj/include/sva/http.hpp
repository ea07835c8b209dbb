#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace sva {

struct HttpRequest {
    std::string method = "GET";
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::string content_type = "application/json";
    std::chrono::milliseconds timeout{30000};
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // keys lowercased

    std::string header(const std::string& lowercase_name) const {
        auto it = headers.find(lowercase_name);
        return it == headers.end() ? std::string{} : it->second;
    }
};

/// Every outbound call goes through one of these, so tests can substitute
/// recorded responses or a sentinel that fails on any use.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Returns any HTTP status; throws Error(NetworkError|Timeout) only when no
    /// response was received.
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport (http, and https when built with OpenSSL).
std::shared_ptr<HttpTransport> make_default_transport();

struct ParsedUrl {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_and_query;    // "/a/b?c=d", at least "/"
};

ParsedUrl split_url(const std::string& url);

/// Percent-encodes a query parameter value.
std::string url_encode(const std::string& value);

/// Joins base and suffix with exactly one '/' between them.
std::string join_url(const std::string& base, const std::string& suffix);

}  // namespace sva
