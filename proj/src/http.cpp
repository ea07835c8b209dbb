#include "sva/http.hpp"

#include "sva/error.hpp"

#include <httplib.h>

#include <cctype>
#include <iomanip>
#include <sstream>

namespace sva {

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorKind::ConfigError, "URL lacks a scheme: '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    if (path_start == std::string::npos) {
        parsed.scheme_host_port = url;
        parsed.path_and_query = "/";
    } else {
        parsed.scheme_host_port = url.substr(0, path_start);
        parsed.path_and_query = url.substr(path_start);
    }
    return parsed;
}

std::string url_encode(const std::string& value) {
    std::ostringstream out;
    out << std::hex << std::uppercase;
    for (unsigned char c : value) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out << static_cast<char>(c);
        } else {
            out << '%' << std::setw(2) << std::setfill('0') << static_cast<int>(c);
        }
    }
    return out.str();
}

std::string join_url(const std::string& base, const std::string& suffix) {
    std::string left = base;
    while (!left.empty() && left.back() == '/') left.pop_back();
    std::size_t skip = 0;
    while (skip < suffix.size() && suffix[skip] == '/') ++skip;
    return left + "/" + suffix.substr(skip);
}

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse send(const HttpRequest& request) override {
        const ParsedUrl url = split_url(request.url);
        httplib::Client client(url.scheme_host_port);
        const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
        const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
            request.timeout - seconds);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        client.set_follow_location(true);

        httplib::Headers headers;
        for (const auto& [name, value] : request.headers) headers.emplace(name, value);

        httplib::Result result = [&] {
            if (request.method == "POST") {
                return client.Post(url.path_and_query, headers, request.body,
                                   request.content_type);
            }
            return client.Get(url.path_and_query, headers);
        }();

        if (!result) {
            const auto err = result.error();
            const std::string what = httplib::to_string(err);
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                throw Error(ErrorKind::Timeout, request.url + ": " + what);
            }
            throw Error(ErrorKind::NetworkError, request.url + ": " + what);
        }

        HttpResponse response;
        response.status = result->status;
        response.body = result->body;
        for (const auto& [name, value] : result->headers) {
            std::string key;
            for (char c : name) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            response.headers[key] = value;
        }
        return response;
    }
};

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() {
    return std::make_shared<HttplibTransport>();
}

}  // namespace sva
