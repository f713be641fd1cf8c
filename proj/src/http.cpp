#include "hypermem/http.hpp"

#include "hypermem/error.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace hypermem {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base URL '" + url + "' has no scheme");
    }
    const auto path_begin = url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_begin == std::string::npos) {
        out.origin = url;
    } else {
        out.origin = url.substr(0, path_begin);
        out.prefix = url.substr(path_begin);
    }
    while (!out.prefix.empty() && out.prefix.back() == '/') {
        out.prefix.pop_back();
    }
    return out;
}

}  // namespace

HttpResponse post_json(const HttpEndpoint& endpoint, const std::string& path, const std::string& body) {
    const auto url = split_url(endpoint.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + endpoint.api_key);
    }
    auto res = client.Post(url.prefix + path, headers, body, "application/json");
    if (!res) {
        throw ProviderError("HTTP POST " + endpoint.base_url + path + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
}

bool is_retryable_status(int status) {
    return status == 429 || (status >= 500 && status <= 599);
}

}  // namespace hypermem
