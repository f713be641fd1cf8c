#pragma once

#include <chrono>
#include <string>

namespace hypermem {

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Endpoint settings shared by the OpenAI-compatible chat and embedding clients.
struct HttpEndpoint {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;   // sent as a bearer token when non-empty
    std::chrono::seconds timeout{120};
};

/// POSTs a JSON body to base_url + path. Transport failures raise ProviderError;
/// HTTP error statuses are returned to the caller.
HttpResponse post_json(const HttpEndpoint& endpoint, const std::string& path, const std::string& body);

/// True for statuses worth retrying (429 and 5xx).
bool is_retryable_status(int status);

}  // namespace hypermem
