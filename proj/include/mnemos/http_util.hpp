#pragma once

#include <chrono>
#include <string>

namespace mnemos::http {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;   // always starts with '/'
};

// Splits "http://host:port/some/path" into origin and path.
Url split_url(const std::string& url);

struct PostResult {
    int status = 0;
    std::string body;
};

// POSTs a JSON body. Throws TransportError / TimeoutError on network failure;
// the caller decides what a non-2xx status means.
PostResult post_json(const std::string& url, const std::string& body,
                     std::chrono::milliseconds timeout, const std::string& bearer_token = {});

} // namespace mnemos::http
