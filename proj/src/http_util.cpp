#include "mnemos/http_util.hpp"

#include "mnemos/types.hpp"

#include <httplib.h>

namespace mnemos::http {

Url split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidArgument("url without scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

PostResult post_json(const std::string& url, const std::string& body,
                     std::chrono::milliseconds timeout, const std::string& bearer_token) {
    auto target = split_url(url);
    httplib::Client client(target.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    if (!bearer_token.empty()) client.set_bearer_token_auth(bearer_token);

    auto started = std::chrono::steady_clock::now();
    auto res = client.Post(target.path, body, "application/json");
    if (!res) {
        auto err = res.error();
        bool expired = std::chrono::steady_clock::now() - started >= timeout;
        // httplib reports an expired read timeout as a plain read error
        if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && expired)) {
            throw TimeoutError("request to " + url + " failed: " + httplib::to_string(err));
        }
        throw TransportError("request to " + url + " failed: " + httplib::to_string(err));
    }
    return {res->status, res->body};
}

} // namespace mnemos::http
