#include "icrl/http.hpp"

// httplib pulls in a lot; keep it out of the public headers.
#include <httplib.h>

namespace icrl {

HttplibTransport::HttplibTransport(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {}

HttpResponse HttplibTransport::post_json(const std::string& path,
                                         const std::string& body,
                                         const HttpHeaders& headers) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);

  httplib::Headers hdrs;
  for (const auto& [key, value] : headers) hdrs.emplace(key, value);

  httplib::Result res = client.Post(path, hdrs, body, "application/json");
  if (!res) {
    return HttpResponse{0, "transport: " + httplib::to_string(res.error())};
  }
  return HttpResponse{res->status, res->body};
}

std::shared_ptr<HttpTransport> make_httplib_transport(const std::string& base_url,
                                                      int timeout_seconds) {
  return std::make_shared<HttplibTransport>(base_url, timeout_seconds);
}

}  // namespace icrl
