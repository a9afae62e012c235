#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace icrl {

struct HttpResponse {
  // 0 means the request never reached the server; body then holds the
  // transport error text.
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Minimal POST-a-JSON-document seam so the remote policy backend can be
// exercised against canned responses in tests.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                 const HttpHeaders& headers) = 0;
};

// cpp-httplib client bound to one base URL (scheme://host[:port]).
class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, int timeout_seconds);
  HttpResponse post_json(const std::string& path, const std::string& body,
                         const HttpHeaders& headers) override;

 private:
  std::string base_url_;
  int timeout_seconds_;
};

std::shared_ptr<HttpTransport> make_httplib_transport(const std::string& base_url,
                                                      int timeout_seconds);

}  // namespace icrl
