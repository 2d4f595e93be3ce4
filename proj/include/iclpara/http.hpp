#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

namespace iclpara::http {

struct Url {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // without trailing slash, may be empty
};

Url parse_url(std::string_view url);

struct Response {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::string transport_error;
};

// Blocking JSON POST. Never throws for HTTP-level failures; inspect `status`.
Response post_json(std::string_view url, const std::string& body,
                   const std::map<std::string, std::string>& headers,
                   std::chrono::milliseconds timeout);

bool is_transient(const Response& r);
std::string excerpt(std::string_view body, std::size_t max_chars = 200);

// Counting gate bounding in-flight requests.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t limit);
  void acquire();
  void release();
  void set_limit(std::size_t limit);
  std::size_t limit() const;
  std::size_t in_flight() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t in_flight_ = 0;
};

class LimiterSlot {
 public:
  explicit LimiterSlot(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
  ~LimiterSlot() { limiter_.release(); }
  LimiterSlot(const LimiterSlot&) = delete;
  LimiterSlot& operator=(const LimiterSlot&) = delete;

 private:
  ConcurrencyLimiter& limiter_;
};

// Process-wide limiter per key (normally the endpoint). The most recent
// non-zero limit wins.
ConcurrencyLimiter& shared_limiter(const std::string& key, std::size_t limit);

}  // namespace iclpara::http
