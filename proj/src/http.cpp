#include "iclpara/http.hpp"

#include <memory>

#include "httplib.h"
#include "iclpara/error.hpp"

namespace iclpara::http {

Url parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw InputError("endpoint URL needs a scheme: '" + std::string(url) + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  if (path_start == std::string_view::npos) {
    out.origin = std::string(url);
  } else {
    out.origin = std::string(url.substr(0, path_start));
    out.base_path = std::string(url.substr(path_start));
    while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  }
  return out;
}

Response post_json(std::string_view url, const std::string& body,
                   const std::map<std::string, std::string>& headers,
                   std::chrono::milliseconds timeout) {
  const auto parsed = parse_url(url);
  httplib::Client client(parsed.origin);
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  const std::string path = parsed.base_path.empty() ? "/" : parsed.base_path;
  auto res = client.Post(path, h, body, "application/json");

  Response out;
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

bool is_transient(const Response& r) {
  return r.status == 0 || r.status == 429 || r.status >= 500;
}

std::string excerpt(std::string_view body, std::size_t max_chars) {
  if (body.size() <= max_chars) return std::string(body);
  return std::string(body.substr(0, max_chars)) + "...";
}

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

void ConcurrencyLimiter::set_limit(std::size_t limit) {
  if (limit == 0) return;
  {
    std::lock_guard lock(mu_);
    limit_ = limit;
  }
  cv_.notify_all();
}

std::size_t ConcurrencyLimiter::limit() const {
  std::lock_guard lock(mu_);
  return limit_;
}

std::size_t ConcurrencyLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

ConcurrencyLimiter& shared_limiter(const std::string& key, std::size_t limit) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<ConcurrencyLimiter>> limiters;
  std::lock_guard lock(mu);
  auto& slot = limiters[key];
  if (!slot) {
    slot = std::make_unique<ConcurrencyLimiter>(limit);
  } else {
    slot->set_limit(limit);
  }
  return *slot;
}

}  // namespace iclpara::http
