// In-process HTTP stub: records every request body and answers through a
// caller-supplied handler.
#pragma once

#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

namespace test_support {

inline std::string fixture(const std::string& name) {
  std::ifstream in(std::string(TTT_FIXTURE_DIR) + "/" + name, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Recorded {
  std::string path;
  std::string body;
  std::string authorization;
};

class StubServer {
 public:
  // handler(request body, call index) -> (status, body)
  using Handler = std::function<std::pair<int, std::string>(const std::string&, std::size_t)>;

  explicit StubServer(Handler h) : handler_(std::move(h)) {
    server_.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t index;
      {
        std::lock_guard lock(mu_);
        index = requests_.size();
        requests_.push_back({req.path, req.body, req.get_header_value("Authorization")});
      }
      auto [status, body] = handler_(req.body, index);
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& path = "/v1") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  std::vector<Recorded> requests() {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<Recorded> requests_;
};

}  // namespace test_support
