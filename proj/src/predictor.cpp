#include "ttt/predictor.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace ttt {

Prediction make_prediction(std::string raw_text) {
  Prediction p;
  p.raw_text = std::move(raw_text);
  try {
    p.grid = parse_grid_text(p.raw_text);
  } catch (const MalformedPrediction& e) {
    p.failure = std::string(kMalformedPrediction) + ": " + e.what();
  } catch (const Error& e) {
    p.failure = std::string(kMalformedPrediction) + ": " + e.what();
  }
  return p;
}

int max_tokens_for(std::size_t rows, std::size_t cols) {
  rows = std::min(rows, kHardGridCap);
  cols = std::min(cols, kHardGridCap);
  return static_cast<int>((2 * cols + 4) * rows + 64);
}

int max_tokens_for(const PromptView& view) {
  std::size_t rows = view.test_input.rows(), cols = view.test_input.cols();
  for (const auto& d : view.demos) {
    rows = std::max({rows, d.input.rows(), d.output.rows()});
    cols = std::max({cols, d.input.cols(), d.output.cols()});
  }
  return max_tokens_for(rows, cols);
}

// ---------------------------------------------------------------------------
// Mock
// ---------------------------------------------------------------------------

MockPredictor::MockPredictor(MockRule rule, std::string name) : rule_(std::move(rule)), name_(std::move(name)) {}

Prediction MockPredictor::predict(const PromptText& prompt) {
  std::string text;
  try {
    text = render_grid_text(rule_(parse_prompt(prompt)));
  } catch (const Error& e) {
    // A rule that cannot produce a grid behaves like a model emitting junk.
    text = std::string("no answer: ") + e.what();
  }
  return make_prediction(std::move(text));
}

MockRule fixed_rule(Transform t) {
  return [t = std::move(t)](const PromptView& view) { return apply_to_grid(t, view.test_input); };
}

std::vector<Transform> dihedral_group() {
  return {Identity{}, Rotate{1}, Rotate{2}, Rotate{3}, Flip{0}, Flip{1}, Transpose{}, Chain{{Transpose{}, Rotate{2}}}};
}

MockRule fitting_rule() {
  return [group = dihedral_group()](const PromptView& view) {
    for (const auto& g : group) {
      std::array<int, kNumColors> map;
      map.fill(-1);
      bool ok = true;
      for (const auto& d : view.demos) {
        const Grid x = apply_to_grid(g, d.input);
        if (x.rows() != d.output.rows() || x.cols() != d.output.cols()) {
          ok = false;
          break;
        }
        for (std::size_t i = 0; i < x.area() && ok; ++i) {
          int& m = map[x.cells()[i]];
          const int y = d.output.cells()[i];
          if (m == -1) m = y;
          ok = m == y;
        }
        if (!ok) break;
      }
      if (!ok) continue;
      const Grid shaped = apply_to_grid(g, view.test_input);
      std::vector<Color> cells = shaped.cells();
      for (Color& c : cells) {
        if (map[c] >= 0) c = static_cast<Color>(map[c]);
      }
      return Grid(shaped.rows(), shaped.cols(), std::move(cells));
    }
    return view.test_input;
  };
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

HttpPredictor::HttpPredictor(PredictorConfig cfg)
    : cfg_(std::move(cfg)), in_flight_(std::clamp(cfg_.max_in_flight, 1, 1024)) {
  std::tie(host_, base_path_) = split_endpoint(cfg_.endpoint);
}

Prediction HttpPredictor::predict(const PromptText& prompt) {
  if (prompt.text.empty()) throw std::invalid_argument("empty prompt");
  int max_tokens = 0;
  if (cfg_.max_tokens) {
    max_tokens = *cfg_.max_tokens;
  } else {
    try {
      max_tokens = max_tokens_for(parse_prompt(prompt));
    } catch (const Error&) {
      max_tokens = max_tokens_for(kRawGridCap, kRawGridCap);
    }
  }
  nlohmann::ordered_json body;
  body["model"] = cfg_.model;
  body["prompt"] = prompt.text;
  body["temperature"] = 0;
  body["max_tokens"] = max_tokens;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* token = std::getenv(std::string(kTokenEnvVar).c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);

  struct Slot {
    std::counting_semaphore<1024>& s;
    explicit Slot(std::counting_semaphore<1024>& s) : s(s) { s.acquire(); }
    ~Slot() { s.release(); }
  } slot(in_flight_);

  std::string last_error;
  auto delay = cfg_.backoff;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client cli(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    auto res = cli.Post(base_path_ + "/completions", headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw PredictorUnavailable(cfg_.endpoint + ": HTTP " + std::to_string(res->status));
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      return make_prediction(j.at("choices").at(0).at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      Prediction p;
      p.raw_text = res->body;
      p.failure = std::string(kMalformedPrediction) + ": bad response body (" + e.what() + ")";
      return p;
    }
  }
  throw PredictorUnavailable(cfg_.endpoint + ": " + last_error + " after " +
                             std::to_string(cfg_.retries + 1) + " attempts");
}

std::unique_ptr<Predictor> make_predictor(const PredictorConfig& cfg) {
  if (cfg.backend == Backend::http) return std::make_unique<HttpPredictor>(cfg);
  return std::make_unique<MockPredictor>(fitting_rule(), "mock");
}

}  // namespace ttt
