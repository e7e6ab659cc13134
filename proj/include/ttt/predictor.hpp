#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "ttt/codec.hpp"
#include "ttt/grid.hpp"
#include "ttt/transform.hpp"

namespace ttt {

/// Transport failure that survived every retry.
struct PredictorUnavailable : Error {
  using Error::Error;
};

inline constexpr std::string_view kTokenEnvVar = "TTT_API_TOKEN";
inline constexpr std::string_view kMalformedPrediction = "MalformedPrediction";

enum class Backend { mock, http };

/// Decoding is always greedy (temperature 0); there is no knob for it.
struct PredictorConfig {
  Backend backend = Backend::mock;
  std::string endpoint = "http://127.0.0.1:8000/v1";
  std::string model = "base";
  std::optional<int> max_tokens;  // default: max_tokens_for(view)
  std::chrono::milliseconds timeout{60'000};
  int retries = 3;
  std::chrono::milliseconds backoff{200};  // doubled after every failed attempt
  int max_in_flight = 8;
};

/// Exactly one of `grid` / `failure` is set.
struct Prediction {
  std::string raw_text;
  std::optional<Grid> grid;
  std::optional<std::string> failure;

  bool ok() const noexcept { return grid.has_value(); }
};

/// Turns raw model text into a Prediction without throwing.
Prediction make_prediction(std::string raw_text);

/// Character budget for an output bounded by the largest grid in the view:
/// (2 * cols + 4) * rows + 64, with one token assumed per character.
int max_tokens_for(std::size_t rows, std::size_t cols);
int max_tokens_for(const PromptView& view);

class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Throws PredictorUnavailable on transport failure. Unparseable output is
  /// reported through Prediction::failure instead.
  virtual Prediction predict(const PromptText& prompt) = 0;
  /// Names the adapter/model for provenance; may be empty.
  virtual std::string describe() const = 0;
};

/// Ground-truth function evaluated on the parsed prompt.
using MockRule = std::function<Grid(const PromptView&)>;

/// Deterministic in-process predictor: parses the prompt, applies the rule,
/// renders the result and parses it back like any model output.
class MockPredictor final : public Predictor {
 public:
  explicit MockPredictor(MockRule rule, std::string name = "mock");
  Prediction predict(const PromptText& prompt) override;
  std::string describe() const override { return name_; }

 private:
  MockRule rule_;
  std::string name_;
};

/// Applies a fixed transform to the test input, ignoring the demonstrations.
MockRule fixed_rule(Transform t);

/// Finds the first dihedral transform that, combined with a consistent
/// cell-wise color mapping, explains every demonstration, and applies it to
/// the test input. Falls back to echoing the test input.
MockRule fitting_rule();

/// The eight symmetries of the square, identity first.
std::vector<Transform> dihedral_group();

/// POSTs {"model", "prompt", "temperature": 0, "max_tokens"} to
/// <endpoint>/completions and reads choices[0].text. Bearer token from
/// TTT_API_TOKEN when set. Safe for concurrent use; at most max_in_flight
/// requests are outstanding.
class HttpPredictor final : public Predictor {
 public:
  explicit HttpPredictor(PredictorConfig cfg);
  Prediction predict(const PromptText& prompt) override;
  std::string describe() const override { return cfg_.model; }

 private:
  PredictorConfig cfg_;
  std::string host_;  // scheme://host:port
  std::string base_path_;
  std::counting_semaphore<1024> in_flight_;
};

std::unique_ptr<Predictor> make_predictor(const PredictorConfig& cfg);

/// Splits "http://host:port/base" into ("http://host:port", "/base").
std::pair<std::string, std::string> split_endpoint(const std::string& url);

}  // namespace ttt
