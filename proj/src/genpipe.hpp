#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"

namespace llmfrac {

// Counterfactual generation pipeline: summarize a human paragraph to an
// outline, then expand the outline back to prose. All traffic goes
// through a transport so tests replay recorded fixtures offline.

struct CompletionRequest {
  std::string instruction; // system / instruction text
  std::string user_text;
  double temperature = 1.0;
  int max_tokens = 2048;
  double top_p = 1.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
};

// Canonical hash of the full request; the key fixtures are stored under.
std::string request_fixture_key(const CompletionRequest& request);

class CompletionTransport {
public:
  virtual ~CompletionTransport() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
  // ISO-8601 UTC. Replay returns a fixed epoch so replayed artifacts are
  // byte-reproducible.
  virtual std::string timestamp() const;
};

// Token bucket, refilled continuously. Clock is injectable for tests.
class RateLimiter {
public:
  struct Clock {
    std::function<double()> now_seconds;
    std::function<void(double)> sleep_seconds;
  };

  RateLimiter(double requests_per_minute, Clock clock = {});
  void acquire(); // blocks until a request token is available

private:
  double capacity_;
  double refill_per_second_;
  double tokens_;
  double last_;
  Clock clock_;
  std::mutex mutex_;
};

struct HttpTransportOptions {
  std::string endpoint; // e.g. https://host/v1/chat/completions
  std::string model = "gpt-3.5-turbo-0125";
  std::string api_key;
  int max_attempts = 5;
  double backoff_initial_seconds = 0.5;
  double requests_per_minute = 0; // 0 = unlimited
  RateLimiter::Clock clock;       // injectable for tests
};

class HttpTransport : public CompletionTransport {
public:
  explicit HttpTransport(HttpTransportOptions options);
  ~HttpTransport() override;
  std::string complete(const CompletionRequest& request) override;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class ReplayTransport : public CompletionTransport {
public:
  explicit ReplayTransport(const std::string& fixtures_path);
  std::string complete(const CompletionRequest& request) override;
  std::string timestamp() const override;

private:
  std::unordered_map<std::string, std::string> fixtures_;
};

// Wraps another transport and appends every (request_hash, response)
// pair to the fixtures file, so a later replay run reproduces this one.
class RecordTransport : public CompletionTransport {
public:
  RecordTransport(std::unique_ptr<CompletionTransport> inner, const std::string& fixtures_path);
  std::string complete(const CompletionRequest& request) override;

private:
  std::unique_ptr<CompletionTransport> inner_;
  std::string path_;
  std::mutex mutex_;
};

// Thin client that keeps an in-memory log of every parameter block sent.
class CompletionClient {
public:
  explicit CompletionClient(std::shared_ptr<CompletionTransport> transport);
  std::string complete(const CompletionRequest& request);
  std::string timestamp() const { return transport_->timestamp(); }
  std::vector<CompletionRequest> request_log() const;

private:
  std::shared_ptr<CompletionTransport> transport_;
  mutable std::mutex mutex_;
  std::vector<CompletionRequest> log_;
};

struct GenerationRecord {
  std::string source_id;
  std::string outline;
  std::string generated;
  std::string prompt_version;
  std::string timestamp;
};

// Stage 1: compress the paragraph into an outline.
std::string summarize_to_outline(const std::string& paragraph, CompletionClient& client);
// Stage 2: expand the outline into full prose.
std::string expand_outline(const std::string& outline, CompletionClient& client);

// Both stages composed; the record's date must be earlier than the
// cutoff when one is given (the source must predate LLM availability).
GenerationRecord generate_counterfactual(const RawRecord& source, CompletionClient& client,
                                         const std::optional<Date>& cutoff);

std::string proofread_sentence(const std::string& sentence, CompletionClient& client);

struct GenPipeConfig {
  std::string mode = "replay"; // live | record | replay
  std::string endpoint;
  std::string model = "gpt-3.5-turbo-0125";
  std::string fixtures;
  std::string api_key;
  double requests_per_minute = 0;
  int max_in_flight = 1;
  int max_attempts = 5;
  double backoff_initial_seconds = 0.5;
  std::string cutoff_date = "2022-11-30"; // records dated on/after are skipped
  std::string request_log_path;           // optional JSONL of parameter blocks
};

std::shared_ptr<CompletionTransport> make_transport(const GenPipeConfig& config);

struct BatchStats {
  std::size_t total = 0;
  std::size_t completed = 0;
  std::size_t skipped_existing = 0;   // already present in the output (resume)
  std::size_t skipped_post_cutoff = 0;
  std::size_t failed = 0;
};

// Runs the two-stage pipeline over every record, appending one
// corpus-format line per success to out_path (provenance:"llm" always
// set). Failures land in out_path + ".partial" with whatever stage
// output exists, and already-completed ids are skipped on resume.
BatchStats generate_batch(const Corpus& input, const std::string& out_path,
                          const GenPipeConfig& config);

// Proofreads every sentence of every record; output lines correspond
// 1:1 with input records.
BatchStats proofread_batch(const Corpus& input, const std::string& out_path,
                           const GenPipeConfig& config);

} // namespace llmfrac
