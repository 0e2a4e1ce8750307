#include "genpipe.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "checksum.hpp"
#include "errors.hpp"
#include "prompts.hpp"
#include "text.hpp"

namespace llmfrac {

using json = nlohmann::json;

std::string request_fixture_key(const CompletionRequest& r) {
  json j;
  j["instruction"] = r.instruction;
  j["user_text"] = r.user_text;
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  j["top_p"] = r.top_p;
  j["frequency_penalty"] = r.frequency_penalty;
  j["presence_penalty"] = r.presence_penalty;
  return fnv1a64_hex(j.dump());
}

std::string CompletionTransport::timestamp() const {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- rate limiting ---

RateLimiter::RateLimiter(double requests_per_minute, Clock clock)
    : capacity_(requests_per_minute > 0 ? std::max(1.0, requests_per_minute / 60.0) : 0),
      refill_per_second_(requests_per_minute / 60.0),
      tokens_(capacity_),
      clock_(std::move(clock)) {
  if (!clock_.now_seconds) {
    clock_.now_seconds = [] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }
  if (!clock_.sleep_seconds) {
    clock_.sleep_seconds = [](double s) {
      std::this_thread::sleep_for(std::chrono::duration<double>(s));
    };
  }
  last_ = clock_.now_seconds();
}

void RateLimiter::acquire() {
  if (capacity_ <= 0) return; // unlimited
  std::unique_lock lock(mutex_);
  for (;;) {
    const double now = clock_.now_seconds();
    tokens_ = std::min(capacity_, tokens_ + (now - last_) * refill_per_second_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / refill_per_second_;
    lock.unlock();
    clock_.sleep_seconds(wait);
    lock.lock();
  }
}

// --- live HTTP transport ---

struct HttpTransport::Impl {
  HttpTransportOptions options;
  std::string base;
  std::string path;
  std::unique_ptr<RateLimiter> limiter;
  std::function<void(double)> sleep;

  explicit Impl(HttpTransportOptions opts) : options(std::move(opts)) {
    const auto scheme_end = options.endpoint.find("://");
    if (scheme_end == std::string::npos)
      throw UsageError("transport endpoint must be an http(s) URL: '" + options.endpoint + "'");
    const auto path_start = options.endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      base = options.endpoint;
      path = "/v1/chat/completions";
    } else {
      base = options.endpoint.substr(0, path_start);
      path = options.endpoint.substr(path_start);
    }
    if (options.requests_per_minute > 0)
      limiter = std::make_unique<RateLimiter>(options.requests_per_minute, options.clock);
    sleep = options.clock.sleep_seconds
                ? options.clock.sleep_seconds
                : [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
};

HttpTransport::HttpTransport(HttpTransportOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

HttpTransport::~HttpTransport() = default;

std::string HttpTransport::complete(const CompletionRequest& request) {
  json payload;
  payload["model"] = impl_->options.model;
  payload["messages"] = json::array({json{{"role", "system"}, {"content", request.instruction}},
                                     json{{"role", "user"}, {"content", request.user_text}}});
  payload["temperature"] = request.temperature;
  payload["max_tokens"] = request.max_tokens;
  payload["top_p"] = request.top_p;
  payload["frequency_penalty"] = request.frequency_penalty;
  payload["presence_penalty"] = request.presence_penalty;
  const std::string body = payload.dump();

  httplib::Headers headers;
  if (!impl_->options.api_key.empty())
    headers.emplace("Authorization", "Bearer " + impl_->options.api_key);

  std::string last_error;
  const int attempts = std::max(1, impl_->options.max_attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const double delay = impl_->options.backoff_initial_seconds * std::pow(2.0, attempt - 1);
      impl_->sleep(delay);
    }
    if (impl_->limiter) impl_->limiter->acquire();

    httplib::Client client(impl_->base);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    auto res = client.Post(impl_->path, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
      continue; // retryable
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "server returned status " + std::to_string(res->status);
      continue; // retryable
    }
    if (res->status != 200)
      throw TransportError("completion endpoint returned status " + std::to_string(res->status) +
                           ": " + res->body.substr(0, 200));
    try {
      const json reply = json::parse(res->body);
      const std::string text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      if (text.empty()) throw TransportError("completion endpoint returned an empty completion");
      return text;
    } catch (const json::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what());
    }
  }
  throw TransportError("completion request failed after " + std::to_string(attempts) +
                       " attempts: " + last_error);
}

// --- replay / record ---

ReplayTransport::ReplayTransport(const std::string& fixtures_path) {
  std::ifstream in(fixtures_path, std::ios::binary);
  if (!in) throw DataError("cannot open fixtures file '" + fixtures_path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      fixtures_[j.at("request_hash").get<std::string>()] = j.at("response_text").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError("fixtures file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string ReplayTransport::complete(const CompletionRequest& request) {
  const std::string key = request_fixture_key(request);
  auto it = fixtures_.find(key);
  if (it == fixtures_.end())
    throw TransportError("no recorded fixture for request " + key);
  return it->second;
}

std::string ReplayTransport::timestamp() const { return "1970-01-01T00:00:00Z"; }

RecordTransport::RecordTransport(std::unique_ptr<CompletionTransport> inner,
                                 const std::string& fixtures_path)
    : inner_(std::move(inner)), path_(fixtures_path) {}

std::string RecordTransport::complete(const CompletionRequest& request) {
  const std::string text = inner_->complete(request);
  json j;
  j["request_hash"] = request_fixture_key(request);
  j["response_text"] = text;
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to fixtures file '" + path_ + "'");
  out << j.dump() << '\n';
  return text;
}

// --- client ---

CompletionClient::CompletionClient(std::shared_ptr<CompletionTransport> transport)
    : transport_(std::move(transport)) {}

std::string CompletionClient::complete(const CompletionRequest& request) {
  {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
  }
  return transport_->complete(request);
}

std::vector<CompletionRequest> CompletionClient::request_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

// --- pipeline stages ---

std::string summarize_to_outline(const std::string& paragraph, CompletionClient& client) {
  if (paragraph.empty()) throw UsageError("summarize_to_outline: paragraph must be non-empty");
  CompletionRequest req;
  req.instruction = prompts::kSummarizeToOutline;
  req.user_text = paragraph;
  const std::string outline = client.complete(req);
  if (outline.empty()) throw TransportError("stage 1 returned an empty outline");
  return outline;
}

std::string expand_outline(const std::string& outline, CompletionClient& client) {
  if (outline.empty()) throw UsageError("expand_outline: outline must be non-empty");
  CompletionRequest req;
  req.instruction = prompts::kExpandOutline;
  req.user_text = outline;
  const std::string text = client.complete(req);
  if (text.empty()) throw TransportError("stage 2 returned an empty expansion");
  return text;
}

GenerationRecord generate_counterfactual(const RawRecord& source, CompletionClient& client,
                                         const std::optional<Date>& cutoff) {
  if (cutoff && !(source.date < *cutoff))
    throw DataError("record '" + source.id + "' dated " + source.date.iso() +
                    " is not earlier than the cutoff " + cutoff->iso());
  GenerationRecord rec;
  rec.source_id = source.id;
  rec.prompt_version = prompts::kVersion;
  rec.outline = summarize_to_outline(source.text, client);
  rec.generated = expand_outline(rec.outline, client);
  rec.timestamp = client.timestamp();
  return rec;
}

std::string proofread_sentence(const std::string& sentence, CompletionClient& client) {
  if (sentence.empty()) throw UsageError("proofread_sentence: sentence must be non-empty");
  CompletionRequest req;
  req.instruction = prompts::kProofread;
  req.user_text = sentence;
  const std::string text = client.complete(req);
  if (text.empty()) throw TransportError("proofread returned an empty sentence");
  return text;
}

// --- batch runners ---

std::shared_ptr<CompletionTransport> make_transport(const GenPipeConfig& config) {
  if (config.mode == "replay") {
    if (config.fixtures.empty()) throw UsageError("replay mode requires a fixtures file");
    return std::make_shared<ReplayTransport>(config.fixtures);
  }
  HttpTransportOptions opts;
  opts.endpoint = config.endpoint;
  opts.model = config.model;
  opts.api_key = config.api_key;
  opts.max_attempts = config.max_attempts;
  opts.backoff_initial_seconds = config.backoff_initial_seconds;
  opts.requests_per_minute = config.requests_per_minute;
  if (config.mode == "live") return std::make_shared<HttpTransport>(std::move(opts));
  if (config.mode == "record") {
    if (config.fixtures.empty()) throw UsageError("record mode requires a fixtures file");
    return std::make_shared<RecordTransport>(std::make_unique<HttpTransport>(std::move(opts)),
                                             config.fixtures);
  }
  throw UsageError("unknown transport mode '" + config.mode + "' (expected live|record|replay)");
}

namespace {

struct TaskResult {
  enum class Status { ok, failed, post_cutoff } status = Status::ok;
  json output_line;
  json partial_line;
  std::vector<CompletionRequest> requests;
};

std::unordered_map<std::string, bool> existing_output_ids(const std::string& path) {
  std::unordered_map<std::string, bool> ids;
  std::ifstream in(path, std::ios::binary);
  if (!in) return ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("id")) ids.emplace(j.at("id").get<std::string>(), true);
    } catch (const json::exception&) {
      // a torn trailing line from an interrupted run; the id is retried
    }
  }
  return ids;
}

// Bounded-parallel map over [0, n); results are committed by index later,
// so issue order never affects output bytes.
template <typename Fn>
void run_bounded(std::size_t n, int max_in_flight, Fn&& fn) {
  const std::size_t workers = static_cast<std::size_t>(std::max(1, max_in_flight));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(std::min(workers, n));
  for (std::size_t t = 0; t < std::min(workers, n); ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

json base_output_line(const RawRecord& r) {
  json line;
  line["id"] = r.id;
  line["date"] = r.date.iso();
  line["venue"] = r.venue;
  line["section"] = to_string(r.section);
  // Tooling must never write generated text without its provenance
  // marker; reference corpora stay uncontaminated even on bugs upstream.
  line["provenance"] = "llm";
  line["prompt_version"] = prompts::kVersion;
  return line;
}

void log_parameter_block(std::ofstream& out, const CompletionRequest& req, const char* stage) {
  json j;
  j["stage"] = stage;
  j["request_hash"] = request_fixture_key(req);
  j["temperature"] = req.temperature;
  j["max_tokens"] = req.max_tokens;
  j["top_p"] = req.top_p;
  j["frequency_penalty"] = req.frequency_penalty;
  j["presence_penalty"] = req.presence_penalty;
  out << j.dump() << '\n';
}

struct BatchSinks {
  std::ofstream out;
  std::ofstream partial;
  std::ofstream request_log;
  bool want_partial = false;
  bool want_log = false;

  BatchSinks(const std::string& out_path, const GenPipeConfig& config) {
    out.open(out_path, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot open '" + out_path + "' for appending");
    want_log = !config.request_log_path.empty();
    if (want_log) {
      request_log.open(config.request_log_path, std::ios::binary | std::ios::trunc);
      if (!request_log) throw DataError("cannot open request log '" + config.request_log_path + "'");
    }
  }

  void open_partial(const std::string& out_path) {
    partial.open(out_path + ".partial", std::ios::binary | std::ios::app);
    want_partial = partial.is_open();
  }
};

BatchStats run_batch(const Corpus& input, const std::string& out_path, const GenPipeConfig& config,
                     bool proofread_mode) {
  auto transport = make_transport(config);
  CompletionClient client(transport);
  const std::optional<Date> cutoff =
      (!proofread_mode && !config.cutoff_date.empty())
          ? std::optional<Date>(parse_date(config.cutoff_date))
          : std::nullopt;

  BatchStats stats;
  stats.total = input.records.size();

  const auto done = existing_output_ids(out_path);
  std::vector<std::size_t> todo;
  todo.reserve(input.records.size());
  for (std::size_t i = 0; i < input.records.size(); ++i) {
    if (done.count(input.records[i].id)) {
      ++stats.skipped_existing;
    } else {
      todo.push_back(i);
    }
  }

  std::vector<TaskResult> results(todo.size());
  run_bounded(todo.size(), config.max_in_flight, [&](std::size_t k) {
    const RawRecord& r = input.records[todo[k]];
    TaskResult& res = results[k];
    if (cutoff && !(r.date < *cutoff)) {
      res.status = TaskResult::Status::post_cutoff;
      return;
    }
    try {
      if (proofread_mode) {
        CompletionRequest req;
        req.instruction = prompts::kProofread;
        std::string joined;
        for (const auto& sentence : segment_sentences(normalize(r.text))) {
          req.user_text = sentence;
          res.requests.push_back(req);
          const std::string fixed = client.complete(req);
          if (fixed.empty()) throw TransportError("proofread returned an empty sentence");
          if (!joined.empty()) joined += ' ';
          joined += fixed;
        }
        if (joined.empty()) throw DataError("record '" + r.id + "' has no sentences to proofread");
        res.output_line = base_output_line(r);
        res.output_line["text"] = joined;
        res.output_line["source_id"] = r.id;
        res.output_line["timestamp"] = client.timestamp();
        return;
      }

      CompletionRequest stage1;
      stage1.instruction = prompts::kSummarizeToOutline;
      stage1.user_text = r.text;
      res.requests.push_back(stage1);
      const std::string outline = client.complete(stage1);
      if (outline.empty()) throw TransportError("stage 1 returned an empty outline");
      res.partial_line = base_output_line(r);
      res.partial_line["outline"] = outline;

      CompletionRequest stage2;
      stage2.instruction = prompts::kExpandOutline;
      stage2.user_text = outline;
      res.requests.push_back(stage2);
      const std::string generated = client.complete(stage2);
      if (generated.empty()) throw TransportError("stage 2 returned an empty expansion");

      res.output_line = base_output_line(r);
      res.output_line["text"] = generated;
      res.output_line["outline"] = outline;
      res.output_line["source_id"] = r.id;
      res.output_line["timestamp"] = client.timestamp();
    } catch (const std::exception& e) {
      res.status = TaskResult::Status::failed;
      if (res.partial_line.is_null()) res.partial_line = base_output_line(r);
      res.partial_line["status"] = "failed";
      res.partial_line["error"] = e.what();
    }
  });

  BatchSinks sinks(out_path, config);
  for (std::size_t k = 0; k < results.size(); ++k) {
    TaskResult& res = results[k];
    switch (res.status) {
      case TaskResult::Status::ok:
        sinks.out << res.output_line.dump() << '\n';
        ++stats.completed;
        break;
      case TaskResult::Status::post_cutoff:
        ++stats.skipped_post_cutoff;
        break;
      case TaskResult::Status::failed:
        if (!sinks.want_partial) sinks.open_partial(out_path);
        sinks.partial << res.partial_line.dump() << '\n';
        ++stats.failed;
        break;
    }
    if (sinks.want_log) {
      for (std::size_t s = 0; s < res.requests.size(); ++s) {
        const char* stage = proofread_mode ? "proofread" : (s == 0 ? "summarize" : "expand");
        log_parameter_block(sinks.request_log, res.requests[s], stage);
      }
    }
  }
  if (!sinks.out) throw DataError("write failed for '" + out_path + "'");
  return stats;
}

} // namespace

BatchStats generate_batch(const Corpus& input, const std::string& out_path,
                          const GenPipeConfig& config) {
  return run_batch(input, out_path, config, /*proofread_mode=*/false);
}

BatchStats proofread_batch(const Corpus& input, const std::string& out_path,
                           const GenPipeConfig& config) {
  return run_batch(input, out_path, config, /*proofread_mode=*/true);
}

} // namespace llmfrac
