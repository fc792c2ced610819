#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "majoraudit/common.hpp"
#include "majoraudit/config.hpp"
#include "majoraudit/major_vocab.hpp"
#include "majoraudit/prompts.hpp"

namespace majoraudit::client {

struct QuerySpec {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    std::string model_name;
    prompts::StudentProfile profile;  // metadata carried for analysis

    void validate() const;  // temperature in [0,2]
    std::string prompt_text() const;
    // hash of prompt_text + temperature + model_name
    std::string cache_key() const;
};

enum class ResponseSource { live, cache, synthetic };

std::string source_name(ResponseSource s);
ResponseSource source_from_name(const std::string& name);

struct RawResponse {
    QuerySpec query;
    std::string text;
    // ISO-8601 UTC. Synthetic responses carry a fixed epoch timestamp so
    // cache files are byte-reproducible under a fixed seed.
    std::string timestamp;
    ResponseSource source = ResponseSource::synthetic;
};

struct InvokeInfo {
    int attempts = 1;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual RawResponse invoke(const QuerySpec& spec, InvokeInfo* info) = 0;
    virtual std::string identity() const = 0;
    // whether dispatches count against the rate limit (live traffic only)
    virtual bool throttled() const { return false; }
};

// Deterministic recommender used as the test oracle for end-to-end checks:
// each rank draws STEM vs non-STEM from a Bernoulli with the group's
// propensity, then picks an unused major uniformly from that pool.
struct SyntheticBiasModel {
    std::map<std::string, double> propensity;  // demographic value token -> p
    double baseline_propensity = 0.5;
    std::vector<std::string> stem_pool;      // each pool holds >= 10 majors
    std::vector<std::string> non_stem_pool;
    std::uint64_t seed = 0;
    std::string fail_marker;  // prompts containing this marker fail (fault injection)

    void validate() const;
    double propensity_for(const prompts::StudentProfile& profile) const;
    // byte-deterministic given (seed, prompt text)
    std::string respond(const QuerySpec& spec) const;

    static SyntheticBiasModel from_config(const Config& cfg,
                                          const vocab::StemLexicon& lexicon);
};

class SyntheticBackend : public Backend {
public:
    explicit SyntheticBackend(SyntheticBiasModel model);
    RawResponse invoke(const QuerySpec& spec, InvokeInfo* info) override;
    std::string identity() const override;

private:
    SyntheticBiasModel model_;
};

struct LiveConfig {
    std::string url;  // chat-completion endpoint, e.g. https://host/v1/chat/completions
    std::string model;
    std::string credential_env = "MAJORAUDIT_API_KEY";
    int max_retries = 3;
    double backoff_initial_s = 0.5;
    double backoff_cap_s = 8.0;
    int timeout_s = 60;

    static LiveConfig from_config(const Config& cfg);
};

// Plain HTTP chat-completion client (system + user message per query).
// Retries rate-limit and server errors with exponential backoff up to the
// configured cap, then raises TransportError carrying the attempt log.
class LiveBackend : public Backend {
public:
    explicit LiveBackend(LiveConfig cfg);  // missing credential fails fast
    RawResponse invoke(const QuerySpec& spec, InvokeInfo* info) override;
    std::string identity() const override;
    bool throttled() const override { return true; }

private:
    LiveConfig cfg_;
    std::string credential_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

// Append-only JSON-lines response cache, keyed by cache_key(). One JSON
// object per line: key, the full query spec, text, timestamp, source.
class ResponseCache {
public:
    explicit ResponseCache(std::string path);  // loads existing entries
    static ResponseCache in_memory();

    std::optional<RawResponse> find(const QuerySpec& spec) const;
    void append(const RawResponse& response);
    std::size_t size() const;
    const std::string& path() const { return path_; }
    std::string file_hash() const;
    const std::vector<RawResponse>& entries() const { return entries_; }
    std::vector<std::string> warnings() const { return warnings_; }

private:
    std::string path_;
    std::vector<RawResponse> entries_;
    std::map<std::string, std::size_t> by_key_;  // last entry wins
    std::vector<std::string> warnings_;
    mutable std::mutex mutex_;
};

// cache-first single query
RawResponse query(const QuerySpec& spec, Backend& backend, ResponseCache& cache);

struct BatchItem {
    std::optional<RawResponse> response;
    std::string error;  // per-spec failure, batch still completes
    int attempts = 0;
};

struct BatchStats {
    std::size_t cache_hits = 0;
    std::size_t backend_calls = 0;
    std::size_t deduplicated = 0;
    std::size_t failures = 0;
};

struct BatchOptions {
    std::size_t parallelism = 4;
    double rate_limit_per_min = 60.0;  // applies to throttled backends only
};

// One item per spec, in input order. Identical cache keys within a batch are
// dispatched once; cache appends happen on a single writer in first-occurrence
// order, so a synthetic collection is byte-reproducible.
std::vector<BatchItem> run_batch(const std::vector<QuerySpec>& specs, Backend& backend,
                                 ResponseCache& cache, const BatchOptions& options,
                                 BatchStats* stats = nullptr);

}  // namespace majoraudit::client
