#include "majoraudit/client.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <thread>

namespace majoraudit::client {

using nlohmann::json;

void QuerySpec::validate() const {
    if (temperature < 0.0 || temperature > 2.0)
        throw ValidationError("temperature must be in [0,2], got " +
                              std::to_string(temperature));
    profile.validate();
}

std::string QuerySpec::prompt_text() const {
    return system_text + "\n\n" + user_text;
}

std::string QuerySpec::cache_key() const {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6g", temperature);
    return hash_hex(fnv1a64(prompt_text() + "\x1f" + temp + "\x1f" + model_name));
}

std::string source_name(ResponseSource s) {
    switch (s) {
        case ResponseSource::live:
            return "live";
        case ResponseSource::cache:
            return "cache";
        case ResponseSource::synthetic:
            return "synthetic";
    }
    return "?";
}

ResponseSource source_from_name(const std::string& name) {
    if (name == "live") return ResponseSource::live;
    if (name == "cache") return ResponseSource::cache;
    if (name == "synthetic") return ResponseSource::synthetic;
    throw ParseError("unknown response source: " + name);
}

namespace {

json profile_to_json(const prompts::StudentProfile& p) {
    return json{{"gender", prompts::gender_token(p.gender)},
                {"race", prompts::race_token(p.race)},
                {"ses", prompts::ses_token(p.ses)},
                {"percentile", p.score_percentile}};
}

prompts::StudentProfile profile_from_json(const json& j) {
    prompts::StudentProfile p;
    p.gender = prompts::gender_from_token(j.at("gender").get<std::string>());
    p.race = prompts::race_from_token(j.at("race").get<std::string>());
    p.ses = prompts::ses_from_token(j.at("ses").get<std::string>());
    p.score_percentile = j.at("percentile").get<int>();
    return p;
}

json response_to_json(const RawResponse& r) {
    return json{{"key", r.query.cache_key()},
                {"system", r.query.system_text},
                {"user", r.query.user_text},
                {"temperature", r.query.temperature},
                {"model", r.query.model_name},
                {"profile", profile_to_json(r.query.profile)},
                {"text", r.text},
                {"timestamp", r.timestamp},
                {"source", source_name(r.source)}};
}

RawResponse response_from_json(const json& j) {
    RawResponse r;
    r.query.system_text = j.at("system").get<std::string>();
    r.query.user_text = j.at("user").get<std::string>();
    r.query.temperature = j.at("temperature").get<double>();
    r.query.model_name = j.at("model").get<std::string>();
    r.query.profile = profile_from_json(j.at("profile"));
    r.text = j.at("text").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.source = source_from_name(j.at("source").get<std::string>());
    return r;
}

constexpr const char* kSyntheticTimestamp = "1970-01-01T00:00:00Z";

}  // namespace

void SyntheticBiasModel::validate() const {
    for (const auto& [token, p] : propensity)
        if (p < 0.0 || p > 1.0)
            throw ValidationError("synthetic propensity for " + token + " outside [0,1]");
    if (baseline_propensity < 0.0 || baseline_propensity > 1.0)
        throw ValidationError("synthetic baseline propensity outside [0,1]");
    if (stem_pool.size() < 10 || non_stem_pool.size() < 10)
        throw ValidationError("synthetic major pools must each hold at least 10 majors");
}

double SyntheticBiasModel::propensity_for(const prompts::StudentProfile& profile) const {
    double sum = 0.0;
    int count = 0;
    const auto add = [&](const std::string& token) {
        auto it = propensity.find(token);
        if (it != propensity.end()) {
            sum += it->second;
            ++count;
        }
    };
    if (profile.gender != prompts::Gender::unspecified)
        add(prompts::gender_token(profile.gender));
    if (profile.race != prompts::Race::unspecified) add(prompts::race_token(profile.race));
    if (profile.ses != prompts::Ses::unspecified) add(prompts::ses_token(profile.ses));
    return count > 0 ? sum / count : baseline_propensity;
}

std::string SyntheticBiasModel::respond(const QuerySpec& spec) const {
    const std::string prompt = spec.prompt_text();
    if (!fail_marker.empty() && prompt.find(fail_marker) != std::string::npos)
        throw TransportError("synthetic fault injected (marker \"" + fail_marker + "\")");
    Rng rng(mix64(seed, fnv1a64(prompt)));
    const double p = propensity_for(spec.profile);
    std::vector<std::string> stem = stem_pool, non_stem = non_stem_pool;
    std::vector<std::string> picks;
    picks.reserve(10);
    for (int rank = 0; rank < 10; ++rank) {
        auto& pool = rng.next_bernoulli(p) ? stem : non_stem;
        const std::size_t idx = rng.next_index(pool.size());
        picks.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return vocab::format_numbered(picks);
}

SyntheticBiasModel SyntheticBiasModel::from_config(const Config& cfg,
                                                   const vocab::StemLexicon& lexicon) {
    SyntheticBiasModel model;
    model.seed = static_cast<std::uint64_t>(cfg.get_int("synthetic.seed", 0));
    model.baseline_propensity = cfg.get_double("synthetic.baseline", 0.5);
    model.fail_marker = cfg.get("synthetic.fail_marker", "");
    for (const auto& [token, value] : cfg.entries_with_prefix("synthetic.propensity"))
        model.propensity[token] = std::strtod(value.c_str(), nullptr);
    const auto stem_list = cfg.get_list("synthetic.stem_pool");
    const auto non_list = cfg.get_list("synthetic.non_stem_pool");
    model.stem_pool = stem_list.empty() ? lexicon.stem_names() : stem_list;
    model.non_stem_pool = non_list.empty() ? lexicon.non_stem_names() : non_list;
    model.validate();
    return model;
}

SyntheticBackend::SyntheticBackend(SyntheticBiasModel model) : model_(std::move(model)) {
    model_.validate();
}

RawResponse SyntheticBackend::invoke(const QuerySpec& spec, InvokeInfo* info) {
    if (info) info->attempts = 1;
    RawResponse r;
    r.query = spec;
    r.text = model_.respond(spec);
    r.timestamp = kSyntheticTimestamp;
    r.source = ResponseSource::synthetic;
    return r;
}

std::string SyntheticBackend::identity() const {
    return "synthetic:" + std::to_string(model_.seed);
}

LiveConfig LiveConfig::from_config(const Config& cfg) {
    LiveConfig c;
    c.url = cfg.require("backend.url");
    c.model = cfg.get("backend.model", "gpt-3.5-turbo");
    c.credential_env = cfg.get("backend.credential_env", "MAJORAUDIT_API_KEY");
    c.max_retries = static_cast<int>(cfg.get_int("backend.max_retries", 3));
    c.backoff_initial_s = cfg.get_double("backend.backoff_initial_s", 0.5);
    c.backoff_cap_s = cfg.get_double("backend.backoff_cap_s", 8.0);
    c.timeout_s = static_cast<int>(cfg.get_int("backend.timeout_s", 60));
    return c;
}

LiveBackend::LiveBackend(LiveConfig cfg) : cfg_(std::move(cfg)) {
    const char* cred = std::getenv(cfg_.credential_env.c_str());
    if (!cred || !*cred)
        throw ConfigError("live backend credential not found: set the " + cfg_.credential_env +
                          " environment variable (or configure backend.credential_env)");
    credential_ = cred;
    const std::size_t scheme = cfg_.url.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("backend.url must include a scheme, got " + cfg_.url);
    const std::size_t slash = cfg_.url.find('/', scheme + 3);
    if (slash == std::string::npos)
        throw ConfigError("backend.url must include the endpoint path, got " + cfg_.url);
    base_ = cfg_.url.substr(0, slash);
    path_ = cfg_.url.substr(slash);
}

RawResponse LiveBackend::invoke(const QuerySpec& spec, InvokeInfo* info) {
    const json body{
        {"model", spec.model_name.empty() ? cfg_.model : spec.model_name},
        {"messages",
         json::array({json{{"role", "system"}, {"content", spec.system_text}},
                      json{{"role", "user"}, {"content", spec.user_text}}})},
        {"temperature", spec.temperature},
    };
    const std::string payload = body.dump();
    const int max_attempts = cfg_.max_retries + 1;
    double backoff = cfg_.backoff_initial_s;
    std::string attempt_log;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (info) info->attempts = attempt;
        httplib::Client cli(base_);
        cli.set_connection_timeout(cfg_.timeout_s);
        cli.set_read_timeout(cfg_.timeout_s);
        httplib::Headers headers{{"Authorization", "Bearer " + credential_}};
        auto res = cli.Post(path_, headers, payload, "application/json");

        if (res && res->status == 200) {
            const json reply = json::parse(res->body, nullptr, false);
            if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
                throw TransportError("backend returned unparsable completion body");
            const json& message = reply["choices"][0].contains("message")
                                      ? reply["choices"][0]["message"]
                                      : reply["choices"][0];
            if (!message.contains("content") || !message["content"].is_string())
                throw TransportError("backend completion has no message content");
            RawResponse out;
            out.query = spec;
            out.text = message["content"].get<std::string>();
            out.timestamp = utc_now_iso8601();
            out.source = ResponseSource::live;
            return out;
        }

        char note[96];
        if (!res)
            std::snprintf(note, sizeof(note), "attempt %d: connection error; ", attempt);
        else
            std::snprintf(note, sizeof(note), "attempt %d: HTTP %d; ", attempt, res->status);
        attempt_log += note;

        const bool retryable = !res || res->status == 429 || res->status >= 500;
        if (!retryable)
            throw TransportError("backend rejected the request (" + attempt_log + ")");
        if (attempt < max_attempts) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff = std::min(backoff * 2.0, cfg_.backoff_cap_s);
        }
    }
    throw TransportError("backend failed after " + std::to_string(max_attempts) +
                         " attempts: " + attempt_log);
}

std::string LiveBackend::identity() const {
    return "live:" + cfg_.model;
}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
    if (path_.empty()) return;
    std::ifstream in(path_);
    if (!in) return;  // fresh cache file
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("key")) {
            warnings_.push_back("cache line " + std::to_string(lineno) + ": unparsable, skipped");
            continue;
        }
        try {
            RawResponse r = response_from_json(j);
            const std::string key = j.at("key").get<std::string>();
            if (by_key_.count(key))
                warnings_.push_back("cache line " + std::to_string(lineno) +
                                    ": duplicate key, last entry wins");
            by_key_[key] = entries_.size();
            entries_.push_back(std::move(r));
        } catch (const std::exception& e) {
            warnings_.push_back("cache line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

ResponseCache ResponseCache::in_memory() {
    return ResponseCache(std::string());
}

std::optional<RawResponse> ResponseCache::find(const QuerySpec& spec) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = by_key_.find(spec.cache_key());
    if (it == by_key_.end()) return std::nullopt;
    const RawResponse& hit = entries_[it->second];
    RawResponse out;
    out.query = spec;
    out.text = hit.text;
    out.timestamp = hit.timestamp;
    out.source = ResponseSource::cache;
    return out;
}

void ResponseCache::append(const RawResponse& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    by_key_[response.query.cache_key()] = entries_.size();
    entries_.push_back(response);
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to response cache: " + path_);
    out << response_to_json(response).dump() << '\n';
    out.flush();
}

std::size_t ResponseCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

std::string ResponseCache::file_hash() const {
    if (path_.empty()) return "-";
    std::lock_guard<std::mutex> lock(mutex_);
    std::ifstream in(path_, std::ios::binary);
    if (!in) return "-";
    std::ostringstream ss;
    ss << in.rdbuf();
    return hash_hex(fnv1a64(ss.str()));
}

RawResponse query(const QuerySpec& spec, Backend& backend, ResponseCache& cache) {
    spec.validate();
    if (auto hit = cache.find(spec)) return *hit;
    InvokeInfo info;
    RawResponse response = backend.invoke(spec, &info);
    if (response.text.empty()) throw TransportError("backend returned an empty response");
    cache.append(response);
    return response;
}

namespace {

// enforces even spacing of dispatches (60/rate seconds apart)
class RateLimiter {
public:
    explicit RateLimiter(double per_min) {
        if (per_min > 0.0)
            interval_ = std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::duration<double>(60.0 / per_min));
    }

    void acquire() {
        if (interval_.count() == 0) return;
        std::chrono::steady_clock::time_point wake;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            const auto now = std::chrono::steady_clock::now();
            if (next_ < now) next_ = now;
            wake = next_;
            next_ += interval_;
        }
        std::this_thread::sleep_until(wake);
    }

private:
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
    std::chrono::nanoseconds interval_{0};
};

}  // namespace

std::vector<BatchItem> run_batch(const std::vector<QuerySpec>& specs, Backend& backend,
                                 ResponseCache& cache, const BatchOptions& options,
                                 BatchStats* stats) {
    if (options.parallelism < 1) throw ValidationError("run_batch: parallelism must be >= 1");
    const std::size_t n = specs.size();
    std::vector<BatchItem> items(n);
    BatchStats local;

    // classify each spec: cache hit, duplicate of an earlier spec, or leader
    std::vector<long> follower_of(n, -1);
    std::vector<std::size_t> leaders;
    std::map<std::string, std::size_t> first_seen;
    for (std::size_t i = 0; i < n; ++i) {
        try {
            specs[i].validate();
        } catch (const std::exception& e) {
            items[i].error = e.what();
            continue;
        }
        if (auto hit = cache.find(specs[i])) {
            items[i].response = std::move(hit);
            ++local.cache_hits;
            continue;
        }
        const std::string key = specs[i].cache_key();
        auto seen = first_seen.find(key);
        if (seen != first_seen.end()) {
            follower_of[i] = static_cast<long>(seen->second);
            ++local.deduplicated;
            continue;
        }
        first_seen[key] = i;
        leaders.push_back(i);
    }

    struct Slot {
        std::optional<RawResponse> response;
        std::string error;
        int attempts = 0;
        bool done = false;
    };
    std::vector<Slot> slots(leaders.size());
    std::mutex mutex;
    std::condition_variable done_cv;
    std::size_t next_job = 0;
    RateLimiter limiter(options.rate_limit_per_min);
    const bool throttle = backend.throttled();

    auto worker = [&]() {
        while (true) {
            std::size_t job;
            {
                std::lock_guard<std::mutex> lock(mutex);
                if (next_job >= leaders.size()) return;
                job = next_job++;
            }
            const QuerySpec& spec = specs[leaders[job]];
            InvokeInfo info;
            Slot result;
            try {
                if (throttle) limiter.acquire();
                RawResponse r = backend.invoke(spec, &info);
                if (r.text.empty())
                    throw TransportError("backend returned an empty response");
                result.response = std::move(r);
            } catch (const std::exception& e) {
                result.error = e.what();
            }
            result.attempts = info.attempts;
            result.done = true;
            {
                std::lock_guard<std::mutex> lock(mutex);
                slots[job] = std::move(result);
            }
            done_cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    const std::size_t workers = std::min(options.parallelism, std::max<std::size_t>(leaders.size(), 1));
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);

    // single sequenced writer: cache lines land in leader order regardless of
    // completion order
    for (std::size_t j = 0; j < leaders.size(); ++j) {
        std::unique_lock<std::mutex> lock(mutex);
        done_cv.wait(lock, [&] { return slots[j].done; });
        Slot& slot = slots[j];
        lock.unlock();
        ++local.backend_calls;
        if (slot.response) cache.append(*slot.response);
        BatchItem& item = items[leaders[j]];
        item.response = slot.response;
        item.error = slot.error;
        item.attempts = slot.attempts;
    }
    for (std::thread& t : pool) t.join();

    // duplicates share their leader's outcome and read as cache-served
    for (std::size_t i = 0; i < n; ++i) {
        if (follower_of[i] < 0) continue;
        const BatchItem& leader = items[static_cast<std::size_t>(follower_of[i])];
        items[i].error = leader.error;
        items[i].attempts = leader.attempts;
        if (leader.response) {
            RawResponse r;
            r.query = specs[i];
            r.text = leader.response->text;
            r.timestamp = leader.response->timestamp;
            r.source = ResponseSource::cache;
            items[i].response = std::move(r);
        }
    }
    for (const BatchItem& item : items)
        if (!item.error.empty()) ++local.failures;
    if (stats) *stats = local;
    return items;
}

}  // namespace majoraudit::client
