#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "majoraudit/client.hpp"
#include "majoraudit/major_vocab.hpp"

using namespace majoraudit;
using namespace majoraudit::client;

namespace {

const std::string kLexiconPath = std::string(MAJORAUDIT_DATA_DIR) + "/stem_lexicon.csv";

SyntheticBiasModel test_model(std::uint64_t seed = 42) {
    auto lexicon = vocab::StemLexicon::from_file(kLexiconPath);
    SyntheticBiasModel model;
    model.seed = seed;
    model.stem_pool = lexicon.stem_names();
    model.non_stem_pool = lexicon.non_stem_names();
    model.baseline_propensity = 0.5;
    return model;
}

QuerySpec make_spec(const std::string& user, double temperature = 0.0) {
    QuerySpec spec;
    spec.system_text = "You recommend college majors as a numbered list of 10.";
    spec.user_text = user;
    spec.temperature = temperature;
    spec.model_name = "synthetic";
    return spec;
}

void wait_until_listening(httplib::Server& server) {
    for (int i = 0; i < 1000 && !server.is_running(); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("majoraudit_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string file(const std::string& name) const { return (dir / name).string(); }
    static std::atomic<int>& counter() {
        static std::atomic<int> c{0};
        return c;
    }
};

}  // namespace

TEST_CASE("cache: second identical query is served from cache with identical text") {
    SyntheticBackend backend(test_model());
    auto cache = ResponseCache::in_memory();
    const auto spec = make_spec("student A");

    auto first = query(spec, backend, cache);
    CHECK(first.source == ResponseSource::synthetic);
    auto second = query(spec, backend, cache);
    CHECK(second.source == ResponseSource::cache);
    CHECK(second.text == first.text);
    CHECK(cache.size() == 1);
}

TEST_CASE("synthetic model with propensity 1.0 recommends only STEM majors") {
    auto lexicon = vocab::StemLexicon::from_file(kLexiconPath);
    auto model = test_model();
    model.baseline_propensity = 1.0;
    const std::string text = model.respond(make_spec("any student"));
    auto names = vocab::parse_recommendations(text);
    for (const auto& name : names) {
        auto flag = lexicon.lookup(name);
        REQUIRE(flag.has_value());
        CHECK(*flag == true);
    }
}

TEST_CASE("synthetic responses are deterministic and distinct across prompts") {
    auto model = test_model(42);
    const auto spec = make_spec("fixed prompt");
    const std::string a = model.respond(spec);
    const std::string b = model.respond(spec);
    CHECK(a == b);
    CHECK(model.respond(make_spec("other prompt")) != a);
    // ten parseable items, no duplicates within a response
    auto names = vocab::parse_recommendations(a);
    std::set<std::string> unique(names.begin(), names.end());
    CHECK(unique.size() == 10);
}

TEST_CASE("synthetic seed-42 regression fixture") {
    // recorded once from this model configuration; guards the RNG stream
    auto model = test_model(42);
    const std::string text = model.respond(make_spec("fixed prompt"));
    const std::string again = test_model(42).respond(make_spec("fixed prompt"));
    CHECK(text == again);
    CHECK(vocab::parse_recommendations(text).size() == 10);
    // frozen first line of the response (regenerated only if the stream changes)
    CHECK(text.substr(0, text.find('\n')) == "1. biomedical engineering");
}

TEST_CASE("synthetic rank-1 STEM frequency tracks the propensity") {
    auto model = test_model(7);
    auto lexicon = vocab::StemLexicon::from_file(kLexiconPath);
    const double p = 0.7;
    model.baseline_propensity = p;
    const int n = 2000;
    int stem_first = 0;
    for (int i = 0; i < n; ++i) {
        auto names = vocab::parse_recommendations(
            model.respond(make_spec("student " + std::to_string(i))));
        if (*lexicon.lookup(names.front())) ++stem_first;
    }
    const double freq = static_cast<double>(stem_first) / n;
    const double bound = 3.0 * std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(freq - p) <= bound);
}

TEST_CASE("per-group propensities resolve from the profile") {
    auto model = test_model();
    model.propensity["male"] = 0.9;
    model.propensity["lgbtq_plus"] = 0.45;
    prompts::StudentProfile p;
    p.gender = prompts::Gender::male;
    CHECK(model.propensity_for(p) == 0.9);
    p.gender = prompts::Gender::lgbtq_plus;
    CHECK(model.propensity_for(p) == 0.45);
    p.gender = prompts::Gender::unspecified;
    CHECK(model.propensity_for(p) == model.baseline_propensity);
    p.race = prompts::Race::asian;  // specified but unmapped: baseline
    CHECK(model.propensity_for(p) == model.baseline_propensity);
}

TEST_CASE("run_batch preserves input order and isolates failures") {
    auto model = test_model();
    model.fail_marker = "FAULT";
    SyntheticBackend backend(model);
    auto cache = ResponseCache::in_memory();

    std::vector<QuerySpec> specs;
    for (int i = 0; i < 60; ++i) specs.push_back(make_spec("student " + std::to_string(i)));
    specs[13].user_text = "student FAULT";  // injected failure

    BatchOptions options;
    options.parallelism = 4;
    BatchStats stats;
    auto items = run_batch(specs, backend, cache, options, &stats);

    REQUIRE(items.size() == 60);
    int failures = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i == 13) {
            CHECK(!items[i].response.has_value());
            CHECK(items[i].error.find("fault injected") != std::string::npos);
            ++failures;
            continue;
        }
        REQUIRE(items[i].response.has_value());
        // order contract: each response answers its own spec
        CHECK(items[i].response->query.user_text == specs[i].user_text);
    }
    CHECK(failures == 1);
    CHECK(stats.failures == 1);
    CHECK(stats.backend_calls == 60);
}

TEST_CASE("run_batch deduplicates identical specs within a batch") {
    SyntheticBackend backend(test_model());
    auto cache = ResponseCache::in_memory();
    std::vector<QuerySpec> specs(8, make_spec("same student"));
    specs.push_back(make_spec("different student"));

    BatchStats stats;
    auto items = run_batch(specs, backend, cache, {4, 0.0}, &stats);
    CHECK(stats.backend_calls == 2);
    CHECK(stats.deduplicated == 7);
    for (std::size_t i = 1; i < 8; ++i) {
        REQUIRE(items[i].response.has_value());
        CHECK(items[i].response->source == ResponseSource::cache);
        CHECK(items[i].response->text == items[0].response->text);
    }
}

TEST_CASE("cache persists to disk and a warm rerun issues zero backend calls") {
    TempDir tmp;
    const std::string cache_path = tmp.file("cache.jsonl");
    std::vector<QuerySpec> specs;
    for (int i = 0; i < 10; ++i) specs.push_back(make_spec("student " + std::to_string(i)));

    std::string first_bytes;
    {
        SyntheticBackend backend(test_model());
        ResponseCache cache(cache_path);
        BatchStats stats;
        run_batch(specs, backend, cache, {3, 0.0}, &stats);
        CHECK(stats.backend_calls == 10);
        first_bytes = slurp(cache_path);
    }
    {
        SyntheticBackend backend(test_model());
        ResponseCache cache(cache_path);
        CHECK(cache.size() == 10);
        BatchStats stats;
        auto items = run_batch(specs, backend, cache, {3, 0.0}, &stats);
        CHECK(stats.backend_calls == 0);
        CHECK(stats.cache_hits == 10);
        for (const auto& item : items) {
            REQUIRE(item.response.has_value());
            CHECK(item.response->source == ResponseSource::cache);
        }
        // append-only: the warm run does not grow or rewrite the file
        CHECK(slurp(cache_path) == first_bytes);
    }
}

TEST_CASE("synthetic collection is byte-identical across fresh runs") {
    std::vector<QuerySpec> specs;
    for (int i = 0; i < 25; ++i)
        specs.push_back(make_spec("student " + std::to_string(i % 7)));  // includes duplicates
    std::string bytes[2];
    for (int round = 0; round < 2; ++round) {
        TempDir tmp;
        const std::string path = tmp.file("cache.jsonl");
        SyntheticBackend backend(test_model(99));
        ResponseCache cache(path);
        run_batch(specs, backend, cache, {4, 0.0}, nullptr);
        bytes[round] = slurp(path);
    }
    CHECK(!bytes[0].empty());
    CHECK(bytes[0] == bytes[1]);
}

TEST_CASE("rate limiter spaces out live dispatches") {
    httplib::Server server;
    std::vector<std::chrono::steady_clock::time_point> arrivals;
    std::mutex mu;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        {
            std::lock_guard<std::mutex> lock(mu);
            arrivals.push_back(std::chrono::steady_clock::now());
        }
        res.set_content(R"({"choices":[{"message":{"content":"1. Biology\n2. Chemistry\n3. Physics\n4. Geology\n5. Mathematics\n6. Statistics\n7. Economics\n8. History\n9. Music\n10. Philosophy"}}]})",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    wait_until_listening(server);

    setenv("MAJORAUDIT_TEST_KEY", "sk-test", 1);
    LiveConfig lc;
    lc.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    lc.model = "test-model";
    lc.credential_env = "MAJORAUDIT_TEST_KEY";
    LiveBackend backend(lc);

    auto cache = ResponseCache::in_memory();
    std::vector<QuerySpec> specs;
    for (int i = 0; i < 5; ++i) specs.push_back(make_spec("student " + std::to_string(i)));

    BatchOptions options;
    options.parallelism = 4;
    options.rate_limit_per_min = 1200.0;  // 50 ms spacing
    BatchStats stats;
    auto items = run_batch(specs, backend, cache, options, &stats);
    server.stop();
    server_thread.join();

    for (const auto& item : items) REQUIRE(item.response.has_value());
    CHECK(stats.backend_calls == 5);
    std::sort(arrivals.begin(), arrivals.end());
    REQUIRE(arrivals.size() == 5);
    for (std::size_t i = 1; i < arrivals.size(); ++i) {
        const auto gap =
            std::chrono::duration_cast<std::chrono::milliseconds>(arrivals[i] - arrivals[i - 1]);
        CHECK(gap.count() >= 40);  // 50 ms nominal, small scheduling tolerance
    }
}

TEST_CASE("live backend retry and error handling") {
    httplib::Server server;
    std::atomic<int> hits{0};
    int fail_first = 0;
    int hard_status = 0;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        if (hard_status != 0) {
            res.status = hard_status;
            return;
        }
        if (n <= fail_first) {
            res.status = 429;
            return;
        }
        CHECK(req.get_header_value("Authorization") == "Bearer sk-test");
        res.set_content(R"({"choices":[{"message":{"content":"1. Biology\n2. Chemistry\n3. Physics\n4. Geology\n5. Mathematics\n6. Statistics\n7. Economics\n8. History\n9. Music\n10. Philosophy"}}]})",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    wait_until_listening(server);

    setenv("MAJORAUDIT_TEST_KEY", "sk-test", 1);
    LiveConfig lc;
    lc.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    lc.model = "test-model";
    lc.credential_env = "MAJORAUDIT_TEST_KEY";
    lc.max_retries = 2;
    lc.backoff_initial_s = 0.01;
    lc.backoff_cap_s = 0.02;

    SUBCASE("rate-limit responses are retried with backoff until success") {
        fail_first = 2;
        LiveBackend backend(lc);
        InvokeInfo info;
        auto response = backend.invoke(make_spec("student"), &info);
        CHECK(response.source == ResponseSource::live);
        CHECK(info.attempts == 3);
        CHECK(vocab::parse_recommendations(response.text).size() == 10);
    }
    SUBCASE("persistent 429 exhausts retries with an attempt log") {
        fail_first = 100;
        LiveBackend backend(lc);
        InvokeInfo info;
        try {
            backend.invoke(make_spec("student"), &info);
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("attempt 1: HTTP 429") != std::string::npos);
            CHECK(msg.find("attempt 3: HTTP 429") != std::string::npos);
        }
        CHECK(info.attempts == 3);
    }
    SUBCASE("client errors are not retried") {
        hard_status = 400;
        LiveBackend backend(lc);
        CHECK_THROWS_AS(backend.invoke(make_spec("student"), nullptr), TransportError);
        CHECK(hits == 1);
    }
    SUBCASE("missing credential is a configuration error before any request") {
        LiveConfig broken = lc;
        broken.credential_env = "MAJORAUDIT_UNSET_CREDENTIAL";
        unsetenv("MAJORAUDIT_UNSET_CREDENTIAL");
        CHECK_THROWS_AS(LiveBackend{broken}, ConfigError);
        CHECK(hits == 0);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("query spec validation") {
    auto spec = make_spec("student", 3.5);
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    CHECK(make_spec("a", 0.0).cache_key() != make_spec("a", 0.7).cache_key());
    CHECK(make_spec("a").cache_key() == make_spec("a").cache_key());
    CHECK_THROWS_AS(SyntheticBiasModel{}.validate(), ValidationError);  // empty pools
}
