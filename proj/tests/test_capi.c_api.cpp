// Exercises libmajoraudit strictly through the public C header, the way an
// external binding would.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "majoraudit.h"

namespace {

int g_failures = 0;

#define CHECK(cond)                                                        \
    do {                                                                   \
        if (!(cond)) {                                                     \
            std::fprintf(stderr, "FAIL %s:%d: %s\n", __FILE__, __LINE__, #cond); \
            ++g_failures;                                                  \
        }                                                                  \
    } while (0)

#define CHECK_NEAR(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

void kernel_checks() {
    CHECK(std::strcmp(ma_version(), "0.1.0") == 0);
    CHECK(std::strcmp(ma_status_name(MA_OK), "ok") == 0);
    CHECK(std::strcmp(ma_status_name(MA_ERR_CONFIG), "config_error") == 0);

    // jaccard
    double j = -1;
    const int32_t a[] = {1, 2, 3}, b[] = {2, 3, 4};
    CHECK(ma_jaccard(a, 3, b, 3, &j) == MA_OK);
    CHECK_NEAR(j, 0.5, 1e-15);
    CHECK(ma_jaccard(nullptr, 0, nullptr, 0, &j) == MA_OK);
    CHECK(j == 1.0);

    // wasserstein: point masses and the 2-vs-2 uniform fixture
    {
        const double u[] = {1, 0, 0}, v[] = {0, 0, 1};
        const double cost[] = {0, 0.4, 0.9, 0.4, 0, 0.6, 0.9, 0.6, 0};
        double dist = -1;
        double plan[9] = {0};
        CHECK(ma_wasserstein(3, u, v, cost, &dist, plan) == MA_OK);
        CHECK_NEAR(dist, 0.9, 1e-12);
        CHECK_NEAR(plan[2], 1.0, 1e-12);
    }
    {
        const double u[] = {0.5, 0.5, 0, 0}, v[] = {0, 0, 0.5, 0.5};
        const double cost[] = {0,   0.5, 0.2, 0.8,  //
                               0.5, 0,   0.7, 0.3,  //
                               0.2, 0.7, 0,   0.4,  //
                               0.8, 0.3, 0.4, 0};
        double dist = -1;
        CHECK(ma_wasserstein(4, u, v, cost, &dist, nullptr) == MA_OK);
        CHECK_NEAR(dist, 0.25, 1e-12);
    }
    {
        const double bad_u[] = {0.9, 0.9};
        const double v[] = {0.5, 0.5};
        const double cost[] = {0, 1, 1, 0};
        double dist = 0;
        CHECK(ma_wasserstein(2, bad_u, v, cost, &dist, nullptr) == MA_ERR_INVALID);
        CHECK(std::strlen(ma_last_error()) > 0);
    }

    // sds
    {
        uint8_t all_stem[10], none[10], first_only[10] = {1};
        std::memset(all_stem, 1, sizeof(all_stem));
        std::memset(none, 0, sizeof(none));
        double s = -1;
        CHECK(ma_sds(all_stem, nullptr, 0, &s) == MA_OK);
        CHECK_NEAR(s, 5.5, 1e-15);
        CHECK(ma_sds(none, nullptr, 0, &s) == MA_OK);
        CHECK(s == 0.0);
        CHECK(ma_sds(first_only, nullptr, 0, &s) == MA_OK);
        CHECK_NEAR(s, 1.0, 1e-15);
        CHECK(ma_sds(all_stem, nullptr, 55.0, &s) == MA_OK);
        CHECK_NEAR(s, 1.0, 1e-15);
    }

    // bayes posterior
    {
        const double lik[] = {0.2, 0.5, 0.8}, prior[] = {0.3, 0.4, 0.3};
        double post[3] = {0};
        CHECK(ma_bayes_posterior(3, lik, prior, post) == MA_OK);
        CHECK_NEAR(post[0], 0.12, 1e-15);
        CHECK_NEAR(post[1], 0.40, 1e-15);
        CHECK_NEAR(post[2], 0.48, 1e-15);
        const double zero[] = {0.0, 0.0, 0.0};
        CHECK(ma_bayes_posterior(3, zero, prior, post) == MA_ERR_INVALID);
    }
}

void pipeline_checks() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "majoraudit_capi_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string data = MAJORAUDIT_DATA_DIR;

    const std::string config_text =
        "paths.lexicon = " + data + "/stem_lexicon.csv\n" +
        "paths.cache = " + (dir / "cache.jsonl").string() + "\n" +
        "paths.results = " + (dir / "results.json").string() + "\n" +
        "audit.brackets = deciles\n"
        "audit.values = male,lgbtq_plus\n"
        "audit.metrics = sds\n"
        "audit.n_per_cell = 10\n"
        "audit.seed = 4\n"
        "backend.type = synthetic\n"
        "backend.temperatures = 0.0\n"
        "synthetic.seed = 6\n";

    ma_toolkit* tk = nullptr;
    CHECK(ma_toolkit_open_text(config_text.c_str(), &tk) == MA_OK);

    char* plan = nullptr;
    CHECK(ma_run_plan(tk, &plan) == MA_OK);
    CHECK(plan && std::strstr(plan, "20 cells"));
    ma_string_free(plan);

    char* collect_summary = nullptr;
    CHECK(ma_run_collect(tk, &collect_summary) == MA_OK);
    CHECK(collect_summary && std::strstr(collect_summary, "0 failures"));
    ma_string_free(collect_summary);

    char* metrics_summary = nullptr;
    CHECK(ma_run_metrics(tk, nullptr, &metrics_summary) == MA_OK);
    CHECK(metrics_summary && std::strstr(metrics_summary, "\"cells\":20"));
    // warm cache: metrics after collect issues zero backend calls
    CHECK(metrics_summary && std::strstr(metrics_summary, "\"backend_calls\":0"));
    ma_string_free(metrics_summary);

    const std::string grid_csv = (dir / "grid.csv").string();
    const std::string grid_text = (dir / "grid.txt").string();
    CHECK(ma_run_report_table(tk, "sds", nullptr, grid_csv.c_str(), grid_text.c_str()) ==
          MA_OK);
    const std::string grid = slurp(grid_csv);
    CHECK(grid.find("# manifest=") == 0);
    CHECK(grid.find("gender,male") != std::string::npos);

    const std::string series_csv = (dir / "series.csv").string();
    const std::string series_json = (dir / "series.json").string();
    CHECK(ma_run_report_series(tk, "sds", "gender", nullptr, series_csv.c_str(),
                               series_json.c_str()) == MA_OK);
    CHECK(slurp(series_json).find("\"series\"") != std::string::npos);

    const std::string bayes_csv = (dir / "bayes.csv").string();
    char* bayes_text = nullptr;
    CHECK(ma_run_bayes(tk, "male,lgbtq_plus", 3, bayes_csv.c_str(), &bayes_text) == MA_OK);
    CHECK(bayes_text && std::strstr(bayes_text, "posterior mean percentile"));
    ma_string_free(bayes_text);
    CHECK(slurp(bayes_csv).find("group,decile") == 0);

    // ingest through the same handle
    char* ingest_text = nullptr;
    const std::string sample = data + "/caaspp_sample.tsv";
    const std::string shares_csv = (dir / "shares.csv").string();
    CHECK(ma_run_ingest(tk, sample.c_str(), shares_csv.c_str(), &ingest_text) == MA_OK);
    CHECK(ingest_text && std::strstr(ingest_text, "parsed 10 records"));
    ma_string_free(ingest_text);
    CHECK(slurp(shares_csv).find("dimension,label,share") == 0);

    // error paths surface status codes and messages
    CHECK(ma_run_report_table(tk, "nonsense-metric", nullptr, grid_csv.c_str(), nullptr) ==
          MA_ERR_CONFIG);
    CHECK(std::strlen(ma_toolkit_last_error(tk)) > 0);
    CHECK(ma_run_bayes(tk, "martian", 3, nullptr, nullptr) == MA_ERR_CONFIG);
    ma_toolkit_close(tk);

    ma_toolkit* bad = nullptr;
    CHECK(ma_toolkit_open((dir / "missing.conf").string().c_str(), &bad) == MA_ERR_CONFIG);
    CHECK(bad == nullptr);

    CHECK(ma_toolkit_open_text("backend.type = synthetic\naudit.metrics = sds\n", &bad) ==
          MA_OK);
    char* out = nullptr;
    CHECK(ma_run_plan(bad, &out) == MA_ERR_CONFIG);  // lexicon path missing
    CHECK(std::strstr(ma_toolkit_last_error(bad), "paths.lexicon") != nullptr);
    CHECK(ma_toolkit_set(bad, "paths.lexicon", (data + "/stem_lexicon.csv").c_str()) == MA_OK);
    CHECK(ma_run_plan(bad, &out) == MA_OK);
    ma_string_free(out);
    ma_toolkit_close(bad);

    fs::remove_all(dir);
}

}  // namespace

int main() {
    kernel_checks();
    pipeline_checks();
    if (g_failures == 0) {
        std::printf("capi_tests: all checks passed\n");
        return 0;
    }
    std::fprintf(stderr, "capi_tests: %d failures\n", g_failures);
    return 1;
}
