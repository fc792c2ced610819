#include <CLI11.hpp>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "majoraudit.h"

namespace {

int status_to_exit(ma_status s) {
    switch (s) {
        case MA_OK:
            return 0;
        case MA_PARTIAL:
            return 1;  // completed with per-sample failures
        case MA_ERR_CONFIG:
            return 2;
        default:
            return 3;
    }
}

struct CommonArgs {
    std::string config;
    // config overrides; empty means "leave the file value alone"
    std::vector<std::pair<std::string, std::string>> overrides;

    void add_override(const std::string& key, const std::string& value) {
        if (!value.empty()) overrides.emplace_back(key, value);
    }
};

void add_common_options(CLI::App* cmd, CommonArgs& args, std::string& backend,
                        std::string& parallelism, std::string& rate_limit,
                        std::string& temperatures, std::string& seed) {
    cmd->add_option("-c,--config", args.config, "configuration file (key=value)")->required();
    cmd->add_option("--backend", backend, "backend.type override: live|synthetic");
    cmd->add_option("--parallelism", parallelism, "backend.parallelism override");
    cmd->add_option("--rate-limit", rate_limit, "backend.rate_limit override (requests/min)");
    cmd->add_option("--temperatures", temperatures,
                    "backend.temperatures override (comma list)");
    cmd->add_option("--seed", seed, "audit.seed override");
}

class Toolkit {
public:
    explicit Toolkit(const CommonArgs& args) {
        status_ = ma_toolkit_open(args.config.c_str(), &tk_);
        if (status_ != MA_OK) {
            std::fprintf(stderr, "error (%s): %s\n", ma_status_name(status_), ma_last_error());
            return;
        }
        for (const auto& [key, value] : args.overrides)
            ma_toolkit_set(tk_, key.c_str(), value.c_str());
    }
    ~Toolkit() { ma_toolkit_close(tk_); }
    Toolkit(const Toolkit&) = delete;
    Toolkit& operator=(const Toolkit&) = delete;

    bool ok() const { return status_ == MA_OK; }
    ma_status open_status() const { return status_; }
    ma_toolkit* get() { return tk_; }

    int finish(ma_status status) const {
        if (status != MA_OK && status != MA_PARTIAL)
            std::fprintf(stderr, "error (%s): %s\n", ma_status_name(status),
                         ma_toolkit_last_error(tk_));
        else if (status == MA_PARTIAL)
            std::fprintf(stderr, "completed with per-sample failures (exit 1)\n");
        return status_to_exit(status);
    }

private:
    ma_toolkit* tk_ = nullptr;
    ma_status status_ = MA_ERR_INTERNAL;
};

void print_and_free(char* text) {
    if (!text) return;
    std::fputs(text, stdout);
    if (text[0] != '\0' && text[std::strlen(text) - 1] != '\n') std::fputc('\n', stdout);
    ma_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"majoraudit: demographic disparity audit of top-10 college-major "
                 "recommendations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ma_version()));

    CommonArgs args;
    std::string backend, parallelism, rate_limit, temperatures, seed;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse and summarize a research data file");
    std::string ingest_input, ingest_csv;
    add_common_options(ingest, args, backend, parallelism, rate_limit, temperatures, seed);
    ingest->add_option("--input", ingest_input, "research file (default: config data.input)");
    ingest->add_option("-o,--out", ingest_csv, "write the group-share CSV here");

    // plan
    auto* plan = app.add_subcommand("plan", "print the audit cell matrix");
    add_common_options(plan, args, backend, parallelism, rate_limit, temperatures, seed);

    // collect
    auto* collect = app.add_subcommand("collect", "run the queries into the response cache");
    add_common_options(collect, args, backend, parallelism, rate_limit, temperatures, seed);

    // metrics
    auto* metrics = app.add_subcommand("metrics", "compute metric samples and intervals "
                                                  "from the cache");
    std::string metrics_out;
    add_common_options(metrics, args, backend, parallelism, rate_limit, temperatures, seed);
    metrics->add_option("-o,--out", metrics_out,
                        "results file (default: config paths.results or results.json)");

    // report
    auto* report = app.add_subcommand("report", "emit table/series reports from a results file");
    std::string report_metric, report_results, grid_csv, grid_text, series_dim, series_csv,
        series_json;
    add_common_options(report, args, backend, parallelism, rate_limit, temperatures, seed);
    report->add_option("-m,--metric", report_metric, "jaccard | wasserstein | sds")->required();
    report->add_option("--results", report_results, "results file to read");
    report->add_option("--grid", grid_csv, "write the bracket-by-value grid CSV here");
    report->add_option("--grid-text", grid_text, "also write the aligned text grid");
    report->add_option("--series", series_dim, "emit decile series for this dimension "
                                               "(gender|ses|race)");
    report->add_option("--series-csv", series_csv, "series CSV path");
    report->add_option("--series-json", series_json, "series JSON path");

    // bayes
    auto* bayes = app.add_subcommand("bayes", "score-conditional STEM posterior per group");
    std::string bayes_groups, bayes_csv;
    int bayes_top_k = 3;
    add_common_options(bayes, args, backend, parallelism, rate_limit, temperatures, seed);
    bayes->add_option("--groups", bayes_groups, "comma list of demographic value tokens")
        ->required();
    bayes->add_option("--top-k", bayes_top_k, "STEM event window over ranks 1..k (default 3)");
    bayes->add_option("-o,--out", bayes_csv, "write the posterior CSV here");

    CLI11_PARSE(app, argc, argv);

    args.add_override("backend.type", backend);
    args.add_override("backend.parallelism", parallelism);
    args.add_override("backend.rate_limit", rate_limit);
    args.add_override("backend.temperatures", temperatures);
    args.add_override("audit.seed", seed);

    Toolkit tk(args);
    if (!tk.ok()) return status_to_exit(tk.open_status());

    if (ingest->parsed()) {
        char* text = nullptr;
        const ma_status st = ma_run_ingest(tk.get(),
                                           ingest_input.empty() ? nullptr : ingest_input.c_str(),
                                           ingest_csv.empty() ? nullptr : ingest_csv.c_str(),
                                           &text);
        if (st == MA_OK || st == MA_PARTIAL) print_and_free(text);
        return tk.finish(st);
    }
    if (plan->parsed()) {
        char* text = nullptr;
        const ma_status st = ma_run_plan(tk.get(), &text);
        if (st == MA_OK) print_and_free(text);
        return tk.finish(st);
    }
    if (collect->parsed()) {
        char* text = nullptr;
        const ma_status st = ma_run_collect(tk.get(), &text);
        if (st == MA_OK || st == MA_PARTIAL) print_and_free(text);
        return tk.finish(st);
    }
    if (metrics->parsed()) {
        char* summary = nullptr;
        const ma_status st = ma_run_metrics(
            tk.get(), metrics_out.empty() ? nullptr : metrics_out.c_str(), &summary);
        if (st == MA_OK || st == MA_PARTIAL) print_and_free(summary);
        return tk.finish(st);
    }
    if (report->parsed()) {
        if (grid_csv.empty() && series_dim.empty()) {
            std::fprintf(stderr, "error: report needs --grid and/or --series\n");
            return 2;
        }
        if (!series_dim.empty() && series_csv.empty()) {
            std::fprintf(stderr, "error: --series requires --series-csv\n");
            return 2;
        }
        const char* results = report_results.empty() ? nullptr : report_results.c_str();
        if (!grid_csv.empty()) {
            const ma_status st =
                ma_run_report_table(tk.get(), report_metric.c_str(), results, grid_csv.c_str(),
                                    grid_text.empty() ? nullptr : grid_text.c_str());
            if (st != MA_OK) return tk.finish(st);
            std::printf("wrote %s\n", grid_csv.c_str());
        }
        if (!series_dim.empty()) {
            const ma_status st = ma_run_report_series(
                tk.get(), report_metric.c_str(), series_dim.c_str(), results,
                series_csv.c_str(), series_json.empty() ? nullptr : series_json.c_str());
            if (st != MA_OK) return tk.finish(st);
            std::printf("wrote %s\n", series_csv.c_str());
        }
        return tk.finish(MA_OK);
    }
    if (bayes->parsed()) {
        char* text = nullptr;
        const ma_status st = ma_run_bayes(tk.get(), bayes_groups.c_str(), bayes_top_k,
                                          bayes_csv.empty() ? nullptr : bayes_csv.c_str(),
                                          &text);
        if (st == MA_OK) print_and_free(text);
        return tk.finish(st);
    }
    return 2;
}
