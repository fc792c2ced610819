#include "majoraudit.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <string>

#include "majoraudit/audit.hpp"
#include "majoraudit/common.hpp"
#include "majoraudit/metrics.hpp"

using namespace majoraudit;

struct ma_toolkit {
    Config cfg;
    std::string last_error;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

ma_status record(ma_toolkit* tk, ma_status status, const std::string& message) {
    g_last_error = message;
    if (tk) tk->last_error = message;
    return status;
}

// runs `fn`, translating the exception taxonomy onto status codes
ma_status guarded(ma_toolkit* tk, const std::function<ma_status()>& fn) {
    try {
        const ma_status status = fn();
        record(tk, status, "");
        return status;
    } catch (const ConfigError& e) {
        return record(tk, MA_ERR_CONFIG, e.what());
    } catch (const IoError& e) {
        return record(tk, MA_ERR_IO, e.what());
    } catch (const ParseError& e) {
        return record(tk, MA_ERR_PARSE, e.what());
    } catch (const TransportError& e) {
        return record(tk, MA_ERR_TRANSPORT, e.what());
    } catch (const ValidationError& e) {
        return record(tk, MA_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return record(tk, MA_ERR_INTERNAL, e.what());
    }
}

std::string results_path_for(const ma_toolkit* tk, const char* results_path) {
    if (results_path && *results_path) return results_path;
    return tk->cfg.get("paths.results", "results.json");
}

}  // namespace

extern "C" {

const char* ma_version(void) {
    return "0.1.0";
}

const char* ma_status_name(ma_status status) {
    switch (status) {
        case MA_OK:
            return "ok";
        case MA_PARTIAL:
            return "partial";
        case MA_ERR_CONFIG:
            return "config_error";
        case MA_ERR_IO:
            return "io_error";
        case MA_ERR_PARSE:
            return "parse_error";
        case MA_ERR_TRANSPORT:
            return "transport_error";
        case MA_ERR_INVALID:
            return "invalid_argument";
        case MA_ERR_INTERNAL:
            return "internal_error";
    }
    return "unknown";
}

const char* ma_last_error(void) {
    return g_last_error.c_str();
}

void ma_string_free(char* s) {
    std::free(s);
}

ma_status ma_toolkit_open(const char* config_path, ma_toolkit** out) {
    if (!config_path || !out) return record(nullptr, MA_ERR_INVALID, "null argument");
    *out = nullptr;
    return guarded(nullptr, [&] {
        auto tk = std::make_unique<ma_toolkit>();
        tk->cfg = Config::from_file(config_path);
        *out = tk.release();
        return MA_OK;
    });
}

ma_status ma_toolkit_open_text(const char* config_text, ma_toolkit** out) {
    if (!config_text || !out) return record(nullptr, MA_ERR_INVALID, "null argument");
    *out = nullptr;
    return guarded(nullptr, [&] {
        auto tk = std::make_unique<ma_toolkit>();
        tk->cfg = Config::from_string(config_text);
        *out = tk.release();
        return MA_OK;
    });
}

ma_status ma_toolkit_set(ma_toolkit* tk, const char* key, const char* value) {
    if (!tk || !key || !value) return record(tk, MA_ERR_INVALID, "null argument");
    tk->cfg.set(key, value);
    return record(tk, MA_OK, "");
}

const char* ma_toolkit_last_error(const ma_toolkit* tk) {
    return tk ? tk->last_error.c_str() : "null toolkit";
}

void ma_toolkit_close(ma_toolkit* tk) {
    delete tk;
}

ma_status ma_run_ingest(ma_toolkit* tk, const char* input_path, const char* csv_path,
                        char** text_out) {
    if (!tk) return record(nullptr, MA_ERR_INVALID, "null toolkit");
    return guarded(tk, [&] {
        auto out = audit::run_ingest(tk->cfg, input_path ? input_path : "");
        if (csv_path && *csv_path) write_file(csv_path, out.csv);
        if (text_out) *text_out = dup_string(out.text);
        return out.report.ok() ? MA_OK : MA_PARTIAL;
    });
}

ma_status ma_run_plan(ma_toolkit* tk, char** text_out) {
    if (!tk) return record(nullptr, MA_ERR_INVALID, "null toolkit");
    return guarded(tk, [&] {
        const std::string text = audit::plan_text(tk->cfg);
        if (text_out) *text_out = dup_string(text);
        return MA_OK;
    });
}

ma_status ma_run_collect(ma_toolkit* tk, char** text_out) {
    if (!tk) return record(nullptr, MA_ERR_INVALID, "null toolkit");
    return guarded(tk, [&] {
        client::BatchStats stats;
        const std::string text = audit::collect(tk->cfg, &stats);
        if (text_out) *text_out = dup_string(text);
        return stats.failures > 0 ? MA_PARTIAL : MA_OK;
    });
}

ma_status ma_run_metrics(ma_toolkit* tk, const char* results_path, char** summary_json_out) {
    if (!tk) return record(nullptr, MA_ERR_INVALID, "null toolkit");
    return guarded(tk, [&] {
        auto outcome = audit::run_audit(tk->cfg);
        audit::write_results(outcome, results_path_for(tk, results_path));
        if (summary_json_out) {
            nlohmann::json summary{{"cells", outcome.results.size()},
                                   {"realized_k", outcome.manifest.realized_k},
                                   {"backend_calls", outcome.manifest.backend_calls},
                                   {"cache_hits", outcome.manifest.cache_hits},
                                   {"query_failures", outcome.manifest.query_failures},
                                   {"excluded_samples", outcome.manifest.excluded_samples},
                                   {"unreliable_cells", outcome.manifest.unreliable_cells},
                                   {"manifest_hash", outcome.manifest.hash_hex()}};
            *summary_json_out = dup_string(summary.dump());
        }
        return outcome.partial ? MA_PARTIAL : MA_OK;
    });
}

ma_status ma_run_report_table(ma_toolkit* tk, const char* metric, const char* results_path,
                              const char* csv_path, const char* text_path) {
    if (!tk || !metric || !csv_path) return record(tk, MA_ERR_INVALID, "null argument");
    return guarded(tk, [&] {
        auto outcome = audit::load_results(results_path_for(tk, results_path));
        auto table = audit::emit_table(outcome, audit::metric_from_name(metric));
        write_file(csv_path, table.csv);
        if (text_path && *text_path) write_file(text_path, table.text);
        return MA_OK;
    });
}

ma_status ma_run_report_series(ma_toolkit* tk, const char* metric, const char* dimension,
                               const char* results_path, const char* csv_path,
                               const char* json_path) {
    if (!tk || !metric || !dimension || !csv_path)
        return record(tk, MA_ERR_INVALID, "null argument");
    return guarded(tk, [&] {
        auto outcome = audit::load_results(results_path_for(tk, results_path));
        auto series = audit::emit_series(outcome, audit::metric_from_name(metric),
                                         caaspp::dimension_from_name(dimension));
        write_file(csv_path, series.csv);
        if (json_path && *json_path) write_file(json_path, series.json_text);
        return MA_OK;
    });
}

ma_status ma_run_bayes(ma_toolkit* tk, const char* groups_csv, int top_k,
                       const char* csv_path, char** text_out) {
    if (!tk || !groups_csv) return record(tk, MA_ERR_INVALID, "null argument");
    return guarded(tk, [&] {
        std::vector<std::string> groups;
        for (const std::string& g : split(groups_csv, ',')) {
            const std::string token = trim(g);
            if (!token.empty()) groups.push_back(token);
        }
        auto out = audit::bayes_report(tk->cfg, groups, top_k);
        if (csv_path && *csv_path) write_file(csv_path, out.csv);
        if (text_out) *text_out = dup_string(out.text);
        return MA_OK;
    });
}

ma_status ma_jaccard(const int32_t* a, size_t a_len, const int32_t* b, size_t b_len,
                     double* out) {
    if ((!a && a_len) || (!b && b_len) || !out)
        return record(nullptr, MA_ERR_INVALID, "null argument");
    return guarded(nullptr, [&] {
        const std::set<std::int32_t> sa(a, a + a_len), sb(b, b + b_len);
        *out = metrics::jaccard(sa, sb);
        return MA_OK;
    });
}

ma_status ma_wasserstein(size_t k, const double* u, const double* v, const double* cost,
                         double* distance_out, double* plan_out) {
    if (!u || !v || !cost || !distance_out || k == 0)
        return record(nullptr, MA_ERR_INVALID, "null argument");
    return guarded(nullptr, [&] {
        metrics::Distribution du, dv;
        du.k = dv.k = k;
        du.mass.assign(u, u + k);
        dv.mass.assign(v, v + k);
        embed::CostMatrix matrix;
        matrix.k = k;
        matrix.cost.assign(cost, cost + k * k);
        const auto result = metrics::wasserstein(du, dv, matrix);
        *distance_out = result.distance;
        if (plan_out)
            std::memcpy(plan_out, result.plan.w.data(), k * k * sizeof(double));
        return MA_OK;
    });
}

ma_status ma_sds(const uint8_t* stem_by_rank, const double* weights10, double normalizer,
                 double* out) {
    if (!stem_by_rank || !out) return record(nullptr, MA_ERR_INVALID, "null argument");
    return guarded(nullptr, [&] {
        metrics::RankWeights weights;
        if (weights10) std::copy(weights10, weights10 + 10, weights.weights.begin());
        if (normalizer > 0.0) weights.normalizer = normalizer;
        vocab::RecommendationSet set;
        std::vector<bool> flags(10);
        for (std::size_t rank = 0; rank < 10; ++rank) {
            set.ids[rank] = static_cast<std::int32_t>(rank);
            flags[rank] = stem_by_rank[rank] != 0;
        }
        *out = metrics::sds(set, flags, weights);
        return MA_OK;
    });
}

ma_status ma_bayes_posterior(size_t n_levels, const double* likelihood, const double* prior,
                             double* posterior_out) {
    if (!likelihood || !prior || !posterior_out || n_levels == 0)
        return record(nullptr, MA_ERR_INVALID, "null argument");
    return guarded(nullptr, [&] {
        metrics::BayesInputs inputs;
        inputs.score_levels.resize(n_levels);
        for (std::size_t i = 0; i < n_levels; ++i)
            inputs.score_levels[i] = static_cast<double>(i);
        inputs.p_stem_given_score.assign(likelihood, likelihood + n_levels);
        inputs.p_score.assign(prior, prior + n_levels);
        const auto posterior = metrics::bayes_score_posterior(inputs);
        std::memcpy(posterior_out, posterior.mass.data(), n_levels * sizeof(double));
        return MA_OK;
    });
}

}  // extern "C"
