#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "majoraudit/caaspp.hpp"
#include "majoraudit/client.hpp"
#include "majoraudit/config.hpp"
#include "majoraudit/embeddings.hpp"
#include "majoraudit/metrics.hpp"
#include "majoraudit/prompts.hpp"
#include "majoraudit/stats.hpp"

namespace majoraudit::audit {

enum class Metric { jaccard, wasserstein, sds };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

// One (bracket, demographic value, metric) aggregate: the unit of every report.
struct CellResult {
    std::string bracket_label;
    std::string dimension;  // gender | ses | race
    std::string value;      // demographic value token
    Metric metric = Metric::jaccard;
    std::vector<double> samples;
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;                 // |samples|
    std::size_t valid_sets = 0;        // parsed cell-side recommendation sets
    std::size_t excluded_samples = 0;  // malformed / duplicate-flagged
    bool unreliable = false;           // fewer valid samples than configured minimum
    std::string temperature_policy;
    std::string vocab_hash;
    std::string lexicon_hash;
    std::string cost_matrix_hash;
};

// Reproducibility envelope. The hash covers the deterministic part (config
// snapshot, seed, backend identity, input/derived file hashes); timestamps
// are recorded but never hashed.
struct RunManifest {
    std::string config_snapshot;
    std::uint64_t seed = 0;
    std::string backend_identity;
    std::vector<double> temperatures;
    std::string created_utc;
    std::map<std::string, std::string> hashes;
    std::size_t realized_k = 0;
    double normalizer = 10.0;
    std::string weighting;
    std::string ci_method;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t query_failures = 0;
    std::size_t excluded_samples = 0;
    std::size_t unreliable_cells = 0;
    std::vector<std::string> warnings;

    std::string hash_hex() const;
};

struct AuditOutcome {
    std::vector<CellResult> results;
    RunManifest manifest;
    bool partial = false;  // some per-sample failures were recorded
};

// Validated run parameters resolved from the config file.
struct AuditSetup {
    Config cfg;
    prompts::PromptTemplate tmpl;
    vocab::StemLexicon lexicon;
    std::vector<prompts::ScoreBracket> scheme;
    std::vector<prompts::DemographicValue> values;
    std::vector<Metric> run_metrics;
    std::vector<double> temperatures;
    metrics::RankWeights weights;
    metrics::Weighting weighting = metrics::Weighting::uniform;
    stats::CiMethod ci_method = stats::CiMethod::percentile_bootstrap;
    double ci_level = 0.95;
    std::size_t resamples = 1000;
    std::size_t wm_replicates = 200;
    std::size_t n_per_cell = 100;
    std::size_t min_valid = 2;
    bool full_cross = false;  // extension: fix all three dimensions per cell
    std::uint64_t seed = 42;
    std::string model_name;
    std::string cache_path;
    std::string embeddings_path;

    static AuditSetup from_config(const Config& cfg);
    std::vector<prompts::Cell> enumerate() const;
    std::unique_ptr<client::Backend> make_backend() const;
    client::BatchOptions batch_options() const;
    bool needs_baseline() const;
    bool needs_embeddings() const;
};

// Full pipeline: sample profiles per cell, query cell + baseline prompts
// through the cache, parse and canonicalize, compute metric samples, and
// aggregate with confidence intervals.
AuditOutcome run_audit(const Config& cfg);

// Query phase only (fills the response cache); returns a short text summary.
std::string collect(const Config& cfg, client::BatchStats* stats = nullptr);

// Human-readable cell matrix for the configured audit.
std::string plan_text(const Config& cfg);

// results.json persistence
void write_results(const AuditOutcome& outcome, const std::string& path);
AuditOutcome load_results(const std::string& path);

struct TableOutput {
    std::string csv;
    std::string text;
};

// Grid shaped like the published table: rows are demographic values grouped
// by dimension, columns are brackets, cells "mean [lo,hi]" at 3 decimals,
// missing cells rendered as an em dash.
TableOutput emit_table(const AuditOutcome& outcome, Metric metric);

struct SeriesOutput {
    std::string csv;
    std::string json_text;
};

// Decile series per demographic value of one dimension; errors unless the
// results were computed on the decile scheme.
SeriesOutput emit_series(const AuditOutcome& outcome, Metric metric,
                         caaspp::Dimension dimension);

struct BayesGroupPosterior {
    std::string group;
    std::vector<double> likelihood;  // P(STEM in top k | decile, group)
    std::vector<double> prior;
    std::vector<double> posterior;
    double posterior_mean_percentile = 0.0;
    std::size_t sets_used = 0;
};

struct BayesOutput {
    std::vector<BayesGroupPosterior> groups;
    std::string csv;
    std::string text;
};

// Score-conditional analysis over the cached recommendation sets: estimates
// P(STEM in top k | decile, group) empirically, applies the score posterior,
// and reports per-group posteriors over deciles.
BayesOutput bayes_report(const Config& cfg, const std::vector<std::string>& groups, int top_k);

struct IngestOutput {
    caaspp::ParseReport report;
    caaspp::GroupSummary summary;
    std::size_t filtered_records = 0;
    std::string csv;
    std::string text;
};

// Parse + filter + summarize a research file per the config's data section.
IngestOutput run_ingest(const Config& cfg, const std::string& input_override = "");

}  // namespace majoraudit::audit
