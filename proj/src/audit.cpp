#include "majoraudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace majoraudit::audit {

using nlohmann::json;

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::jaccard:
            return "jaccard";
        case Metric::wasserstein:
            return "wasserstein";
        case Metric::sds:
            return "sds";
    }
    return "?";
}

Metric metric_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "jaccard" || n == "jc") return Metric::jaccard;
    if (n == "wasserstein" || n == "wm" || n == "emd") return Metric::wasserstein;
    if (n == "sds") return Metric::sds;
    throw ConfigError("unknown metric: " + name);
}

std::string RunManifest::hash_hex() const {
    std::string packed = config_snapshot;
    packed += "seed=" + std::to_string(seed) + "\n";
    packed += "backend=" + backend_identity + "\n";
    for (const auto& [name, value] : hashes) packed += name + "=" + value + "\n";
    return majoraudit::hash_hex(fnv1a64(packed));
}

AuditSetup AuditSetup::from_config(const Config& cfg) {
    AuditSetup s;
    s.cfg = cfg;

    const std::string template_path = cfg.get("paths.template", "");
    s.tmpl = template_path.empty() ? prompts::PromptTemplate::builtin()
                                   : prompts::PromptTemplate::from_file(template_path);
    s.lexicon = vocab::StemLexicon::from_file(cfg.require("paths.lexicon"));
    s.scheme = prompts::scheme_from_spec(cfg.get("audit.brackets", "quintiles"));

    const auto value_tokens = cfg.get_list("audit.values");
    if (value_tokens.empty()) {
        s.values = prompts::DemographicValue::all();
    } else {
        for (const std::string& token : value_tokens)
            s.values.push_back(prompts::DemographicValue::from_token(token));
    }

    auto metric_names = cfg.get_list("audit.metrics");
    if (metric_names.empty()) metric_names = {"jaccard", "wasserstein", "sds"};
    for (const std::string& name : metric_names) s.run_metrics.push_back(metric_from_name(name));

    s.temperatures = cfg.get_double_list("backend.temperatures");
    if (s.temperatures.empty()) s.temperatures = {0.0, 0.7, 1.0};

    const auto rank_weights = cfg.get_double_list("audit.rank_weights");
    if (!rank_weights.empty()) {
        if (rank_weights.size() != 10)
            throw ConfigError("audit.rank_weights must list exactly 10 values");
        std::copy(rank_weights.begin(), rank_weights.end(), s.weights.weights.begin());
    }
    s.weights.normalizer = cfg.get_double("audit.normalizer", 10.0);
    s.weights.validate();

    const std::string weighting = cfg.get("audit.weighting", "uniform");
    if (weighting == "uniform")
        s.weighting = metrics::Weighting::uniform;
    else if (weighting == "rank_weighted")
        s.weighting = metrics::Weighting::rank_weighted;
    else
        throw ConfigError("audit.weighting must be uniform or rank_weighted");

    s.ci_level = cfg.get_double("audit.ci_level", 0.95);
    if (s.ci_level <= 0.0 || s.ci_level >= 1.0)
        throw ConfigError("audit.ci_level must be in (0,1)");
    s.ci_method = stats::ci_method_from_name(cfg.get("audit.ci_method", "percentile_bootstrap"));
    s.resamples = static_cast<std::size_t>(cfg.get_int("audit.resamples", 1000));
    s.wm_replicates = static_cast<std::size_t>(cfg.get_int("audit.wm_replicates", 200));
    s.n_per_cell = static_cast<std::size_t>(cfg.get_int("audit.n_per_cell", 100));
    if (s.n_per_cell < 1) throw ConfigError("audit.n_per_cell must be >= 1");
    s.min_valid = static_cast<std::size_t>(cfg.get_int("audit.min_valid_samples", 2));
    const std::string design = cfg.get("audit.design", "one_at_a_time");
    if (design == "full_cross")
        s.full_cross = true;
    else if (design != "one_at_a_time")
        throw ConfigError("audit.design must be one_at_a_time or full_cross");
    s.seed = static_cast<std::uint64_t>(cfg.get_int("audit.seed", 42));
    s.model_name = cfg.get("backend.model", "gpt-3.5-turbo");
    s.cache_path = cfg.get("paths.cache", "cache.jsonl");
    s.embeddings_path = cfg.get("paths.embeddings", "");
    if (s.needs_embeddings() && s.embeddings_path.empty())
        throw ConfigError("wasserstein metric requires paths.embeddings");
    return s;
}

std::vector<prompts::Cell> AuditSetup::enumerate() const {
    return full_cross ? prompts::enumerate_cells_cross(scheme)
                      : prompts::enumerate_cells(scheme, values);
}

std::unique_ptr<client::Backend> AuditSetup::make_backend() const {
    const std::string type = cfg.get("backend.type", "synthetic");
    if (type == "synthetic")
        return std::make_unique<client::SyntheticBackend>(
            client::SyntheticBiasModel::from_config(cfg, lexicon));
    if (type == "live")
        return std::make_unique<client::LiveBackend>(client::LiveConfig::from_config(cfg));
    throw ConfigError("backend.type must be live or synthetic, got " + type);
}

client::BatchOptions AuditSetup::batch_options() const {
    client::BatchOptions options;
    options.parallelism = static_cast<std::size_t>(cfg.get_int("backend.parallelism", 4));
    options.rate_limit_per_min = cfg.get_double("backend.rate_limit", 60.0);
    return options;
}

bool AuditSetup::needs_baseline() const {
    for (Metric m : run_metrics)
        if (m == Metric::jaccard || m == Metric::wasserstein) return true;
    return false;
}

bool AuditSetup::needs_embeddings() const {
    return std::find(run_metrics.begin(), run_metrics.end(), Metric::wasserstein) !=
           run_metrics.end();
}

namespace {

std::string format_temperatures(const std::vector<double>& temps) {
    std::string out = "pooled(";
    char buf[32];
    for (std::size_t i = 0; i < temps.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6g", temps[i]);
        if (i) out += ',';
        out += buf;
    }
    return out + ")";
}

client::QuerySpec make_spec(const AuditSetup& setup, const prompts::StudentProfile& profile,
                            double temperature) {
    const auto rendered = prompts::render_prompt(profile, setup.tmpl);
    client::QuerySpec spec;
    spec.system_text = rendered.system_text;
    spec.user_text = rendered.user_text;
    spec.temperature = temperature;
    spec.model_name = setup.model_name;
    spec.profile = profile;
    return spec;
}

struct SpecRef {
    std::size_t cell_spec = SIZE_MAX;
    std::size_t base_spec = SIZE_MAX;
};

struct SpecPlan {
    std::vector<client::QuerySpec> specs;
    std::vector<std::vector<SpecRef>> refs;  // per cell: n_per_cell * |temps| entries
    std::vector<std::vector<prompts::StudentProfile>> profiles;
};

SpecPlan build_spec_plan(const AuditSetup& setup, const std::vector<prompts::Cell>& cells) {
    SpecPlan plan;
    plan.refs.resize(cells.size());
    plan.profiles.resize(cells.size());
    const bool baseline = setup.needs_baseline();
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        plan.profiles[ci] = prompts::sample_profiles(cells[ci], setup.n_per_cell, setup.seed);
        plan.refs[ci].reserve(setup.n_per_cell * setup.temperatures.size());
        for (const auto& profile : plan.profiles[ci]) {
            for (double temp : setup.temperatures) {
                SpecRef ref;
                ref.cell_spec = plan.specs.size();
                plan.specs.push_back(make_spec(setup, profile, temp));
                if (baseline) {
                    ref.base_spec = plan.specs.size();
                    plan.specs.push_back(make_spec(setup, prompts::baseline_of(profile), temp));
                }
                plan.refs[ci].push_back(ref);
            }
        }
    }
    return plan;
}

bool has_duplicate_names(const std::vector<std::string>& names) {
    std::set<std::string> seen;
    for (const std::string& name : names)
        if (!seen.insert(normalize_name(name)).second) return true;
    return false;
}

}  // namespace

AuditOutcome run_audit(const Config& cfg) {
    AuditSetup setup = AuditSetup::from_config(cfg);
    const auto cells = setup.enumerate();
    auto backend = setup.make_backend();
    client::ResponseCache cache(setup.cache_path);

    SpecPlan plan = build_spec_plan(setup, cells);
    client::BatchStats bstats;
    auto items = client::run_batch(plan.specs, *backend, cache, setup.batch_options(), &bstats);

    AuditOutcome outcome;
    RunManifest& manifest = outcome.manifest;
    std::vector<std::string>& warnings = manifest.warnings;

    // Parse phase. A malformed (or duplicate-bearing) live response is
    // re-queried once past the cache, then recorded as a failure; synthetic
    // and cached responses are deterministic, so no retry can help.
    const bool live = backend->throttled();
    std::vector<std::optional<std::vector<std::string>>> names(plan.specs.size());
    std::vector<std::string> errors(plan.specs.size());
    for (std::size_t i = 0; i < plan.specs.size(); ++i) {
        if (!items[i].response) {
            errors[i] = items[i].error.empty() ? "query failed" : items[i].error;
            continue;
        }
        try {
            auto parsed = vocab::parse_recommendations(items[i].response->text);
            if (live && has_duplicate_names(parsed))
                throw vocab::MalformedResponseError("duplicate majors in response",
                                                    items[i].response->text);
            names[i] = std::move(parsed);
        } catch (const vocab::MalformedResponseError& e) {
            if (!live) {
                errors[i] = e.what();
                continue;
            }
            try {
                client::InvokeInfo info;
                auto retried = backend->invoke(plan.specs[i], &info);
                cache.append(retried);
                names[i] = vocab::parse_recommendations(retried.text);
            } catch (const std::exception& retry_error) {
                errors[i] = std::string("after re-query: ") + retry_error.what();
            }
        }
    }

    // canonicalize in input order so vocabulary ids are deterministic
    vocab::MajorVocabulary vb;
    std::vector<std::optional<vocab::RecommendationSet>> sets(plan.specs.size());
    for (std::size_t i = 0; i < plan.specs.size(); ++i) {
        if (!names[i]) continue;
        vocab::RecommendationSet set;
        set.provenance = i;
        std::set<std::int32_t> distinct;
        for (std::size_t rank = 0; rank < 10; ++rank) {
            const auto id = vocab::canonicalize((*names[i])[rank], vb, vocab::CanonMode::extend,
                                                setup.lexicon, &warnings);
            set.ids[rank] = id;
            distinct.insert(id);
        }
        set.duplicate_flagged = distinct.size() != 10;
        if (set.duplicate_flagged)
            errors[i] = "duplicate majors persisted; set excluded from metric samples";
        sets[i] = std::move(set);
    }

    const std::vector<bool> stem_flags = vb.stem_flags();

    // semantic cost matrix over the realized vocabulary (Wasserstein only)
    embed::CostMatrix cost;
    std::set<std::int32_t> wm_excluded;
    bool have_cost = false;
    if (setup.needs_embeddings()) {
        auto table = embed::load_embeddings(setup.embeddings_path);
        std::vector<std::int32_t> excluded_ids;
        cost = embed::build_cost_matrix_masked(vb, table, &excluded_ids, &warnings);
        wm_excluded.insert(excluded_ids.begin(), excluded_ids.end());
        have_cost = true;
        manifest.hashes["embeddings"] = table.source_hash;
        manifest.hashes["cost_matrix"] = cost.hash_hex();
        for (const auto& w : table.warnings) warnings.push_back(w);
    }

    // pooled slot mass over ids that have embeddings
    const auto wm_distribution =
        [&](const std::vector<const vocab::RecommendationSet*>& group)
        -> std::optional<metrics::Distribution> {
        std::vector<double> mass(vb.size(), 0.0);
        double total = 0.0;
        for (const auto* set : group) {
            for (std::size_t rank = 0; rank < 10; ++rank) {
                const auto id = set->ids[rank];
                if (wm_excluded.count(id)) continue;
                const double w = setup.weighting == metrics::Weighting::uniform
                                     ? 1.0
                                     : setup.weights.weights[rank];
                mass[static_cast<std::size_t>(id)] += w;
                total += w;
            }
        }
        if (total <= 0.0) return std::nullopt;
        for (double& m : mass) m /= total;
        metrics::Distribution d;
        d.k = vb.size();
        d.mass = std::move(mass);
        return d;
    };

    const std::string temp_policy = format_temperatures(setup.temperatures);
    const std::string lexicon_hash = setup.lexicon.source_hash;
    const std::string vocab_hash = vb.hash_hex();
    std::size_t total_excluded = 0;

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const prompts::Cell& cell = cells[ci];
        std::vector<const vocab::RecommendationSet*> cell_sets, base_sets;
        std::vector<std::pair<const vocab::RecommendationSet*, const vocab::RecommendationSet*>>
            pairs;
        // Samples repeating a (percentile, temperature) pair hit the same
        // cache entry and carry no new information; one metric sample per
        // distinct query keeps the intervals honest about the effective n.
        std::set<std::string> seen_keys;
        for (const SpecRef& ref : plan.refs[ci]) {
            if (!seen_keys.insert(plan.specs[ref.cell_spec].cache_key()).second) continue;
            const vocab::RecommendationSet* cell_set = nullptr;
            const vocab::RecommendationSet* base_set = nullptr;
            if (sets[ref.cell_spec] && !sets[ref.cell_spec]->duplicate_flagged)
                cell_set = &*sets[ref.cell_spec];
            if (ref.base_spec != SIZE_MAX && sets[ref.base_spec] &&
                !sets[ref.base_spec]->duplicate_flagged)
                base_set = &*sets[ref.base_spec];
            if (cell_set) cell_sets.push_back(cell_set);
            if (base_set) base_sets.push_back(base_set);
            if (cell_set && base_set) pairs.emplace_back(cell_set, base_set);
        }
        const std::size_t expected = seen_keys.size();

        for (Metric metric : setup.run_metrics) {
            CellResult r;
            r.bracket_label = cell.bracket.label;
            r.dimension = cell.dimension_label();
            r.value = cell.value_token();
            r.metric = metric;
            r.temperature_policy = temp_policy;
            r.vocab_hash = vocab_hash;
            r.lexicon_hash = lexicon_hash;
            r.cost_matrix_hash = have_cost ? manifest.hashes["cost_matrix"] : "-";
            r.valid_sets = cell_sets.size();

            const std::uint64_t metric_seed =
                mix64(setup.seed, fnv1a64(cell.key() + "|" + metric_name(metric)));

            if (metric == Metric::jaccard) {
                for (const auto& [cs, bs] : pairs)
                    r.samples.push_back(metrics::jaccard(cs->id_set(), bs->id_set()));
                r.excluded_samples = expected - pairs.size();
            } else if (metric == Metric::sds) {
                for (const auto* cs : cell_sets)
                    r.samples.push_back(metrics::sds(*cs, stem_flags, setup.weights));
                r.excluded_samples = expected - cell_sets.size();
            } else {
                r.excluded_samples = 2 * expected - cell_sets.size() - base_sets.size();
                if (!cell_sets.empty() && !base_sets.empty()) {
                    Rng rng(metric_seed);
                    for (std::size_t b = 0; b < setup.wm_replicates; ++b) {
                        std::vector<const vocab::RecommendationSet*> cs, bs;
                        cs.reserve(cell_sets.size());
                        bs.reserve(base_sets.size());
                        for (std::size_t i = 0; i < cell_sets.size(); ++i)
                            cs.push_back(cell_sets[rng.next_index(cell_sets.size())]);
                        for (std::size_t i = 0; i < base_sets.size(); ++i)
                            bs.push_back(base_sets[rng.next_index(base_sets.size())]);
                        const auto u = wm_distribution(cs);
                        const auto v = wm_distribution(bs);
                        if (!u || !v) continue;
                        r.samples.push_back(metrics::wasserstein(*u, *v, cost).distance);
                    }
                }
            }

            r.n = r.samples.size();
            const std::size_t valid_for_metric =
                metric == Metric::jaccard ? pairs.size()
                : metric == Metric::sds   ? cell_sets.size()
                                          : std::min(cell_sets.size(), base_sets.size());
            r.unreliable = valid_for_metric < setup.min_valid;
            if (!r.samples.empty()) {
                const stats::MeanCi ci =
                    metric == Metric::wasserstein
                        ? stats::replicate_ci(r.samples, setup.ci_level)
                        : stats::mean_ci(r.samples, setup.ci_level, setup.ci_method,
                                         setup.resamples, metric_seed);
                r.mean = ci.mean;
                r.ci_lo = ci.ci_lo;
                r.ci_hi = ci.ci_hi;
            } else {
                r.unreliable = true;
            }
            total_excluded += r.excluded_samples;
            if (r.unreliable) ++manifest.unreliable_cells;
            outcome.results.push_back(std::move(r));
        }
    }

    manifest.config_snapshot = setup.cfg.snapshot();
    manifest.seed = setup.seed;
    manifest.backend_identity = backend->identity();
    manifest.temperatures = setup.temperatures;
    manifest.created_utc = utc_now_iso8601();
    manifest.hashes["template"] = setup.tmpl.hash_hex();
    manifest.hashes["lexicon"] = lexicon_hash;
    manifest.hashes["vocabulary"] = vocab_hash;
    manifest.hashes["cache"] = cache.file_hash();
    manifest.realized_k = vb.size();
    manifest.normalizer = setup.weights.normalizer;
    manifest.weighting =
        setup.weighting == metrics::Weighting::uniform ? "uniform" : "rank_weighted";
    manifest.ci_method = setup.ci_method == stats::CiMethod::percentile_bootstrap
                             ? "percentile_bootstrap"
                             : "normal";
    manifest.backend_calls = bstats.backend_calls;
    manifest.cache_hits = bstats.cache_hits;
    std::size_t failures = 0;
    for (const std::string& e : errors)
        if (!e.empty()) ++failures;
    manifest.query_failures = failures;
    manifest.excluded_samples = total_excluded;
    outcome.partial = failures > 0;
    return outcome;
}

std::string collect(const Config& cfg, client::BatchStats* stats_out) {
    AuditSetup setup = AuditSetup::from_config(cfg);
    const auto cells = setup.enumerate();
    auto backend = setup.make_backend();
    client::ResponseCache cache(setup.cache_path);

    SpecPlan plan = build_spec_plan(setup, cells);
    client::BatchStats stats;
    auto items = client::run_batch(plan.specs, *backend, cache, setup.batch_options(), &stats);
    if (stats_out) *stats_out = stats;

    std::size_t failures = 0;
    for (const auto& item : items)
        if (!item.error.empty()) ++failures;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "collected %zu queries over %zu cells: %zu backend calls, %zu cache hits, "
                  "%zu deduplicated, %zu failures\ncache: %s (%zu entries)",
                  plan.specs.size(), cells.size(), stats.backend_calls, stats.cache_hits,
                  stats.deduplicated, failures, setup.cache_path.c_str(), cache.size());
    return buf;
}

std::string plan_text(const Config& cfg) {
    AuditSetup setup = AuditSetup::from_config(cfg);
    const auto cells = setup.enumerate();
    std::ostringstream out;
    out << "audit plan: " << cells.size() << " cells (" << setup.scheme.size() << " brackets x "
        << setup.values.size() << " values), n=" << setup.n_per_cell << " per cell, "
        << setup.temperatures.size() << " temperature(s)";
    const std::size_t per_cell =
        setup.n_per_cell * setup.temperatures.size() * (setup.needs_baseline() ? 2 : 1);
    out << ", " << per_cell << " prompts per cell, " << per_cell * cells.size() << " total\n";
    out << "metrics:";
    for (Metric m : setup.run_metrics) out << ' ' << metric_name(m);
    out << "\n\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-5s %-10s %-8s %-34s %s\n", "idx", "bracket", "dim",
                  "value", "percentiles");
    out << line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::snprintf(line, sizeof(line), "%-5zu %-10s %-8s %-34s [%d,%d]\n", i,
                      cells[i].bracket.label.c_str(), cells[i].dimension_label().c_str(),
                      cells[i].value_token().c_str(), cells[i].bracket.lo,
                      cells[i].bracket.hi);
        out << line;
    }
    return out.str();
}

namespace {

json manifest_to_json(const RunManifest& m) {
    return json{{"config_snapshot", m.config_snapshot},
                {"seed", m.seed},
                {"backend", m.backend_identity},
                {"temperatures", m.temperatures},
                {"created_utc", m.created_utc},
                {"hashes", m.hashes},
                {"realized_k", m.realized_k},
                {"normalizer", m.normalizer},
                {"weighting", m.weighting},
                {"ci_method", m.ci_method},
                {"backend_calls", m.backend_calls},
                {"cache_hits", m.cache_hits},
                {"query_failures", m.query_failures},
                {"excluded_samples", m.excluded_samples},
                {"unreliable_cells", m.unreliable_cells},
                {"warnings", m.warnings},
                {"manifest_hash", m.hash_hex()}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.config_snapshot = j.at("config_snapshot").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.backend_identity = j.at("backend").get<std::string>();
    m.temperatures = j.at("temperatures").get<std::vector<double>>();
    m.created_utc = j.at("created_utc").get<std::string>();
    m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
    m.realized_k = j.at("realized_k").get<std::size_t>();
    m.normalizer = j.at("normalizer").get<double>();
    m.weighting = j.at("weighting").get<std::string>();
    m.ci_method = j.at("ci_method").get<std::string>();
    m.backend_calls = j.at("backend_calls").get<std::size_t>();
    m.cache_hits = j.at("cache_hits").get<std::size_t>();
    m.query_failures = j.at("query_failures").get<std::size_t>();
    m.excluded_samples = j.at("excluded_samples").get<std::size_t>();
    m.unreliable_cells = j.at("unreliable_cells").get<std::size_t>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
}

json cell_to_json(const CellResult& r) {
    return json{{"bracket", r.bracket_label},
                {"dimension", r.dimension},
                {"value", r.value},
                {"metric", metric_name(r.metric)},
                {"samples", r.samples},
                {"mean", r.mean},
                {"ci_lo", r.ci_lo},
                {"ci_hi", r.ci_hi},
                {"n", r.n},
                {"valid_sets", r.valid_sets},
                {"excluded_samples", r.excluded_samples},
                {"unreliable", r.unreliable},
                {"temperature_policy", r.temperature_policy},
                {"vocab_hash", r.vocab_hash},
                {"lexicon_hash", r.lexicon_hash},
                {"cost_matrix_hash", r.cost_matrix_hash}};
}

CellResult cell_from_json(const json& j) {
    CellResult r;
    r.bracket_label = j.at("bracket").get<std::string>();
    r.dimension = j.at("dimension").get<std::string>();
    r.value = j.at("value").get<std::string>();
    r.metric = metric_from_name(j.at("metric").get<std::string>());
    r.samples = j.at("samples").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.ci_lo = j.at("ci_lo").get<double>();
    r.ci_hi = j.at("ci_hi").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.valid_sets = j.at("valid_sets").get<std::size_t>();
    r.excluded_samples = j.at("excluded_samples").get<std::size_t>();
    r.unreliable = j.at("unreliable").get<bool>();
    r.temperature_policy = j.at("temperature_policy").get<std::string>();
    r.vocab_hash = j.at("vocab_hash").get<std::string>();
    r.lexicon_hash = j.at("lexicon_hash").get<std::string>();
    r.cost_matrix_hash = j.at("cost_matrix_hash").get<std::string>();
    return r;
}

}  // namespace

void write_results(const AuditOutcome& outcome, const std::string& path) {
    json doc;
    doc["manifest"] = manifest_to_json(outcome.manifest);
    doc["partial"] = outcome.partial;
    json cells = json::array();
    for (const CellResult& r : outcome.results) cells.push_back(cell_to_json(r));
    doc["results"] = std::move(cells);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write results file: " + path);
    out << doc.dump(2) << '\n';
}

AuditOutcome load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open results file: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError("results file is not valid JSON: " + path);
    AuditOutcome outcome;
    outcome.manifest = manifest_from_json(doc.at("manifest"));
    outcome.partial = doc.at("partial").get<bool>();
    for (const json& j : doc.at("results")) outcome.results.push_back(cell_from_json(j));
    return outcome;
}

namespace {

std::string format_cell(const CellResult& r) {
    if (r.n == 0) return "—";  // no valid samples at all
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f [%.3f,%.3f]%s", r.mean, r.ci_lo, r.ci_hi,
                  r.unreliable ? "*" : "");
    return buf;
}

}  // namespace

TableOutput emit_table(const AuditOutcome& outcome, Metric metric) {
    std::set<std::string> label_set;
    std::map<std::pair<std::string, std::string>, const CellResult*> by_cell;
    std::vector<std::string> value_order;
    std::map<std::string, std::string> value_dimension;
    for (const prompts::DemographicValue& v : prompts::DemographicValue::all()) {
        value_order.push_back(v.token());
        value_dimension[v.token()] = caaspp::dimension_name(v.dimension);
    }
    std::set<std::string> values_present;
    for (const CellResult& r : outcome.results) {
        if (r.metric != metric) continue;
        label_set.insert(r.bracket_label);
        by_cell[{r.value, r.bracket_label}] = &r;
        values_present.insert(r.value);
    }
    const std::vector<std::string> labels(label_set.begin(), label_set.end());
    const std::string manifest_line = "# manifest=" + outcome.manifest.hash_hex();

    std::string csv = manifest_line + "\ndimension,value";
    for (const std::string& label : labels) csv += "," + label;
    csv += '\n';

    std::ostringstream text;
    text << manifest_line << '\n'
         << metric_name(metric) << " by demographic value and score bracket\n";
    char line[512];
    std::snprintf(line, sizeof(line), "%-8s %-34s", "dim", "value");
    text << line;
    for (const std::string& label : labels) {
        std::snprintf(line, sizeof(line), " %-22s", label.c_str());
        text << line;
    }
    text << '\n';

    for (const std::string& value : values_present)
        if (!value_dimension.count(value)) {
            value_order.push_back(value);  // cross-design rows follow the twelve
            value_dimension[value] = "cross";
        }
    for (const std::string& value : value_order) {
        if (!values_present.count(value)) continue;
        const std::string& dim = value_dimension[value];
        csv += dim + "," + value;
        std::snprintf(line, sizeof(line), "%-8s %-34s", dim.c_str(), value.c_str());
        text << line;
        for (const std::string& label : labels) {
            auto it = by_cell.find({value, label});
            const std::string cell = it == by_cell.end() ? "—" : format_cell(*it->second);
            csv += ",\"" + cell + "\"";
            std::snprintf(line, sizeof(line), " %-22s", cell.c_str());
            text << line;
        }
        csv += '\n';
        text << '\n';
    }
    bool any_unreliable = false;
    for (const CellResult& r : outcome.results)
        if (r.metric == metric && r.unreliable && r.n > 0) any_unreliable = true;
    if (any_unreliable) text << "* fewer valid samples than audit.min_valid_samples\n";
    return {csv, text.str()};
}

SeriesOutput emit_series(const AuditOutcome& outcome, Metric metric,
                         caaspp::Dimension dimension) {
    const auto deciles = prompts::decile_scheme();
    std::set<std::string> decile_labels;
    for (const auto& bracket : deciles) decile_labels.insert(bracket.label);

    const std::string dim_name = caaspp::dimension_name(dimension);
    std::map<std::pair<std::string, std::string>, const CellResult*> by_cell;
    std::set<std::string> labels_seen;
    std::set<std::string> values_seen;
    for (const CellResult& r : outcome.results) {
        if (r.metric != metric || r.dimension != dim_name) continue;
        labels_seen.insert(r.bracket_label);
        values_seen.insert(r.value);
        by_cell[{r.value, r.bracket_label}] = &r;
    }
    if (values_seen.empty())
        throw ConfigError("no " + metric_name(metric) + " results for dimension " + dim_name);
    if (labels_seen != decile_labels)
        throw ConfigError(
            "series reports need results on the decile scheme; re-run metrics with "
            "audit.brackets = deciles");

    std::vector<std::string> value_order;
    for (const prompts::DemographicValue& v : prompts::DemographicValue::all())
        if (v.dimension == dimension && values_seen.count(v.token()))
            value_order.push_back(v.token());

    const std::string manifest_hash = outcome.manifest.hash_hex();
    std::string csv = "# manifest=" + manifest_hash +
                      "\nmetric,dimension,value,decile,decile_label,mean,ci_lo,ci_hi\n";
    json doc{{"metric", metric_name(metric)},
             {"dimension", dim_name},
             {"manifest_hash", manifest_hash}};
    json series = json::array();
    char buf[160];
    for (const std::string& value : value_order) {
        json points = json::array();
        for (std::size_t d = 0; d < deciles.size(); ++d) {
            auto it = by_cell.find({value, deciles[d].label});
            if (it == by_cell.end())
                throw ConfigError("missing decile " + deciles[d].label + " for value " + value);
            const CellResult& r = *it->second;
            std::snprintf(buf, sizeof(buf), "%s,%s,%s,%zu,%s,%.9g,%.9g,%.9g\n",
                          metric_name(metric).c_str(), dim_name.c_str(), value.c_str(), d,
                          deciles[d].label.c_str(), r.mean, r.ci_lo, r.ci_hi);
            csv += buf;
            points.push_back(json{{"decile", d},
                                  {"label", deciles[d].label},
                                  {"mean", r.mean},
                                  {"lo", r.ci_lo},
                                  {"hi", r.ci_hi}});
        }
        series.push_back(json{{"value", value}, {"points", std::move(points)}});
    }
    doc["series"] = std::move(series);
    return {csv, doc.dump(2) + "\n"};
}

BayesOutput bayes_report(const Config& cfg, const std::vector<std::string>& groups, int top_k) {
    if (top_k < 1 || top_k > 10) throw ConfigError("bayes top_k must be in [1,10]");
    if (groups.empty()) throw ConfigError("bayes report needs at least one group");
    AuditSetup setup = AuditSetup::from_config(cfg);
    client::ResponseCache cache(setup.cache_path);
    if (cache.size() == 0)
        throw ValidationError("response cache is empty (" + setup.cache_path +
                              "); run collect first");

    vocab::MajorVocabulary vb;
    std::vector<std::string> warnings;
    struct Parsed {
        std::string group;
        std::size_t decile;
        vocab::RecommendationSet set;
    };
    std::vector<Parsed> parsed;
    std::size_t malformed = 0;
    for (const client::RawResponse& entry : cache.entries()) {
        try {
            const auto names = vocab::parse_recommendations(entry.text);
            vocab::RecommendationSet set;
            for (std::size_t rank = 0; rank < 10; ++rank)
                set.ids[rank] = vocab::canonicalize(names[rank], vb, vocab::CanonMode::extend,
                                                    setup.lexicon, &warnings);
            const int percentile = entry.query.profile.score_percentile;
            parsed.push_back({entry.query.profile.group_token(),
                              static_cast<std::size_t>((percentile - 1) / 10), set});
        } catch (const vocab::MalformedResponseError&) {
            ++malformed;
        }
    }
    const std::vector<bool> stem_flags = vb.stem_flags();

    std::vector<double> prior(10, 0.1);
    const auto prior_cfg = cfg.get_double_list("audit.bayes_prior");
    if (!prior_cfg.empty()) {
        if (prior_cfg.size() != 10)
            throw ConfigError("audit.bayes_prior must list exactly 10 decile weights");
        double total = 0.0;
        for (double p : prior_cfg) {
            if (p < 0) throw ConfigError("audit.bayes_prior weights must be non-negative");
            total += p;
        }
        if (total <= 0) throw ConfigError("audit.bayes_prior weights must not all be zero");
        for (std::size_t i = 0; i < 10; ++i) prior[i] = prior_cfg[i] / total;
    }

    const auto deciles = prompts::decile_scheme();
    BayesOutput output;
    std::string csv = "group,decile,decile_label,likelihood,prior,posterior\n";
    std::ostringstream text;
    text << "score-conditional STEM analysis (top-" << top_k << " recommendations)\n";

    for (const std::string& group : groups) {
        if (group != "baseline") prompts::DemographicValue::from_token(group);  // validates
        std::vector<double> hits(10, 0.0), counts(10, 0.0);
        std::size_t used = 0;
        for (const Parsed& p : parsed) {
            if (p.group != group) continue;
            counts[p.decile] += 1.0;
            if (metrics::stem_in_top_k(p.set, stem_flags, top_k)) hits[p.decile] += 1.0;
            ++used;
        }
        if (used == 0)
            throw ValidationError("no cached recommendation sets for group " + group);
        BayesGroupPosterior g;
        g.group = group;
        g.prior = prior;
        g.sets_used = used;
        g.likelihood.resize(10);
        for (std::size_t d = 0; d < 10; ++d) {
            if (counts[d] == 0.0)
                throw ValidationError("group " + group + " has no cached sets in decile " +
                                      deciles[d].label + "; collect more samples");
            g.likelihood[d] = hits[d] / counts[d];
        }
        metrics::BayesInputs inputs;
        inputs.p_stem_given_score = g.likelihood;
        inputs.p_score = prior;
        for (std::size_t d = 0; d < 10; ++d)
            inputs.score_levels.push_back(static_cast<double>(d * 10) + 5.5);
        try {
            g.posterior = metrics::bayes_score_posterior(inputs).mass;
        } catch (const ValidationError&) {
            throw ValidationError("group " + group + ": no STEM evidence in the top " +
                                  std::to_string(top_k) + " recommendations");
        }
        for (std::size_t d = 0; d < 10; ++d)
            g.posterior_mean_percentile += g.posterior[d] * inputs.score_levels[d];

        char buf[200];
        for (std::size_t d = 0; d < 10; ++d) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%s,%.9g,%.9g,%.9g\n", group.c_str(), d,
                          deciles[d].label.c_str(), g.likelihood[d], prior[d], g.posterior[d]);
            csv += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "  %-34s posterior mean percentile %.1f  (from %zu sets)\n",
                      group.c_str(), g.posterior_mean_percentile, g.sets_used);
        text << buf;
        output.groups.push_back(std::move(g));
    }
    if (malformed > 0) text << "  (skipped " << malformed << " malformed cached responses)\n";
    for (std::size_t a = 0; a + 1 < output.groups.size(); ++a) {
        for (std::size_t b = a + 1; b < output.groups.size(); ++b) {
            char buf[200];
            std::snprintf(buf, sizeof(buf),
                          "  %s vs %s: posterior mean shift %+.1f percentile points\n",
                          output.groups[a].group.c_str(), output.groups[b].group.c_str(),
                          output.groups[a].posterior_mean_percentile -
                              output.groups[b].posterior_mean_percentile);
            text << buf;
        }
    }
    output.csv = std::move(csv);
    output.text = text.str();
    return output;
}

IngestOutput run_ingest(const Config& cfg, const std::string& input_override) {
    const std::string input = input_override.empty() ? cfg.require("data.input") : input_override;
    const auto desc = caaspp::FileDescriptor::from_config(cfg);

    const std::string catalog_path = cfg.get("paths.catalog", "");
    auto catalog = catalog_path.empty() ? caaspp::DemographicCatalog::builtin()
                                        : caaspp::DemographicCatalog::from_file(catalog_path);
    const auto catalog_warnings = catalog.validate(cfg.get_bool("data.catalog_strict", false));

    IngestOutput out;
    auto records = caaspp::parse_research_file_path(input, desc, out.report);

    const int grade = static_cast<int>(cfg.get_int("data.grade", 12));
    std::set<int> tests;
    for (const std::string& t : cfg.get_list("data.tests")) tests.insert(std::stoi(t));
    if (tests.empty()) tests = {1, 2, 3, 4, 17, 18, 39};
    std::set<int> group_ids;
    for (const std::string& g : cfg.get_list("data.groups")) group_ids.insert(std::stoi(g));
    if (group_ids.empty()) group_ids = catalog.ids();

    auto filtered = caaspp::filter_study_population(records, grade, tests, group_ids);
    out.filtered_records = filtered.size();
    out.summary = caaspp::summarize_groups(filtered, catalog);
    out.csv = out.summary.to_csv();

    std::ostringstream text;
    text << "parsed " << out.report.records << " records from " << out.report.rows_seen
         << " rows (" << out.report.errors.size() << " malformed, " << out.report.masked_fields
         << " masked fields, " << out.report.unknown_test_rows << " unknown-test rows)\n";
    text << "study population (grade " << grade << "): " << out.filtered_records << " records\n";
    for (const auto& w : catalog_warnings) text << "warning: " << w << '\n';
    for (std::size_t i = 0; i < out.report.errors.size() && i < 10; ++i)
        text << "  row " << out.report.errors[i].row << ": " << out.report.errors[i].message
             << '\n';
    if (out.report.errors.size() > 10)
        text << "  ... " << out.report.errors.size() - 10 << " more\n";
    for (const auto& [dim, shares] : out.summary.dimensions) {
        text << caaspp::dimension_name(dim) << ":\n";
        for (const auto& share : shares) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "  %-40s %6.1f%%  (%ld students)\n",
                          share.label.c_str(), share.share * 100.0, share.students);
            text << buf;
        }
    }
    if (!out.summary.uncataloged_ids.empty()) {
        text << "uncataloged group ids:";
        for (int id : out.summary.uncataloged_ids) text << ' ' << id;
        text << "  (" << out.summary.uncataloged_students << " students)\n";
    }
    out.text = text.str();
    return out;
}

}  // namespace majoraudit::audit
