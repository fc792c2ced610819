#include "majoraudit/caaspp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace majoraudit::caaspp {

bool is_known_test(int test_id) {
    switch (test_id) {
        case 1:
        case 2:
        case 3:
        case 4:
        case 17:
        case 18:
        case 39:
            return true;
        default:
            return false;
    }
}

const std::vector<std::string>& FileDescriptor::field_names() {
    static const std::vector<std::string> names{
        "school_code",     "test_year",        "student_group_id", "grade",
        "test_id",         "students_tested",  "mean_scale_score", "pct_standard_exceeded"};
    return names;
}

FileDescriptor FileDescriptor::canonical() {
    FileDescriptor d;
    d.columns = {
        {"school_code", "School Code"},
        {"test_year", "Test Year"},
        {"student_group_id", "Student Group ID"},
        {"grade", "Grade"},
        {"test_id", "Test ID"},
        {"students_tested", "Students Tested"},
        {"mean_scale_score", "Mean Scale Score"},
        {"pct_standard_exceeded", "Percentage Standard Exceeded"},
    };
    return d;
}

FileDescriptor FileDescriptor::from_config(const Config& cfg) {
    FileDescriptor d = canonical();
    const std::string delim = cfg.get("data.delimiter", "tab");
    if (delim == "tab" || delim == "\\t")
        d.delimiter = '\t';
    else if (delim == "comma")
        d.delimiter = ',';
    else if (delim.size() == 1)
        d.delimiter = delim[0];
    else
        throw ConfigError("data.delimiter: expected tab, comma, or a single character");
    d.has_header = cfg.get_bool("data.has_header", true);

    const auto mapped = cfg.entries_with_prefix("data.col");
    if (!mapped.empty()) {
        d.columns.clear();
        for (const auto& [field, column] : mapped) d.columns[field] = column;
        for (const std::string& field : field_names())
            if (!d.columns.count(field))
                throw ConfigError("descriptor is missing column mapping data.col." + field);
    }
    return d;
}

namespace {

// resolves the descriptor to a per-field source index
std::map<std::string, std::size_t> resolve_columns(const FileDescriptor& desc,
                                                   const std::vector<std::string>& header) {
    std::map<std::string, std::size_t> out;
    for (const std::string& field : FileDescriptor::field_names()) {
        auto it = desc.columns.find(field);
        if (it == desc.columns.end())
            throw ConfigError("descriptor is missing column mapping for " + field);
        const std::string& column = it->second;
        if (desc.has_header) {
            auto pos = std::find(header.begin(), header.end(), column);
            if (pos != header.end()) {
                out[field] = static_cast<std::size_t>(pos - header.begin());
                continue;
            }
            // an integer mapping is accepted even with a header present
            char* end = nullptr;
            const long idx = std::strtol(column.c_str(), &end, 10);
            if (end != column.c_str() && *end == '\0' && idx >= 0) {
                out[field] = static_cast<std::size_t>(idx);
                continue;
            }
            throw ConfigError("column \"" + column + "\" (for " + field +
                              ") not found in header");
        }
        char* end = nullptr;
        const long idx = std::strtol(column.c_str(), &end, 10);
        if (end == column.c_str() || *end != '\0' || idx < 0)
            throw ConfigError("descriptor has no header row, so column for " + field +
                              " must be a 0-based index, got \"" + column + "\"");
        out[field] = static_cast<std::size_t>(idx);
    }
    return out;
}

bool is_masked(const std::string& s) {
    const std::string t = trim(s);
    return t.empty() || t == "*";
}

bool parse_long(const std::string& s, long* out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end == t.c_str() || *end != '\0') return false;
    *out = v;
    return true;
}

bool parse_double(const std::string& s, double* out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') return false;
    *out = v;
    return true;
}

}  // namespace

std::vector<CaasppRecord> parse_research_file(std::istream& in, const FileDescriptor& desc,
                                              ParseReport& report) {
    std::vector<CaasppRecord> records;
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> cols;

    if (desc.has_header) {
        if (!std::getline(in, line)) return records;  // empty input
        ++lineno;
        cols = resolve_columns(desc, split(line, desc.delimiter));
    } else {
        cols = resolve_columns(desc, {});
    }

    std::size_t max_col = 0;
    for (const auto& [field, idx] : cols) max_col = std::max(max_col, idx);

    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ++report.rows_seen;
        const std::vector<std::string> fields = split(line, desc.delimiter);
        if (fields.size() <= max_col) {
            report.errors.push_back({lineno, "expected at least " + std::to_string(max_col + 1) +
                                                 " columns, got " +
                                                 std::to_string(fields.size())});
            continue;
        }
        CaasppRecord rec;
        rec.school_code = trim(fields[cols["school_code"]]);
        std::string err;
        long v = 0;
        double x = 0.0;
        if (!parse_long(fields[cols["test_year"]], &v))
            err = "test_year is not an integer";
        else
            rec.test_year = static_cast<int>(v);
        if (err.empty()) {
            if (!parse_long(fields[cols["student_group_id"]], &v))
                err = "student_group_id is not an integer";
            else
                rec.student_group_id = static_cast<int>(v);
        }
        if (err.empty()) {
            if (!parse_long(fields[cols["grade"]], &v))
                err = "grade is not an integer";
            else if (v < 1 || v > 13)
                err = "grade " + std::to_string(v) + " outside 1..13";
            else
                rec.grade = static_cast<int>(v);
        }
        if (err.empty()) {
            if (!parse_long(fields[cols["test_id"]], &v))
                err = "test_id is not an integer";
            else
                rec.test_id = static_cast<int>(v);
        }
        if (err.empty()) {
            const std::string& raw = fields[cols["students_tested"]];
            if (is_masked(raw)) {
                ++report.masked_fields;
            } else if (!parse_long(raw, &v)) {
                err = "students_tested is not an integer";
            } else if (v < 0) {
                err = "students_tested is negative";
            } else {
                rec.students_tested = v;
            }
        }
        if (err.empty()) {
            const std::string& raw = fields[cols["mean_scale_score"]];
            if (is_masked(raw))
                ++report.masked_fields;
            else if (!parse_double(raw, &x))
                err = "mean_scale_score is not numeric";
            else
                rec.mean_scale_score = x;
        }
        if (err.empty()) {
            const std::string& raw = fields[cols["pct_standard_exceeded"]];
            if (is_masked(raw))
                ++report.masked_fields;
            else if (!parse_double(raw, &x))
                err = "pct_standard_exceeded is not numeric";
            else if (x < 0.0 || x > 100.0)
                err = "pct_standard_exceeded outside [0,100]";
            else
                rec.pct_standard_exceeded = x;
        }
        if (!err.empty()) {
            report.errors.push_back({lineno, err});
            continue;
        }
        if (!is_known_test(rec.test_id)) ++report.unknown_test_rows;
        records.push_back(std::move(rec));
        ++report.records;
    }
    return records;
}

std::vector<CaasppRecord> parse_research_file_path(const std::string& path,
                                                   const FileDescriptor& desc,
                                                   ParseReport& report) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open research file: " + path);
    return parse_research_file(in, desc, report);
}

std::string serialize_research_file(const std::vector<CaasppRecord>& records,
                                    const FileDescriptor& desc) {
    std::string out;
    const char d = desc.delimiter;
    char buf[64];
    if (desc.has_header) {
        bool first = true;
        for (const std::string& field : FileDescriptor::field_names()) {
            if (!first) out += d;
            first = false;
            auto it = desc.columns.find(field);
            out += it != desc.columns.end() ? it->second : field;
        }
        out += '\n';
    }
    for (const CaasppRecord& r : records) {
        out += r.school_code;
        out += d;
        out += std::to_string(r.test_year);
        out += d;
        out += std::to_string(r.student_group_id);
        out += d;
        out += std::to_string(r.grade);
        out += d;
        out += std::to_string(r.test_id);
        out += d;
        out += r.students_tested ? std::to_string(*r.students_tested) : "*";
        out += d;
        if (r.mean_scale_score) {
            std::snprintf(buf, sizeof(buf), "%.12g", *r.mean_scale_score);
            out += buf;
        } else {
            out += '*';
        }
        out += d;
        if (r.pct_standard_exceeded) {
            std::snprintf(buf, sizeof(buf), "%.12g", *r.pct_standard_exceeded);
            out += buf;
        } else {
            out += '*';
        }
        out += '\n';
    }
    return out;
}

std::vector<CaasppRecord> filter_study_population(const std::vector<CaasppRecord>& records,
                                                  int grade, const std::set<int>& test_ids,
                                                  const std::set<int>& group_ids) {
    std::vector<CaasppRecord> out;
    for (const CaasppRecord& r : records) {
        if (r.grade != grade) continue;
        if (!test_ids.count(r.test_id)) continue;
        if (!group_ids.count(r.student_group_id)) continue;
        if (!r.students_tested) continue;  // suppressed cell: no usable count
        out.push_back(r);
    }
    return out;
}

std::string dimension_name(Dimension d) {
    switch (d) {
        case Dimension::gender:
            return "gender";
        case Dimension::ses:
            return "ses";
        case Dimension::race:
            return "race";
    }
    return "?";
}

Dimension dimension_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "gender") return Dimension::gender;
    if (n == "ses") return Dimension::ses;
    if (n == "race") return Dimension::race;
    throw ConfigError("unknown demographic dimension: " + name);
}

DemographicCatalog DemographicCatalog::builtin() {
    DemographicCatalog c;
    c.entries = {
        {31, {Dimension::ses, "Socioeconomically disadvantaged", 0.626}},
        {111, {Dimension::ses, "Not socioeconomically disadvantaged", 0.374}},
        {75, {Dimension::race, "American Indian or Alaska Native", 0.005}},
        {76, {Dimension::race, "Asian", 0.095}},
        {74, {Dimension::race, "Black or African American", 0.053}},
        {77, {Dimension::race, "Filipino", 0.023}},
        {78, {Dimension::race, "Hispanic or Latino", 0.552}},
        {79, {Dimension::race, "Native Hawaiian or Pacific Islander", 0.004}},
        {80, {Dimension::race, "White", 0.218}},
        {4, {Dimension::gender, "Female", 0.491}},
        {3, {Dimension::gender, "Male", 0.508}},
        {190, {Dimension::gender, "LGBTQ+", 0.001}},
    };
    return c;
}

DemographicCatalog DemographicCatalog::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open demographic catalog: " + path);
    DemographicCatalog c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::vector<std::string> fields = split(t, ',');
        if (fields.size() != 4)
            throw ValidationError("catalog line " + std::to_string(lineno) +
                                  ": expected id,dimension,label,share");
        if (to_lower(trim(fields[0])) == "id") continue;  // header
        char* end = nullptr;
        const long id = std::strtol(trim(fields[0]).c_str(), &end, 10);
        if (end == trim(fields[0]).c_str())
            throw ValidationError("catalog line " + std::to_string(lineno) + ": bad id");
        const double share = std::strtod(trim(fields[3]).c_str(), nullptr);
        c.entries[static_cast<int>(id)] = {dimension_from_name(fields[1]), trim(fields[2]),
                                           share};
    }
    return c;
}

std::vector<std::string> DemographicCatalog::validate(bool strict) const {
    std::map<Dimension, double> sums;
    for (const auto& [id, e] : entries) sums[e.dimension] += e.population_share;
    std::vector<std::string> warnings;
    for (const auto& [dim, sum] : sums) {
        if (std::abs(sum - 1.0) > 0.01) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "catalog: %s population shares sum to %.3f, not 1.0 +/- 0.01",
                          dimension_name(dim).c_str(), sum);
            if (strict) throw ValidationError(buf);
            warnings.emplace_back(buf);
        }
    }
    return warnings;
}

std::set<int> DemographicCatalog::ids() const {
    std::set<int> out;
    for (const auto& [id, e] : entries) out.insert(id);
    return out;
}

std::string GroupSummary::to_csv() const {
    std::string out = "dimension,label,share\n";
    char buf[64];
    for (const auto& [dim, shares] : dimensions) {
        for (const GroupShare& s : shares) {
            std::snprintf(buf, sizeof(buf), ",%.6f\n", s.share);
            out += dimension_name(dim) + "," + s.label + buf;
        }
    }
    return out;
}

GroupSummary summarize_groups(const std::vector<CaasppRecord>& records,
                              const DemographicCatalog& catalog) {
    GroupSummary summary;
    std::map<int, long> students_by_id;
    for (const CaasppRecord& r : records) {
        if (!r.students_tested) continue;
        auto it = catalog.entries.find(r.student_group_id);
        if (it == catalog.entries.end()) {
            summary.uncataloged_students += *r.students_tested;
            summary.uncataloged_ids.insert(r.student_group_id);
            continue;
        }
        students_by_id[r.student_group_id] += *r.students_tested;
    }
    std::map<Dimension, long> totals;
    for (const auto& [id, students] : students_by_id)
        totals[catalog.entries.at(id).dimension] += students;
    for (const auto& [id, students] : students_by_id) {
        const auto& entry = catalog.entries.at(id);
        const long total = totals[entry.dimension];
        summary.dimensions[entry.dimension].push_back(
            {entry.label, total > 0 ? static_cast<double>(students) / total : 0.0, students});
    }
    return summary;
}

}  // namespace majoraudit::caaspp
