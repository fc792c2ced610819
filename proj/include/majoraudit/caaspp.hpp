#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "majoraudit/common.hpp"
#include "majoraudit/config.hpp"

namespace majoraudit::caaspp {

// test ids present in the statewide research files
bool is_known_test(int test_id);

struct CaasppRecord {
    std::string school_code;  // zero padding preserved
    int test_year = 0;
    int student_group_id = 0;
    int grade = 0;
    int test_id = 0;
    // suppressed cells ("*") parse as absent; counts are never fabricated
    std::optional<long> students_tested;
    std::optional<double> mean_scale_score;
    std::optional<double> pct_standard_exceeded;

    bool operator==(const CaasppRecord&) const = default;
};

// Column-mapping descriptor so any research-file vintage can be parsed
// without code changes. Column values are either header names (when
// has_header) or 0-based indices.
struct FileDescriptor {
    char delimiter = '\t';
    bool has_header = true;
    std::map<std::string, std::string> columns;  // field name -> column name/index

    static const std::vector<std::string>& field_names();
    // Table-A3-shaped eight-column layout with its usual header names
    static FileDescriptor canonical();
    // keys: data.delimiter, data.has_header, data.col.<field>; all eight
    // data.col.* keys must be present when any is
    static FileDescriptor from_config(const Config& cfg);
};

struct RowError {
    std::size_t row;  // 1-based, counting the header if present
    std::string message;
};

struct ParseReport {
    std::size_t rows_seen = 0;
    std::size_t records = 0;
    std::size_t masked_fields = 0;
    std::size_t unknown_test_rows = 0;
    std::vector<RowError> errors;

    bool ok() const { return errors.empty(); }
};

std::vector<CaasppRecord> parse_research_file(std::istream& in, const FileDescriptor& desc,
                                              ParseReport& report);
std::vector<CaasppRecord> parse_research_file_path(const std::string& path,
                                                   const FileDescriptor& desc,
                                                   ParseReport& report);

// inverse of parsing under the same descriptor; masked fields serialize as "*"
std::string serialize_research_file(const std::vector<CaasppRecord>& records,
                                    const FileDescriptor& desc);

// keeps records matching all three predicates that carry a students_tested
// count; stable order
std::vector<CaasppRecord> filter_study_population(const std::vector<CaasppRecord>& records,
                                                  int grade, const std::set<int>& test_ids,
                                                  const std::set<int>& group_ids);

enum class Dimension { gender, ses, race };

std::string dimension_name(Dimension d);
Dimension dimension_from_name(const std::string& name);

struct DemographicCatalog {
    struct Entry {
        Dimension dimension;
        std::string label;
        double population_share = 0.0;  // fraction of students, per the source table
    };
    std::map<int, Entry> entries;  // student_group_id -> entry

    static DemographicCatalog builtin();  // 2023 statewide research-file groups
    static DemographicCatalog from_file(const std::string& path);  // csv: id,dimension,label,share

    // Checks per-dimension share sums against 1.0 +/- 0.01. Real vintages
    // publish non-exhaustive race categories, so the default is to return
    // the violations as warnings; strict mode throws instead.
    std::vector<std::string> validate(bool strict = false) const;
    std::set<int> ids() const;
};

struct GroupShare {
    std::string label;
    double share = 0.0;
    long students = 0;
};

struct GroupSummary {
    std::map<Dimension, std::vector<GroupShare>> dimensions;
    long uncataloged_students = 0;
    std::set<int> uncataloged_ids;

    std::string to_csv() const;  // dimension,label,share
};

// Share of students_tested per label within each dimension; unknown group ids
// land in the uncataloged bucket, never dropped silently.
GroupSummary summarize_groups(const std::vector<CaasppRecord>& records,
                              const DemographicCatalog& catalog);

}  // namespace majoraudit::caaspp
