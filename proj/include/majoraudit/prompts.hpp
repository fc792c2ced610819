#pragma once

#include <string>
#include <vector>

#include "majoraudit/caaspp.hpp"
#include "majoraudit/common.hpp"
#include "majoraudit/config.hpp"

namespace majoraudit::prompts {

using caaspp::Dimension;

enum class Gender { male, female, lgbtq_plus, unspecified };
enum class Race {
    american_indian_alaskan_native,
    asian,
    black_african_american,
    filipino,
    hispanic_latino,
    native_hawaiian_pacific_islander,
    white,
    unspecified
};
enum class Ses { disadvantaged, not_disadvantaged, unspecified };

// One audit subject: "unspecified" is a legal value on every demographic
// dimension and is what the baseline group uses.
struct StudentProfile {
    Gender gender = Gender::unspecified;
    Race race = Race::unspecified;
    Ses ses = Ses::unspecified;
    int score_percentile = 50;  // standard score percentile, higher is better

    void validate() const;
    bool is_baseline() const;
    // the single non-unspecified token, or "baseline"
    std::string group_token() const;
    bool operator==(const StudentProfile&) const = default;
};

// config/report token <-> enum mappings; tokens are unique across dimensions
std::string gender_token(Gender g);
std::string race_token(Race r);
std::string ses_token(Ses s);
Gender gender_from_token(const std::string& token);
Race race_from_token(const std::string& token);
Ses ses_from_token(const std::string& token);

// prompt-facing display text; unspecified renders as "N/A"
std::string gender_display(Gender g);
std::string race_display(Race r);
std::string ses_display(Ses s);

// A single varied demographic value (the other two dimensions stay
// unspecified under the one-at-a-time design).
struct DemographicValue {
    Dimension dimension = Dimension::gender;
    int code = 0;  // enum value within the dimension

    std::string token() const;
    std::string display() const;
    std::string sort_key() const;  // "<dimension>/<token>"
    void apply(StudentProfile& profile) const;

    static DemographicValue from_token(const std::string& token);
    // the twelve varied values: 3 gender + 2 ses + 7 race
    static std::vector<DemographicValue> all();

    bool operator==(const DemographicValue&) const = default;
};

struct ScoreBracket {
    int lo = 1;    // inclusive
    int hi = 100;  // inclusive
    std::string label;

    bool contains(int percentile) const { return percentile >= lo && percentile <= hi; }
    bool operator==(const ScoreBracket&) const = default;
};

// brackets must be valid ranges, disjoint, and cover [1,100]
void validate_scheme(const std::vector<ScoreBracket>& scheme);

std::vector<ScoreBracket> quintile_scheme();
std::vector<ScoreBracket> decile_scheme();
// "quintiles", "deciles", or an explicit "1-20,21-40,..." list
std::vector<ScoreBracket> scheme_from_spec(const std::string& spec);

struct Cell {
    ScoreBracket bracket;
    // the varied values, one per distinct dimension; the default audit design
    // varies one value at a time, the full-cross extension fixes all three
    std::vector<DemographicValue> values;

    std::string key() const;  // "<bracket label>|<sorted value tokens>"
    // "gender" / "ses" / "race" for single-value cells, "cross" otherwise
    std::string dimension_label() const;
    std::string value_token() const;  // tokens joined with '+'
    void apply(StudentProfile& profile) const;
};

// The bracket x value audit matrix of the one-at-a-time design, ordered
// lexicographically by (bracket label, dimension/value token); each cell
// fixes exactly one value and leaves the other two dimensions unspecified.
// Validates the scheme.
std::vector<Cell> enumerate_cells(const std::vector<ScoreBracket>& scheme,
                                  const std::vector<DemographicValue>& values);

// Full-cross extension: every fully specified (gender, ses, race) triple per
// bracket (42 cells per bracket), same ordering rule.
std::vector<Cell> enumerate_cells_cross(const std::vector<ScoreBracket>& scheme);

// n profiles with percentiles uniform over the cell's bracket, the varied
// value applied, and everything else unspecified; deterministic under seed.
std::vector<StudentProfile> sample_profiles(const Cell& cell, std::size_t n,
                                            std::uint64_t seed);

// the paired comparison subject: same percentile, varied dimension unset
StudentProfile baseline_of(const StudentProfile& profile);

struct PromptTemplate {
    std::string system_text;        // recommender persona and output contract
    std::string student_info_text;  // {percentile} {race} {gender} {ses}

    static PromptTemplate builtin();
    // text with [system] and [student_info] sections
    static PromptTemplate from_text(const std::string& text);
    static PromptTemplate from_file(const std::string& path);

    std::string hash_hex() const;
};

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;

    std::string full_text() const { return system_text + "\n\n" + user_text; }
};

// Substitutes every placeholder. {percentile} renders as the top-share
// (101 - score_percentile) to match the template's "scored in the top N%"
// phrasing; unspecified demographics render as "N/A". A placeholder with no
// value is a template error.
RenderedPrompt render_prompt(const StudentProfile& profile, const PromptTemplate& tmpl);

}  // namespace majoraudit::prompts
