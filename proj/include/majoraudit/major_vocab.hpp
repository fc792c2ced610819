#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "majoraudit/common.hpp"

namespace majoraudit::vocab {

// Response text did not contain a well-formed 10-item numbered list.
class MalformedResponseError : public ParseError {
public:
    MalformedResponseError(const std::string& msg, std::string raw)
        : ParseError(msg), raw_text(std::move(raw)) {}
    std::string raw_text;
};

// Strict-mode canonicalization miss; suggestions are normalized names within
// edit distance 2, diagnostics only.
class UnknownMajorError : public ParseError {
public:
    UnknownMajorError(const std::string& msg, std::vector<std::string> sugg)
        : ParseError(msg), suggestions(std::move(sugg)) {}
    std::vector<std::string> suggestions;
};

// STEM/non-STEM classification, loaded from an editable CSV (name,stem).
// Conflicting duplicate entries fail at load; the file hash is recorded so
// reports can pin the classification they used.
struct StemLexicon {
    std::map<std::string, bool> flags;  // normalized name -> stem
    std::string source_hash;
    std::vector<std::string> warnings;

    static StemLexicon from_file(const std::string& path);
    static StemLexicon from_csv_text(const std::string& text);

    std::optional<bool> lookup(const std::string& name) const;
    std::vector<std::string> stem_names() const;
    std::vector<std::string> non_stem_names() const;
};

// Lexicon lookup with the default rule: unlisted majors are non-STEM and a
// warning is recorded.
bool stem_flag(const std::string& canonical_name, const StemLexicon& lexicon,
               std::vector<std::string>* warnings);

struct MajorVocabulary {
    struct Entry {
        std::string name;  // canonical (normalized) form
        bool stem = false;
    };
    std::vector<Entry> majors;                   // id-indexed, dense 0..k-1
    std::map<std::string, std::int32_t> index;   // canonical name -> id

    std::size_t size() const { return majors.size(); }
    std::vector<bool> stem_flags() const;
    // binds derived artifacts (cost matrices, reports) to this exact vocabulary
    std::string hash_hex() const;
};

enum class CanonMode { strict, extend };

// Normalize `raw` and resolve it to a vocabulary id. In extend mode a novel
// major is appended with its STEM flag taken from the lexicon.
std::int32_t canonicalize(const std::string& raw, MajorVocabulary& vocab, CanonMode mode,
                          const StemLexicon& lexicon,
                          std::vector<std::string>* warnings = nullptr);

struct RecommendationSet {
    std::array<std::int32_t, 10> ids{};  // rank 1 first
    bool duplicate_flagged = false;
    std::size_t provenance = 0;  // index of the source response in its batch

    std::set<std::int32_t> id_set() const;
};

// Extract the ten `<int>. <name>` lines (also tolerating `)` or `-`
// separators and leading whitespace), ordered by printed number. Throws
// MalformedResponseError unless the numbers are exactly 1..10.
std::vector<std::string> parse_recommendations(const std::string& text);

// Inverse of parse_recommendations for well-formed inputs.
std::string format_numbered(const std::vector<std::string>& names);

}  // namespace majoraudit::vocab
