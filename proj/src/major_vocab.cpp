#include "majoraudit/major_vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace majoraudit::vocab {

StemLexicon StemLexicon::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open STEM lexicon: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    StemLexicon lex = from_csv_text(ss.str());
    lex.source_hash = hash_hex(fnv1a64(ss.str()));
    return lex;
}

StemLexicon StemLexicon::from_csv_text(const std::string& text) {
    StemLexicon lex;
    lex.source_hash = hash_hex(fnv1a64(text));
    std::size_t lineno = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos)
            throw ValidationError("lexicon line " + std::to_string(lineno) +
                                  ": expected name,stem");
        const std::string name = normalize_name(line.substr(0, comma));
        const std::string flag_text = to_lower(trim(line.substr(comma + 1)));
        if (lineno == 1 && name == "name" && flag_text == "stem") continue;  // header
        bool stem;
        if (flag_text == "true" || flag_text == "1")
            stem = true;
        else if (flag_text == "false" || flag_text == "0")
            stem = false;
        else
            throw ValidationError("lexicon line " + std::to_string(lineno) +
                                  ": stem flag must be true/false, got \"" + flag_text + "\"");
        auto it = lex.flags.find(name);
        if (it != lex.flags.end()) {
            if (it->second != stem)
                throw ValidationError("lexicon: \"" + name +
                                      "\" appears on both the STEM and non-STEM lists");
            lex.warnings.push_back("lexicon: duplicate entry for \"" + name + "\"");
            continue;
        }
        lex.flags[name] = stem;
    }
    return lex;
}

std::optional<bool> StemLexicon::lookup(const std::string& name) const {
    auto it = flags.find(normalize_name(name));
    if (it == flags.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> StemLexicon::stem_names() const {
    std::vector<std::string> out;
    for (const auto& [name, stem] : flags)
        if (stem) out.push_back(name);
    return out;
}

std::vector<std::string> StemLexicon::non_stem_names() const {
    std::vector<std::string> out;
    for (const auto& [name, stem] : flags)
        if (!stem) out.push_back(name);
    return out;
}

bool stem_flag(const std::string& canonical_name, const StemLexicon& lexicon,
               std::vector<std::string>* warnings) {
    const auto found = lexicon.lookup(canonical_name);
    if (found) return *found;
    if (warnings)
        warnings->push_back("major \"" + canonical_name +
                            "\" not in the STEM lexicon; classified non-STEM");
    return false;
}

std::vector<bool> MajorVocabulary::stem_flags() const {
    std::vector<bool> flags(majors.size());
    for (std::size_t i = 0; i < majors.size(); ++i) flags[i] = majors[i].stem;
    return flags;
}

std::string MajorVocabulary::hash_hex() const {
    std::string packed;
    for (const Entry& e : majors) {
        packed += e.name;
        packed += e.stem ? "\t1\n" : "\t0\n";
    }
    return majoraudit::hash_hex(fnv1a64(packed));
}

std::int32_t canonicalize(const std::string& raw, MajorVocabulary& vocab, CanonMode mode,
                          const StemLexicon& lexicon, std::vector<std::string>* warnings) {
    const std::string name = normalize_name(raw);
    if (name.empty()) throw ParseError("canonicalize: empty major name");
    auto it = vocab.index.find(name);
    if (it != vocab.index.end()) return it->second;
    if (mode == CanonMode::extend) {
        const auto id = static_cast<std::int32_t>(vocab.majors.size());
        vocab.majors.push_back({name, stem_flag(name, lexicon, warnings)});
        vocab.index[name] = id;
        return id;
    }
    // strict miss: offer near matches as diagnostics
    std::vector<std::pair<std::size_t, std::string>> near;
    for (const auto& [known, id] : vocab.index) {
        const std::size_t d = levenshtein(name, known);
        if (d <= 2) near.emplace_back(d, known);
    }
    std::sort(near.begin(), near.end());
    std::vector<std::string> suggestions;
    std::string msg = "unknown major \"" + name + "\"";
    if (!near.empty()) {
        msg += "; did you mean:";
        for (const auto& [d, known] : near) {
            suggestions.push_back(known);
            msg += " \"" + known + "\"";
        }
    }
    throw UnknownMajorError(msg, std::move(suggestions));
}

std::set<std::int32_t> RecommendationSet::id_set() const {
    return std::set<std::int32_t>(ids.begin(), ids.end());
}

std::vector<std::string> parse_recommendations(const std::string& text) {
    struct Item {
        long number;
        std::string name;
    };
    std::vector<Item> items;
    for (const std::string& raw : split(text, '\n')) {
        std::string_view line(raw);
        std::size_t pos = 0;
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        std::size_t digits = pos;
        while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
        if (digits == pos) continue;  // no leading number: prose line
        std::size_t sep = digits;
        while (sep < line.size() && line[sep] == ' ') ++sep;
        if (sep >= line.size() || (line[sep] != '.' && line[sep] != ')' && line[sep] != '-'))
            continue;
        const std::string name = trim(line.substr(sep + 1));
        if (name.empty()) continue;
        items.push_back({std::stol(std::string(line.substr(pos, digits - pos))), name});
    }
    if (items.size() != 10)
        throw MalformedResponseError(
            "expected 10 numbered recommendations, found " + std::to_string(items.size()), text);
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.number < b.number; });
    for (std::size_t i = 0; i < 10; ++i) {
        if (items[i].number != static_cast<long>(i) + 1)
            throw MalformedResponseError("recommendation numbering is not contiguous 1..10",
                                         text);
    }
    std::vector<std::string> names;
    names.reserve(10);
    for (const Item& item : items) names.push_back(item.name);
    return names;
}

std::string format_numbered(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += std::to_string(i + 1);
        out += ". ";
        out += names[i];
        out += '\n';
    }
    return out;
}

}  // namespace majoraudit::vocab
