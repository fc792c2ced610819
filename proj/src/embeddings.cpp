#include "majoraudit/embeddings.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace majoraudit::embed {

namespace {

std::pair<std::size_t, std::size_t> parse_header(const std::string& line) {
    std::istringstream ss(line);
    long long count = -1, dim = -1;
    ss >> count >> dim;
    if (count <= 0 || dim <= 0)
        throw ParseError("embedding file: bad header, expected \"count dim\", got \"" + line +
                         "\"");
    return {static_cast<std::size_t>(count), static_cast<std::size_t>(dim)};
}

}  // namespace

EmbeddingTable load_embeddings_text(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || trim(header).empty())
        throw ParseError("embedding file: empty input");
    const auto [count, dim] = parse_header(header);

    EmbeddingTable table;
    table.dim = dim;
    std::string line;
    for (std::size_t entry = 0; entry < count; ++entry) {
        if (!std::getline(in, line))
            throw ParseError("embedding file: expected " + std::to_string(count) +
                             " entries, file ended after " + std::to_string(entry));
        const std::size_t lineno = entry + 2;
        std::istringstream ss(line);
        std::string token;
        if (!(ss >> token))
            throw ParseError("embedding file line " + std::to_string(lineno) + ": empty line");
        std::vector<double> vec;
        vec.reserve(dim);
        double value;
        while (ss >> value) vec.push_back(value);
        if (vec.size() != dim)
            throw ParseError("embedding file line " + std::to_string(lineno) + ": expected " +
                             std::to_string(dim) + " values, got " + std::to_string(vec.size()));
        token = to_lower(token);
        if (table.vectors.count(token))
            table.warnings.push_back("duplicate token \"" + token + "\" (last entry wins)");
        table.vectors[token] = std::move(vec);
    }
    return table;
}

EmbeddingTable load_embeddings_binary(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || trim(header).empty())
        throw ParseError("embedding file: empty input");
    const auto [count, dim] = parse_header(header);

    EmbeddingTable table;
    table.dim = dim;
    std::vector<float> buf(dim);
    for (std::size_t entry = 0; entry < count; ++entry) {
        std::string token;
        char c;
        while (in.get(c) && (c == '\n' || c == ' ' || c == '\r')) {
        }
        if (!in)
            throw ParseError("embedding file: expected " + std::to_string(count) +
                             " entries, stream ended after " + std::to_string(entry));
        do {
            token.push_back(c);
        } while (in.get(c) && c != ' ');
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
        if (static_cast<std::size_t>(in.gcount()) != dim * sizeof(float))
            throw ParseError("embedding file: truncated vector for token \"" + token + "\"");
        std::vector<double> vec(dim);
        for (std::size_t d = 0; d < dim; ++d) vec[d] = static_cast<double>(buf[d]);
        token = to_lower(token);
        if (table.vectors.count(token))
            table.warnings.push_back("duplicate token \"" + token + "\" (last entry wins)");
        table.vectors[token] = std::move(vec);
    }
    return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open embedding file: " + path);
    std::string header;
    std::getline(probe, header);
    // text encodes only printable characters and whitespace after the header;
    // packed float32 bytes almost surely contain low control bytes
    char chunk[4096];
    probe.read(chunk, sizeof(chunk));
    const std::streamsize got = probe.gcount();
    bool binary = false;
    for (std::streamsize i = 0; i < got; ++i) {
        const unsigned char b = static_cast<unsigned char>(chunk[i]);
        if (b < 0x09 || (b > 0x0d && b < 0x20)) {
            binary = true;
            break;
        }
    }
    std::ifstream in(path, std::ios::binary);
    EmbeddingTable table = binary ? load_embeddings_binary(in) : load_embeddings_text(in);
    table.source_hash = file_hash_hex(path);
    return table;
}

std::vector<double> major_vector(const std::string& name, const EmbeddingTable& table,
                                 std::vector<std::string>* warnings) {
    const std::string normalized = normalize_name(name);
    std::vector<double> mean(table.dim, 0.0);
    std::size_t matched = 0;
    for (const std::string& token : split(normalized, ' ')) {
        if (token.empty()) continue;
        auto it = table.vectors.find(token);
        if (it == table.vectors.end()) {
            if (warnings)
                warnings->push_back("token \"" + token + "\" of major \"" + normalized +
                                    "\" missing from the embedding table");
            continue;
        }
        for (std::size_t d = 0; d < table.dim; ++d) mean[d] += it->second[d];
        ++matched;
    }
    if (matched == 0)
        throw EmbeddingMissError("no embeddable token in major \"" + normalized + "\"");
    for (double& x : mean) x /= static_cast<double>(matched);
    return mean;
}

double semantic_cost(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("semantic_cost: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        dot += a[d] * b[d];
        na += a[d] * a[d];
        nb += b[d] * b[d];
    }
    if (na == 0.0 || nb == 0.0)
        throw ValidationError("semantic_cost: zero-norm embedding vector");
    const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::min(1.0, std::max(0.0, 1.0 - cosine));
}

double semantic_cost(std::int32_t a, std::int32_t b, const vocab::MajorVocabulary& vocab,
                     const EmbeddingTable& table) {
    if (a == b) return 0.0;
    const auto check = [&](std::int32_t id) -> const std::string& {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
            throw ValidationError("semantic_cost: id " + std::to_string(id) +
                                  " outside vocabulary");
        return vocab.majors[static_cast<std::size_t>(id)].name;
    };
    return semantic_cost(major_vector(check(a), table), major_vector(check(b), table));
}

std::string CostMatrix::hash_hex() const {
    std::string packed = vocab_hash;
    char buf[40];
    for (double c : cost) {
        std::snprintf(buf, sizeof(buf), "%.17g,", c);
        packed += buf;
    }
    return majoraudit::hash_hex(fnv1a64(packed));
}

std::string CostMatrix::to_csv(const vocab::MajorVocabulary& vocab) const {
    std::string out = "major";
    for (std::size_t j = 0; j < k; ++j) out += "," + vocab.majors[j].name;
    out += '\n';
    char buf[40];
    for (std::size_t i = 0; i < k; ++i) {
        out += vocab.majors[i].name;
        for (std::size_t j = 0; j < k; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.9g", at(i, j));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

namespace {

CostMatrix build_matrix(const vocab::MajorVocabulary& vocab, const EmbeddingTable& table,
                        bool masked, std::vector<std::int32_t>* excluded_ids,
                        std::vector<std::string>* warnings) {
    const std::size_t k = vocab.size();
    CostMatrix matrix;
    matrix.k = k;
    matrix.vocab_hash = vocab.hash_hex();
    matrix.cost.assign(k * k, 0.0);

    std::vector<std::vector<double>> vectors(k);
    std::vector<bool> have(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        try {
            vectors[i] = major_vector(vocab.majors[i].name, table, warnings);
            have[i] = true;
        } catch (const EmbeddingMissError&) {
            if (!masked) throw;
            if (excluded_ids) excluded_ids->push_back(static_cast<std::int32_t>(i));
            if (warnings)
                warnings->push_back("major \"" + vocab.majors[i].name +
                                    "\" has no embedding; excluded from Wasserstein costs");
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (!have[i]) continue;
        for (std::size_t j = i + 1; j < k; ++j) {
            if (!have[j]) continue;
            const double c = semantic_cost(vectors[i], vectors[j]);
            matrix.cost[i * k + j] = c;
            matrix.cost[j * k + i] = c;
        }
    }
    return matrix;
}

}  // namespace

CostMatrix build_cost_matrix(const vocab::MajorVocabulary& vocab, const EmbeddingTable& table) {
    return build_matrix(vocab, table, false, nullptr, nullptr);
}

CostMatrix build_cost_matrix_masked(const vocab::MajorVocabulary& vocab,
                                    const EmbeddingTable& table,
                                    std::vector<std::int32_t>* excluded_ids,
                                    std::vector<std::string>* warnings) {
    return build_matrix(vocab, table, true, excluded_ids, warnings);
}

}  // namespace majoraudit::embed
