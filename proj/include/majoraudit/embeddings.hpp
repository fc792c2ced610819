#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "majoraudit/common.hpp"
#include "majoraudit/major_vocab.hpp"

namespace majoraudit::embed {

// Raised when every token of a major name is out of vocabulary; the major is
// excluded from Wasserstein computations upstream.
class EmbeddingMissError : public Error {
public:
    using Error::Error;
};

struct EmbeddingTable {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;  // token (lower-cased) -> vector
    std::vector<std::string> warnings;                    // duplicate tokens etc.
    std::string source_hash;
};

// word2vec text format: header "count dim", then "token v1 .. v_dim" lines.
// Binary format: same header line, then per entry "token " followed by dim
// IEEE-754 little-endian floats. The format is autodetected from the bytes
// after the header (binary floats contain control bytes that never occur in
// the text encoding).
EmbeddingTable load_embeddings(const std::string& path);
EmbeddingTable load_embeddings_text(std::istream& in);
EmbeddingTable load_embeddings_binary(std::istream& in);

// Mean of in-vocabulary token vectors; tokens missing from the table are
// skipped with a warning. Throws EmbeddingMissError if nothing matched.
std::vector<double> major_vector(const std::string& name, const EmbeddingTable& table,
                                 std::vector<std::string>* warnings = nullptr);

// cost = clamp(1 - cosine(a, b), 0, 1); throws ValidationError on zero-norm.
double semantic_cost(const std::vector<double>& a, const std::vector<double>& b);
double semantic_cost(std::int32_t a, std::int32_t b, const vocab::MajorVocabulary& vocab,
                     const EmbeddingTable& table);

struct CostMatrix {
    std::size_t k = 0;
    std::vector<double> cost;  // row-major k by k
    std::string vocab_hash;

    double at(std::size_t i, std::size_t j) const { return cost[i * k + j]; }
    std::string hash_hex() const;
    std::string to_csv(const vocab::MajorVocabulary& vocab) const;
};

// Strict contract: every vocabulary major must have an embedding vector.
CostMatrix build_cost_matrix(const vocab::MajorVocabulary& vocab, const EmbeddingTable& table);

// Pipeline variant: majors with no embeddable token are excluded (their rows
// and columns are zero and their ids reported) instead of failing the run.
CostMatrix build_cost_matrix_masked(const vocab::MajorVocabulary& vocab,
                                    const EmbeddingTable& table,
                                    std::vector<std::int32_t>* excluded_ids,
                                    std::vector<std::string>* warnings = nullptr);

}  // namespace majoraudit::embed
