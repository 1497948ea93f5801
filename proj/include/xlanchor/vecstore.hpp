#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xlanchor/matrix.hpp"

namespace xlanchor {

inline constexpr std::size_t kLayers = 3;

// Static vectors keyed by token. Row i of `vectors` belongs to tokens[i].
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> tokens, Matrix vectors);

  std::size_t dim() const noexcept { return vectors_.cols(); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::optional<std::size_t> find(const std::string& token) const;

  bool operator==(const EmbeddingTable& o) const { return tokens_ == o.tokens_ && vectors_ == o.vectors_; }

 private:
  std::vector<std::string> tokens_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LayeredTokenEmbedding {
  std::string surface;
  std::string lemma;
  std::array<Vector, kLayers> layers;

  bool operator==(const LayeredTokenEmbedding&) const = default;
};

struct Context {
  std::int64_t id = 0;
  std::vector<LayeredTokenEmbedding> tokens;

  bool operator==(const Context&) const = default;
};

struct ContextCorpus {
  std::array<std::size_t, kLayers> dims{};
  std::vector<Context> contexts;

  bool operator==(const ContextCorpus&) const = default;
};

struct AnchorRecord {
  std::int64_t context_id = 0;
  std::string lemma_a;
  std::string lemma_b;
  Vector vec_a;
  Vector vec_b;

  bool operator==(const AnchorRecord&) const = default;
};

struct AnchorDataset {
  int layer = 0;
  std::string lang_a = "a";
  std::string lang_b = "b";
  std::size_t dim = 0;
  std::vector<AnchorRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  // Stacked vec_a / vec_b rows.
  Matrix side_a() const;
  Matrix side_b() const;

  bool operator==(const AnchorDataset&) const = default;
};

enum class Provenance : std::uint8_t { direct, triangulated, external };

// Set of (lemma_a, lemma_b) pairs, kept sorted and unique.
struct BilingualDictionary {
  std::string lang_a;
  std::string lang_b;
  Provenance provenance = Provenance::direct;
  std::vector<std::pair<std::string, std::string>> pairs;

  void normalize();  // sort + dedupe
  bool operator==(const BilingualDictionary&) const = default;
};

// Embedding text: "N D" header, then N lines "token v1 ... vD".
EmbeddingTable read_embeddings(std::istream& in, const std::string& name = "<stream>");
EmbeddingTable load_embeddings(const std::string& path);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

// Context corpus: "XLANCHOR-CTX 1 d0 d1 d2", then per context "#<id> <n>"
// followed by n lines "surface\tlemma\tv(d0)\tv(d1)\tv(d2)".
ContextCorpus read_context_corpus(std::istream& in, const std::string& name = "<stream>");
ContextCorpus load_context_corpus(const std::string& path);
void write_context_corpus(std::ostream& out, const ContextCorpus& corpus);
void save_context_corpus(const ContextCorpus& corpus, const std::string& path);

// Anchor pairs: "XLANCHOR-PAIRS 1 <dim> <lang_a> <lang_b> <layer>", then
// "context_id\tlemma_a\tlemma_b\tvecA\tvecB".
AnchorDataset read_anchor_dataset(std::istream& in, const std::string& name = "<stream>");
AnchorDataset load_anchor_dataset(const std::string& path);
void write_anchor_dataset(std::ostream& out, const AnchorDataset& ds);
void save_anchor_dataset(const AnchorDataset& ds, const std::string& path);

// Dictionary: "lemma_a\tlemma_b" per line; lines starting with '#' are
// comments. A comment "#langs <a> <b>" records the language codes.
BilingualDictionary read_dictionary(std::istream& in, const std::string& name = "<stream>");
BilingualDictionary load_dictionary(const std::string& path);
void write_dictionary(std::ostream& out, const BilingualDictionary& dict);
void save_dictionary(const BilingualDictionary& dict, const std::string& path);

// layer0 || layer1 || layer2
Vector concat_layers(const LayeredTokenEmbedding& token);

// Scales each nonzero row to unit L2 norm; zero rows are left as is.
void l2_normalize_rows(Matrix& m);
Vector l2_normalized(std::span<const double> v);

// Decimal form used by all text writers: the value rounded to 32-bit and
// printed with 9 significant digits.
std::string format_value(double v);

}  // namespace xlanchor
