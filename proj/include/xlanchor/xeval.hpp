#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <string>
#include <vector>

#include "xlanchor/linear_align.hpp"
#include "xlanchor/matrix.hpp"
#include "xlanchor/vecstore.hpp"

namespace xlanchor {

struct GanModel;

// Candidates ranked by descending cosine similarity, ties by table order.
// A zero-norm query (or candidate) has similarity 0 against everything.
std::vector<std::size_t> knn_cosine(std::span<const double> query, const Matrix& candidates, std::size_t k);
std::vector<std::string> knn_cosine(std::span<const double> query, const EmbeddingTable& candidates, std::size_t k);

// Row-wise cosine similarity matrix (queries x candidates).
Matrix cosine_similarities(const Matrix& queries, const Matrix& candidates);

// 0-based position the gold candidate takes in each query's ranking.
std::vector<std::size_t> gold_ranks(const Matrix& queries, std::span<const std::size_t> gold, const Matrix& candidates);

struct LabeledQuery {
  Vector vector;
  std::string gold;
};

struct PrecisionResult {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::vector<std::string> missing_gold;  // queries excluded because gold is not a candidate
};

PrecisionResult precision_at_k(std::span<const LabeledQuery> queries, const EmbeddingTable& candidates, std::size_t k);

enum class EvalDirection { a_to_b, b_to_a, both };
const char* to_string(EvalDirection d);

struct EvalEntry {
  std::string metric;     // precision@1, precision@5, precision@10, induction_avg, accuracy@1
  std::string direction;  // a_to_b, b_to_a, both
  double value = 0.0;
};

struct QueryDiagnostic {
  std::string direction;
  std::string query;
  std::string gold;
  std::size_t gold_rank = 0;
  std::vector<std::string> retrieved;  // top 10
};

struct EvalReport {
  std::vector<EvalEntry> values;
  std::vector<QueryDiagnostic> per_query;

  std::optional<double> value(const std::string& metric, const std::string& direction) const;
};

// "metric\tdirection\tvalue" lines.
void write_report(std::ostream& out, const EvalReport& report);
// "direction\tquery\tgold\tgold_rank\ttop1 top2 ..." lines.
void write_per_query(std::ostream& out, const EvalReport& report);
EvalReport read_report(std::istream& in, const std::string& name = "<stream>");

using Mapper = std::function<Matrix(const Matrix&)>;

// Dictionary induction on an evaluation split. Queries are the records'
// vectors; candidates are the split's unique lemmas on the other side with
// vectors averaged over their occurrences. The caller supplies the four
// projections into the comparison space of each direction.
struct InductionMaps {
  Mapper query_a;      // a vectors as queries (a -> b)
  Mapper candidate_b;  // b lemma vectors as candidates (a -> b)
  Mapper query_b;      // b vectors as queries (b -> a)
  Mapper candidate_a;  // a lemma vectors as candidates (b -> a)
};

EvalReport induction_score(const AnchorDataset& eval_ds, const InductionMaps& maps, bool per_query = false);
EvalReport induction_score(const LinearMapModel& model, const AnchorDataset& eval_ds, bool per_query = false);
EvalReport induction_score(const GanModel& model, const AnchorDataset& eval_ds, bool per_query = false);

// Mean of p@1, p@5, p@10 over both directions. Uses the report's induction_avg
// entry when present (exact: total hits / 6n).
double induction_average(const EvalReport& report);

struct TermEntry {
  std::string term;  // one or more space-separated words
  std::optional<Vector> vector;
};

// One term per line; '#' lines and blank lines are skipped.
std::vector<TermEntry> read_terms(std::istream& in, const std::string& name = "<stream>");
std::vector<TermEntry> load_terms(const std::string& path);

// Builds term vectors from a corpus (concatenated layers, exact surface
// match) with an optional static table for words absent from the corpus.
class TermVectorizer {
 public:
  TermVectorizer(const ContextCorpus& corpus, const EmbeddingTable* static_table = nullptr);

  std::size_t dim() const noexcept { return dim_; }
  // Throws ErrorKind::validation naming the term when it has no coverage.
  Vector term_vector(const TermEntry& term);
  std::optional<Vector> word_vector(const std::string& word);

 private:
  const ContextCorpus& corpus_;
  const EmbeddingTable* static_table_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> occurrences_;
  std::unordered_map<std::string, std::optional<Vector>> word_cache_;
};

Vector term_vector(const TermEntry& term, const ContextCorpus& corpus, const EmbeddingTable* static_table = nullptr);

// accuracy@1: term i of the source list counts as aligned when its mapped
// vector is closest (cosine) to term i of the target list.
EvalReport terminology_accuracy(const Matrix& src_vectors, const Matrix& trg_vectors, const Mapper& a_to_b,
                                const Mapper& b_to_a, EvalDirection direction);

// Maps each column block with its own mapper and re-concatenates; used to
// apply per-layer models to concatenated layer vectors.
Mapper sliced_mapper(std::vector<std::size_t> widths, std::vector<Mapper> parts);

}  // namespace xlanchor
