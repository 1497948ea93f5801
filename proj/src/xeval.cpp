#include "xlanchor/xeval.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "textio.hpp"
#include "xlanchor/error.hpp"
#include "xlanchor/gan.hpp"

namespace xlanchor {

namespace {

Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  l2_normalize_rows(out);
  return out;
}

// Unique lemmas in first-appearance order with their mean vectors.
struct Vocabulary {
  std::vector<std::string> names;
  Matrix vectors;
  std::unordered_map<std::string, std::size_t> index;
};

Vocabulary vocabulary(const AnchorDataset& ds, bool side_a) {
  Vocabulary v;
  std::vector<Vector> sums;
  std::vector<std::size_t> counts;
  for (const auto& r : ds.records) {
    const std::string& name = side_a ? r.lemma_a : r.lemma_b;
    const Vector& vec = side_a ? r.vec_a : r.vec_b;
    auto [it, fresh] = v.index.emplace(name, v.names.size());
    if (fresh) {
      v.names.push_back(name);
      sums.emplace_back(ds.dim, 0.0);
      counts.push_back(0);
    }
    Vector& s = sums[it->second];
    for (std::size_t i = 0; i < ds.dim; ++i) s[i] += vec[i];
    ++counts[it->second];
  }
  v.vectors = Matrix(v.names.size(), ds.dim);
  for (std::size_t i = 0; i < v.names.size(); ++i)
    for (std::size_t c = 0; c < ds.dim; ++c) v.vectors(i, c) = sums[i][c] / static_cast<double>(counts[i]);
  return v;
}

std::vector<std::size_t> ranked(std::span<const double> sims, std::size_t k) {
  std::vector<std::size_t> idx(sims.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](std::size_t a, std::size_t b) {
    return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

// Returns the hit count summed over k.
std::size_t add_precisions(EvalReport& rep, const char* direction, std::span<const std::size_t> ranks) {
  std::size_t total = 0;
  for (std::size_t k : {1, 5, 10}) {
    const auto hits = static_cast<std::size_t>(std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r < k; }));
    total += hits;
    rep.values.push_back({"precision@" + std::to_string(k), direction,
                          ranks.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(ranks.size())});
  }
  return total;
}

void add_diagnostics(EvalReport& rep, const char* direction, const std::vector<std::string>& queries,
                     const std::vector<std::string>& candidates, const Matrix& sims, std::span<const std::size_t> gold,
                     std::span<const std::size_t> ranks) {
  for (std::size_t r = 0; r < sims.rows(); ++r) {
    QueryDiagnostic d{direction, queries[r], candidates[gold[r]], ranks[r], {}};
    for (std::size_t j : ranked(sims.row(r), 10)) d.retrieved.push_back(candidates[j]);
    rep.per_query.push_back(std::move(d));
  }
}

}  // namespace

const char* to_string(EvalDirection d) {
  switch (d) {
    case EvalDirection::a_to_b: return "a_to_b";
    case EvalDirection::b_to_a: return "b_to_a";
    case EvalDirection::both: return "both";
  }
  return "both";
}

Matrix cosine_similarities(const Matrix& queries, const Matrix& candidates) {
  if (queries.cols() != candidates.cols())
    throw_error(ErrorKind::shape, "cosine_similarities: query dimension " + std::to_string(queries.cols()) +
                                      " vs candidate dimension " + std::to_string(candidates.cols()));
  return matmul_nt(unit_rows(queries), unit_rows(candidates));
}

std::vector<std::size_t> knn_cosine(std::span<const double> query, const Matrix& candidates, std::size_t k) {
  require(k >= 1, ErrorKind::validation, "knn_cosine: k must be at least 1");
  const Matrix q(1, query.size(), Vector(query.begin(), query.end()));
  const Matrix sims = cosine_similarities(q, candidates);
  return ranked(sims.row(0), k);
}

std::vector<std::string> knn_cosine(std::span<const double> query, const EmbeddingTable& candidates, std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i : knn_cosine(query, candidates.vectors(), k)) out.push_back(candidates.tokens()[i]);
  return out;
}

std::vector<std::size_t> gold_ranks(const Matrix& queries, std::span<const std::size_t> gold, const Matrix& candidates) {
  if (gold.size() != queries.rows()) throw_error(ErrorKind::shape, "gold_ranks: one gold index per query required");
  const Matrix sims = cosine_similarities(queries, candidates);
  std::vector<std::size_t> ranks(queries.rows());
  for (std::size_t r = 0; r < queries.rows(); ++r) {
    const std::size_t g = gold[r];
    if (g >= candidates.rows()) throw_error(ErrorKind::validation, "gold_ranks: gold index out of range");
    const auto row = sims.row(r);
    const double gs = row[g];
    std::size_t rank = 0;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] > gs || (row[j] == gs && j < g)) ++rank;
    ranks[r] = rank;
  }
  return ranks;
}

PrecisionResult precision_at_k(std::span<const LabeledQuery> queries, const EmbeddingTable& candidates, std::size_t k) {
  require(k >= 1, ErrorKind::validation, "precision_at_k: k must be at least 1");
  PrecisionResult res;
  std::vector<Vector> rows;
  std::vector<std::size_t> gold;
  for (const auto& q : queries) {
    const auto g = candidates.find(q.gold);
    if (!g) {
      res.missing_gold.push_back(q.gold);
      continue;
    }
    if (q.vector.size() != candidates.dim()) throw_error(ErrorKind::shape, "precision_at_k: query dimension mismatch");
    rows.push_back(q.vector);
    gold.push_back(*g);
  }
  res.evaluated = rows.size();
  if (rows.empty()) return res;
  const auto ranks = gold_ranks(Matrix::from_rows(rows), gold, candidates.vectors());
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r < k; });
  res.value = static_cast<double>(hits) / static_cast<double>(ranks.size());
  return res;
}

std::optional<double> EvalReport::value(const std::string& metric, const std::string& direction) const {
  for (const auto& e : values)
    if (e.metric == metric && e.direction == direction) return e.value;
  return std::nullopt;
}

void write_report(std::ostream& out, const EvalReport& report) {
  for (const auto& e : report.values) out << e.metric << '\t' << e.direction << '\t' << detail::format_double(e.value) << '\n';
}

void write_per_query(std::ostream& out, const EvalReport& report) {
  for (const auto& d : report.per_query) {
    out << d.direction << '\t' << d.query << '\t' << d.gold << '\t' << d.gold_rank << '\t';
    for (std::size_t i = 0; i < d.retrieved.size(); ++i) out << (i ? " " : "") << d.retrieved[i];
    out << '\n';
  }
}

EvalReport read_report(std::istream& in, const std::string& name) {
  detail::LineReader rd(in, name);
  EvalReport rep;
  std::string line;
  while (rd.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, '\t');
    if (f.size() != 3) rd.fail("report line needs 3 tab-separated fields");
    EvalEntry e{std::string(f[0]), std::string(f[1]), 0.0};
    if (!detail::parse_double(f[2], e.value)) rd.fail("bad value");
    rep.values.push_back(std::move(e));
  }
  return rep;
}

EvalReport induction_score(const AnchorDataset& eval_ds, const InductionMaps& maps, bool per_query) {
  require(!eval_ds.empty(), ErrorKind::validation, "induction_score: empty evaluation dataset");
  const Vocabulary va = vocabulary(eval_ds, true);
  const Vocabulary vb = vocabulary(eval_ds, false);
  std::vector<std::size_t> gold_b, gold_a;
  std::vector<std::string> names_a, names_b;
  for (const auto& r : eval_ds.records) {
    gold_b.push_back(vb.index.at(r.lemma_b));
    gold_a.push_back(va.index.at(r.lemma_a));
    names_a.push_back(r.lemma_a);
    names_b.push_back(r.lemma_b);
  }
  const Matrix qa = maps.query_a(eval_ds.side_a());
  const Matrix cb = maps.candidate_b(vb.vectors);
  const Matrix qb = maps.query_b(eval_ds.side_b());
  const Matrix ca = maps.candidate_a(va.vectors);
  const auto ranks_ab = gold_ranks(qa, gold_b, cb);
  const auto ranks_ba = gold_ranks(qb, gold_a, ca);

  EvalReport rep;
  // both directions have one query per record, so the mean is total hits / 6n
  const std::size_t hits = add_precisions(rep, "a_to_b", ranks_ab) + add_precisions(rep, "b_to_a", ranks_ba);
  rep.values.push_back({"induction_avg", "both", static_cast<double>(hits) / static_cast<double>(6 * eval_ds.size())});
  if (per_query) {
    add_diagnostics(rep, "a_to_b", names_a, vb.names, cosine_similarities(qa, cb), gold_b, ranks_ab);
    add_diagnostics(rep, "b_to_a", names_b, va.names, cosine_similarities(qb, ca), gold_a, ranks_ba);
  }
  return rep;
}

double induction_average(const EvalReport& report) {
  if (const auto avg = report.value("induction_avg", "both")) return *avg;
  double sum = 0.0;
  for (const char* dir : {"a_to_b", "b_to_a"})
    for (const char* metric : {"precision@1", "precision@5", "precision@10"}) {
      const auto v = report.value(metric, dir);
      if (!v) throw_error(ErrorKind::validation, std::string("induction_average: report lacks ") + metric + " " + dir);
      sum += *v;
    }
  return sum / 6.0;
}

EvalReport induction_score(const LinearMapModel& model, const AnchorDataset& eval_ds, bool per_query) {
  InductionMaps maps;
  const auto eval_side = [&model](const Matrix& m) { return apply_linear(model, m, MapSide::source_eval); };
  const auto train_side = [&model](const Matrix& m) { return apply_linear(model, m, MapSide::target_train); };
  maps.query_a = eval_side;
  maps.candidate_b = train_side;
  if (model.mode == LinearMode::orthogonal) {
    // Comparing b against mapped a is the same ranking as comparing b W^T
    // against a, because W is orthogonal.
    maps.query_b = train_side;
    maps.candidate_a = eval_side;
  } else {
    maps.query_b = [&model](const Matrix& m) { return map_linear(model, m, Direction::b_to_a); };
    maps.candidate_a = [&model](const Matrix& m) {
      Matrix out = m;
      if (model.options.normalize_at_eval) normalize_with_mean(out, model.mean_a);
      return out;
    };
  }
  return induction_score(eval_ds, maps, per_query);
}

EvalReport induction_score(const GanModel& model, const AnchorDataset& eval_ds, bool per_query) {
  InductionMaps maps;
  const auto identity = [](const Matrix& m) { return m; };
  maps.query_a = [&model](const Matrix& m) { return map_vectors(model, m, Direction::a_to_b); };
  maps.candidate_b = identity;
  maps.query_b = [&model](const Matrix& m) { return map_vectors(model, m, Direction::b_to_a); };
  maps.candidate_a = identity;
  return induction_score(eval_ds, maps, per_query);
}

std::vector<TermEntry> read_terms(std::istream& in, const std::string& name) {
  detail::LineReader rd(in, name);
  std::vector<TermEntry> out;
  std::string line;
  while (rd.next(line)) {
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    out.push_back({line.substr(b, e - b + 1), std::nullopt});
  }
  return out;
}

std::vector<TermEntry> load_terms(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return read_terms(in, path);
}

TermVectorizer::TermVectorizer(const ContextCorpus& corpus, const EmbeddingTable* static_table)
    : corpus_(corpus), static_table_(static_table) {
  dim_ = corpus.dims[0] + corpus.dims[1] + corpus.dims[2];
  if (static_table_ && static_table_->size() > 0 && static_table_->dim() != dim_)
    throw_error(ErrorKind::shape, "TermVectorizer: static table dimension " + std::to_string(static_table_->dim()) +
                                      " != concatenated layer dimension " + std::to_string(dim_));
  for (std::size_t c = 0; c < corpus.contexts.size(); ++c)
    for (std::size_t t = 0; t < corpus.contexts[c].tokens.size(); ++t)
      occurrences_[corpus.contexts[c].tokens[t].surface].emplace_back(c, t);
}

std::optional<Vector> TermVectorizer::word_vector(const std::string& word) {
  if (const auto it = word_cache_.find(word); it != word_cache_.end()) return it->second;
  std::optional<Vector> result;
  if (const auto occ = occurrences_.find(word); occ != occurrences_.end()) {
    Vector sum(dim_, 0.0);
    for (const auto& [c, t] : occ->second) {
      const Vector v = concat_layers(corpus_.contexts[c].tokens[t]);
      for (std::size_t i = 0; i < dim_; ++i) sum[i] += v[i];
    }
    for (double& x : sum) x /= static_cast<double>(occ->second.size());
    result = std::move(sum);
  } else if (static_table_) {
    if (const auto idx = static_table_->find(word)) {
      const auto row = static_table_->vectors().row(*idx);
      result = Vector(row.begin(), row.end());
    }
  }
  word_cache_.emplace(word, result);
  return result;
}

Vector TermVectorizer::term_vector(const TermEntry& term) {
  if (term.vector) return *term.vector;
  std::vector<std::string> words;
  for (auto w : detail::split(term.term, ' '))
    if (!w.empty()) words.emplace_back(w);
  if (words.empty()) throw_error(ErrorKind::validation, "term_vector: empty term");

  if (words.size() == 1) {
    auto v = word_vector(words[0]);
    if (!v) throw_error(ErrorKind::validation, "term_vector: missing term '" + term.term + "'");
    return *v;
  }

  // Contiguous surface matches within a context.
  Vector sum(dim_, 0.0);
  std::size_t matches = 0;
  if (const auto occ = occurrences_.find(words[0]); occ != occurrences_.end()) {
    for (const auto& [c, t] : occ->second) {
      const auto& toks = corpus_.contexts[c].tokens;
      if (t + words.size() > toks.size()) continue;
      bool ok = true;
      for (std::size_t k = 1; k < words.size() && ok; ++k) ok = toks[t + k].surface == words[k];
      if (!ok) continue;
      Vector occ_mean(dim_, 0.0);
      for (std::size_t k = 0; k < words.size(); ++k) {
        const Vector v = concat_layers(toks[t + k]);
        for (std::size_t i = 0; i < dim_; ++i) occ_mean[i] += v[i];
      }
      for (std::size_t i = 0; i < dim_; ++i) sum[i] += occ_mean[i] / static_cast<double>(words.size());
      ++matches;
    }
  }
  if (matches > 0) {
    for (double& x : sum) x /= static_cast<double>(matches);
    return sum;
  }
  for (const auto& w : words) {
    const auto v = word_vector(w);
    if (!v) throw_error(ErrorKind::validation, "term_vector: missing term '" + term.term + "' (no vector for '" + w + "')");
    for (std::size_t i = 0; i < dim_; ++i) sum[i] += (*v)[i];
  }
  for (double& x : sum) x /= static_cast<double>(words.size());
  return sum;
}

Vector term_vector(const TermEntry& term, const ContextCorpus& corpus, const EmbeddingTable* static_table) {
  TermVectorizer tv(corpus, static_table);
  return tv.term_vector(term);
}

EvalReport terminology_accuracy(const Matrix& src_vectors, const Matrix& trg_vectors, const Mapper& a_to_b,
                                const Mapper& b_to_a, EvalDirection direction) {
  require(src_vectors.rows() > 0, ErrorKind::validation, "terminology_accuracy: empty term lists");
  if (src_vectors.rows() != trg_vectors.rows())
    throw_error(ErrorKind::validation, "terminology_accuracy: term lists differ in length (" +
                                           std::to_string(src_vectors.rows()) + " vs " + std::to_string(trg_vectors.rows()) + ")");
  std::vector<std::size_t> gold(src_vectors.rows());
  std::iota(gold.begin(), gold.end(), std::size_t{0});
  const auto accuracy = [&](const Matrix& queries, const Matrix& candidates) {
    const auto ranks = gold_ranks(queries, gold, candidates);
    const auto hits = std::count(ranks.begin(), ranks.end(), std::size_t{0});
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
  };
  EvalReport rep;
  double sum = 0.0;
  int n = 0;
  if (direction != EvalDirection::b_to_a) {
    const double acc = accuracy(a_to_b(src_vectors), trg_vectors);
    rep.values.push_back({"accuracy@1", "a_to_b", acc});
    sum += acc;
    ++n;
  }
  if (direction != EvalDirection::a_to_b) {
    const double acc = accuracy(b_to_a(trg_vectors), src_vectors);
    rep.values.push_back({"accuracy@1", "b_to_a", acc});
    sum += acc;
    ++n;
  }
  if (direction == EvalDirection::both) rep.values.push_back({"accuracy@1", "both", sum / n});
  return rep;
}

Mapper sliced_mapper(std::vector<std::size_t> widths, std::vector<Mapper> parts) {
  if (widths.size() != parts.size() || widths.empty())
    throw_error(ErrorKind::validation, "sliced_mapper: one mapper per column block required");
  return [widths = std::move(widths), parts = std::move(parts)](const Matrix& m) {
    const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
    if (m.cols() != total)
      throw_error(ErrorKind::shape, "sliced_mapper: input width " + std::to_string(m.cols()) + " != " + std::to_string(total));
    Matrix out(m.rows(), 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      out = hconcat(out, parts[i](column_block(m, offset, widths[i])));
      offset += widths[i];
    }
    return out;
  };
}

}  // namespace xlanchor
