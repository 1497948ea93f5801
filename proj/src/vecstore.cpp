#include "xlanchor/vecstore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "textio.hpp"
#include "xlanchor/error.hpp"

namespace xlanchor {

using detail::LineReader;
using detail::split;

namespace detail {
std::string format_double(double v) {
  char buf[40];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
}  // namespace detail

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return in;
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorKind::io, "cannot open '" + path + "' for writing");
  fn(out);
  out.flush();
  if (!out) throw_error(ErrorKind::io, "write failed for '" + path + "'");
}

void append_vector(std::string& line, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) line.push_back(' ');
    line += format_value(v[i]);
  }
}

void check_token(const LineReader& rd, std::string_view tok, const char* what) {
  if (tok.empty()) rd.fail(std::string("empty ") + what);
  if (detail::has_whitespace(tok)) rd.fail(std::string(what) + " contains whitespace");
}

void check_token_out(const std::string& tok, const char* what) {
  if (tok.empty() || detail::has_whitespace(tok))
    throw_error(ErrorKind::validation, std::string(what) + " '" + tok + "' is empty or contains whitespace");
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw_error(ErrorKind::validation, std::string(what) + ": non-finite value");
}

}  // namespace

std::string format_value(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<float>(v), std::chars_format::general, 9);
  return std::string(buf, p);
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Matrix vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (tokens_.size() != vectors_.rows())
    throw_error(ErrorKind::shape, "EmbeddingTable: token count does not match vector rows");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    check_token_out(tokens_[i], "token");
    if (!index_.emplace(tokens_[i], i).second)
      throw_error(ErrorKind::validation, "EmbeddingTable: duplicate token '" + tokens_[i] + "'");
  }
  if (!all_finite(vectors_)) throw_error(ErrorKind::validation, "EmbeddingTable: non-finite value");
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable read_embeddings(std::istream& in, const std::string& name) {
  LineReader rd(in, name);
  std::string line;
  if (!rd.next(line)) rd.fail("missing header");
  const auto head = split(line, ' ');
  std::uint64_t n = 0, d = 0;
  if (head.size() != 2 || !detail::parse_u64(head[0], n) || !detail::parse_u64(head[1], d))
    rd.fail("header must be 'N D'");
  std::vector<std::string> tokens;
  tokens.reserve(n);
  Matrix vectors(n, d);
  std::unordered_map<std::string, std::size_t> seen;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!rd.next(line)) rd.fail("expected " + std::to_string(n) + " entries, file ended after " + std::to_string(i));
    const std::size_t sp = line.find(' ');
    const std::string_view tok = std::string_view(line).substr(0, sp);
    check_token(rd, tok, "token");
    if (d > 0 && sp == std::string::npos) rd.fail("missing vector");
    const Vector v = detail::parse_vector(rd, sp == std::string::npos ? std::string_view() : std::string_view(line).substr(sp + 1), d, "vector");
    if (!seen.emplace(std::string(tok), i).second) rd.fail("duplicate token '" + std::string(tok) + "'");
    std::copy(v.begin(), v.end(), vectors.row(i).begin());
    tokens.emplace_back(tok);
  }
  while (rd.next(line))
    if (!line.empty()) rd.fail("unexpected content after " + std::to_string(n) + " entries");
  return EmbeddingTable(std::move(tokens), std::move(vectors));
}

EmbeddingTable load_embeddings(const std::string& path) {
  auto in = open_in(path);
  return read_embeddings(in, path);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  std::string line;
  for (std::size_t i = 0; i < table.size(); ++i) {
    line = table.tokens()[i];
    if (table.dim()) line.push_back(' ');
    append_vector(line, table.vectors().row(i));
    line.push_back('\n');
    out << line;
  }
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  write_file(path, [&](std::ostream& out) { write_embeddings(out, table); });
}

ContextCorpus read_context_corpus(std::istream& in, const std::string& name) {
  LineReader rd(in, name);
  std::string line;
  if (!rd.next(line)) rd.fail("missing header");
  const auto head = split(line, ' ');
  ContextCorpus corpus;
  if (head.size() != 5 || head[0] != "XLANCHOR-CTX") rd.fail("bad magic (expected 'XLANCHOR-CTX 1 d0 d1 d2')");
  if (head[1] != "1") rd.fail("unsupported context corpus version '" + std::string(head[1]) + "'");
  for (std::size_t l = 0; l < kLayers; ++l) {
    std::uint64_t d = 0;
    if (!detail::parse_u64(head[2 + l], d) || d == 0) rd.fail("bad layer dimension");
    corpus.dims[l] = d;
  }
  bool have_prev = false;
  std::int64_t prev_id = 0;
  while (rd.next(line)) {
    if (line.empty()) continue;
    if (line[0] != '#') rd.fail("expected context header '#<id> <num_tokens>'");
    const auto parts = split(std::string_view(line).substr(1), ' ');
    Context ctx;
    std::uint64_t count = 0;
    if (parts.size() != 2 || !detail::parse_i64(parts[0], ctx.id) || !detail::parse_u64(parts[1], count))
      rd.fail("malformed context header");
    if (count == 0) rd.fail("context has no tokens");
    if (have_prev && ctx.id <= prev_id) rd.fail("context ids must be strictly increasing");
    have_prev = true;
    prev_id = ctx.id;
    ctx.tokens.reserve(count);
    for (std::uint64_t t = 0; t < count; ++t) {
      if (!rd.next(line)) rd.fail("short block: context #" + std::to_string(ctx.id) + " ended after " + std::to_string(t) + " tokens");
      const auto fields = split(line, '\t');
      if (fields.size() != 2 + kLayers) rd.fail("token line needs 5 tab-separated fields");
      LayeredTokenEmbedding tok;
      check_token(rd, fields[0], "surface");
      check_token(rd, fields[1], "lemma");
      tok.surface = fields[0];
      tok.lemma = fields[1];
      for (std::size_t l = 0; l < kLayers; ++l) tok.layers[l] = detail::parse_vector(rd, fields[2 + l], corpus.dims[l], "layer vector");
      ctx.tokens.push_back(std::move(tok));
    }
    corpus.contexts.push_back(std::move(ctx));
  }
  return corpus;
}

ContextCorpus load_context_corpus(const std::string& path) {
  auto in = open_in(path);
  return read_context_corpus(in, path);
}

void write_context_corpus(std::ostream& out, const ContextCorpus& corpus) {
  out << "XLANCHOR-CTX 1 " << corpus.dims[0] << ' ' << corpus.dims[1] << ' ' << corpus.dims[2] << '\n';
  std::string line;
  for (const Context& ctx : corpus.contexts) {
    if (ctx.tokens.empty()) throw_error(ErrorKind::validation, "context #" + std::to_string(ctx.id) + " has no tokens");
    out << '#' << ctx.id << ' ' << ctx.tokens.size() << '\n';
    for (const auto& tok : ctx.tokens) {
      check_token_out(tok.surface, "surface");
      check_token_out(tok.lemma, "lemma");
      line = tok.surface + '\t' + tok.lemma;
      for (std::size_t l = 0; l < kLayers; ++l) {
        if (tok.layers[l].size() != corpus.dims[l]) throw_error(ErrorKind::shape, "token vector does not match corpus layer dimension");
        line.push_back('\t');
        append_vector(line, tok.layers[l]);
      }
      line.push_back('\n');
      out << line;
    }
  }
}

void save_context_corpus(const ContextCorpus& corpus, const std::string& path) {
  write_file(path, [&](std::ostream& out) { write_context_corpus(out, corpus); });
}

Matrix AnchorDataset::side_a() const {
  Matrix m(records.size(), dim);
  for (std::size_t i = 0; i < records.size(); ++i) std::copy(records[i].vec_a.begin(), records[i].vec_a.end(), m.row(i).begin());
  return m;
}

Matrix AnchorDataset::side_b() const {
  Matrix m(records.size(), dim);
  for (std::size_t i = 0; i < records.size(); ++i) std::copy(records[i].vec_b.begin(), records[i].vec_b.end(), m.row(i).begin());
  return m;
}

AnchorDataset read_anchor_dataset(std::istream& in, const std::string& name) {
  LineReader rd(in, name);
  std::string line;
  if (!rd.next(line)) rd.fail("missing header");
  const auto head = split(line, ' ');
  if (head.size() != 6 || head[0] != "XLANCHOR-PAIRS") rd.fail("bad magic (expected 'XLANCHOR-PAIRS 1 <dim> <lang_a> <lang_b> <layer>')");
  if (head[1] != "1") rd.fail("unsupported anchor dataset version '" + std::string(head[1]) + "'");
  AnchorDataset ds;
  std::uint64_t dim = 0, layer = 0;
  if (!detail::parse_u64(head[2], dim) || dim == 0) rd.fail("bad dimension");
  check_token(rd, head[3], "lang_a");
  check_token(rd, head[4], "lang_b");
  if (!detail::parse_u64(head[5], layer) || layer >= kLayers) rd.fail("layer must be 0, 1 or 2");
  ds.dim = dim;
  ds.lang_a = head[3];
  ds.lang_b = head[4];
  ds.layer = static_cast<int>(layer);
  while (rd.next(line)) {
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 5) rd.fail("record needs 5 tab-separated fields");
    AnchorRecord r;
    if (!detail::parse_i64(f[0], r.context_id)) rd.fail("bad context id");
    check_token(rd, f[1], "lemma_a");
    check_token(rd, f[2], "lemma_b");
    r.lemma_a = f[1];
    r.lemma_b = f[2];
    r.vec_a = detail::parse_vector(rd, f[3], dim, "vec_a");
    r.vec_b = detail::parse_vector(rd, f[4], dim, "vec_b");
    ds.records.push_back(std::move(r));
  }
  return ds;
}

AnchorDataset load_anchor_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_anchor_dataset(in, path);
}

void write_anchor_dataset(std::ostream& out, const AnchorDataset& ds) {
  check_token_out(ds.lang_a, "lang_a");
  check_token_out(ds.lang_b, "lang_b");
  if (ds.layer < 0 || ds.layer >= static_cast<int>(kLayers)) throw_error(ErrorKind::validation, "anchor dataset layer out of range");
  out << "XLANCHOR-PAIRS 1 " << ds.dim << ' ' << ds.lang_a << ' ' << ds.lang_b << ' ' << ds.layer << '\n';
  std::string line;
  for (const auto& r : ds.records) {
    if (r.vec_a.size() != ds.dim || r.vec_b.size() != ds.dim) throw_error(ErrorKind::shape, "anchor record vector does not match dataset dim");
    check_finite(r.vec_a, "anchor record");
    check_finite(r.vec_b, "anchor record");
    check_token_out(r.lemma_a, "lemma_a");
    check_token_out(r.lemma_b, "lemma_b");
    line = std::to_string(r.context_id) + '\t' + r.lemma_a + '\t' + r.lemma_b + '\t';
    append_vector(line, r.vec_a);
    line.push_back('\t');
    append_vector(line, r.vec_b);
    line.push_back('\n');
    out << line;
  }
}

void save_anchor_dataset(const AnchorDataset& ds, const std::string& path) {
  write_file(path, [&](std::ostream& out) { write_anchor_dataset(out, ds); });
}

void BilingualDictionary::normalize() {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

BilingualDictionary read_dictionary(std::istream& in, const std::string& name) {
  LineReader rd(in, name);
  BilingualDictionary dict;
  std::string line;
  while (rd.next(line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto parts = split(line, ' ');
      if (parts.size() == 3 && parts[0] == "#langs") {
        dict.lang_a = parts[1];
        dict.lang_b = parts[2];
      }
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() != 2) rd.fail("dictionary entry needs exactly 2 tab-separated fields");
    if (f[0].empty() || f[1].empty()) rd.fail("empty lemma");
    dict.pairs.emplace_back(std::string(f[0]), std::string(f[1]));
  }
  dict.normalize();
  return dict;
}

BilingualDictionary load_dictionary(const std::string& path) {
  auto in = open_in(path);
  return read_dictionary(in, path);
}

void write_dictionary(std::ostream& out, const BilingualDictionary& dict) {
  if (!dict.lang_a.empty() && !dict.lang_b.empty()) out << "#langs " << dict.lang_a << ' ' << dict.lang_b << '\n';
  for (const auto& [a, b] : dict.pairs) {
    if (a.find_first_of("\t\n") != std::string::npos || b.find_first_of("\t\n") != std::string::npos)
      throw_error(ErrorKind::validation, "dictionary lemma contains tab or newline");
    out << a << '\t' << b << '\n';
  }
}

void save_dictionary(const BilingualDictionary& dict, const std::string& path) {
  write_file(path, [&](std::ostream& out) { write_dictionary(out, dict); });
}

Vector concat_layers(const LayeredTokenEmbedding& token) {
  Vector out;
  out.reserve(token.layers[0].size() + token.layers[1].size() + token.layers[2].size());
  for (const auto& l : token.layers) out.insert(out.end(), l.begin(), l.end());
  return out;
}

void l2_normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm2(row);
    if (n > 0.0)
      for (double& v : row) v /= n;
  }
}

Vector l2_normalized(std::span<const double> v) {
  Vector out(v.begin(), v.end());
  const double n = norm2(out);
  if (n > 0.0)
    for (double& x : out) x /= n;
  return out;
}

}  // namespace xlanchor
