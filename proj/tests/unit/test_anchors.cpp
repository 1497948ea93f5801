#include <doctest.h>

#include <map>
#include <set>
#include <tuple>

#include "support.hpp"
#include "xlanchor/anchors.hpp"
#include "xlanchor/error.hpp"

using namespace xlanchor;

namespace {

BilingualDictionary dict(std::vector<std::pair<std::string, std::string>> pairs, std::string a = "",
                         std::string b = "") {
  BilingualDictionary d;
  d.lang_a = std::move(a);
  d.lang_b = std::move(b);
  d.pairs = std::move(pairs);
  d.normalize();
  return d;
}

LayeredTokenEmbedding tok(const std::string& lemma, double tag) {
  return {lemma, lemma, {Vector{tag, 0}, Vector{tag, 1}, Vector{tag, 2}}};
}

ContextCorpus corpus(const std::vector<std::pair<std::int64_t, std::vector<std::string>>>& ctxs, double base) {
  ContextCorpus c;
  c.dims = {2, 2, 2};
  for (const auto& [id, lemmas] : ctxs) {
    Context ctx{id, {}};
    for (std::size_t i = 0; i < lemmas.size(); ++i)
      ctx.tokens.push_back(tok(lemmas[i], base + static_cast<double>(id) * 10 + static_cast<double>(i)));
    c.contexts.push_back(ctx);
  }
  return c;
}

}  // namespace

TEST_CASE("language profiles") {
  CHECK(LanguageProfile::parse("sl").strip_accented_vowels);
  CHECK_FALSE(LanguageProfile::parse("en").strip_accented_vowels);
  CHECK(LanguageProfile::parse("en:strip").strip_accented_vowels);
  CHECK_FALSE(LanguageProfile::parse("ru:nostrip").strip_accented_vowels);
  CHECK_THROWS_AS(LanguageProfile::parse("en:maybe"), Error);
}

TEST_CASE("accent folding") {
  CHECK(fold_accented_vowels("café") == "cafe");
  CHECK(fold_accented_vowels("Árbol") == "Arbol");
  CHECK(fold_accented_vowels("zdraví") == "zdravi");  // combining acute
  CHECK(fold_accented_vowels("ёлка") == "ёлка");  // ё is a letter in Russian, kept
  CHECK(fold_accented_vowels("замо́к") == "замок");
  CHECK(fold_accented_vowels("črš") == "črš");  // consonant diacritics kept
}

TEST_CASE("clean_dictionary rules") {
  const auto p_en = LanguageProfile::parse("en");
  const auto p_sl = LanguageProfile::parse("sl");
  auto d = dict({{"new york", "x"}, {"café", "kava"}, {"a#b", "x"}, {"dog", "pes"}, {" dog ", "pes"}});
  const auto c = clean_dictionary(d, LanguageProfile::parse("en:strip"), p_sl);
  CHECK(c.pairs == std::vector<std::pair<std::string, std::string>>{{"cafe", "kava"}, {"dog", "pes"}});
  CHECK(clean_dictionary(c, LanguageProfile::parse("en:strip"), p_sl) == c);
  const auto keep = clean_dictionary(dict({{"café", "kava"}}), p_en, p_sl);
  CHECK(keep.pairs[0].first == "café");
  CHECK(clean_dictionary(dict({{"a b", "x"}}), p_en, p_sl).pairs.empty());
  CHECK(clean_dictionary(dict({}), p_en, p_sl).pairs.empty());
}

TEST_CASE("triangulate") {
  CHECK(triangulate(dict({}), dict({{"c", "b"}})).pairs.empty());
  const auto one = triangulate(dict({{"a", "c"}}), dict({{"c", "b"}}));
  CHECK(one.pairs == std::vector<std::pair<std::string, std::string>>{{"a", "b"}});
  CHECK(one.provenance == Provenance::triangulated);
  const auto set = triangulate(dict({{"a", "c1"}, {"a", "c2"}}), dict({{"c1", "b"}, {"c2", "b"}}));
  CHECK(set.pairs.size() == 1);
  CHECK_THROWS_AS(triangulate(dict({{"a", "c"}}, "en", "hr"), dict({{"c", "b"}}, "de", "sl")), Error);
  const auto langs = triangulate(dict({{"a", "c"}}, "en", "hr"), dict({{"c", "b"}}, "hr", "sl"));
  CHECK(langs.lang_a == "en");
  CHECK(langs.lang_b == "sl");
}

TEST_CASE("build_anchor_datasets basic cases") {
  const auto ca = corpus({{1, {"dog"}}}, 0);
  const auto cb = corpus({{1, {"pes"}}}, 100);
  for (const auto& ds : build_anchor_datasets(ca, cb, dict({}))) CHECK(ds.empty());
  const auto out = build_anchor_datasets(ca, cb, dict({{"dog", "pes"}}));
  for (std::size_t l = 0; l < kLayers; ++l) {
    REQUIRE(out[l].size() == 1);
    CHECK(out[l].layer == static_cast<int>(l));
    CHECK(out[l].records[0].vec_a == ca.contexts[0].tokens[0].layers[l]);
    CHECK(out[l].records[0].vec_b == cb.contexts[0].tokens[0].layers[l]);
  }
}

TEST_CASE("build_anchor_datasets cap of 20 over 30 contexts takes the lowest ids") {
  std::vector<std::pair<std::int64_t, std::vector<std::string>>> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back({i * 2 + 5, {"the", "dog", "dog"}});
    b.push_back({i * 2 + 5, {"pes", "je", "pes"}});
  }
  const auto ca = corpus(a, 0), cb = corpus(b, 1000);
  const auto out = build_anchor_datasets(ca, cb, dict({{"dog", "pes"}}), 20);
  for (const auto& ds : out) {
    REQUIRE(ds.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(ds.records[i].context_id == i * 2 + 5);
  }
  // brute force: first occurrence on both sides
  for (int i = 0; i < 20; ++i) {
    CHECK(out[0].records[i].vec_a == ca.contexts[i].tokens[1].layers[0]);
    CHECK(out[0].records[i].vec_b == cb.contexts[i].tokens[0].layers[0]);
  }
}

TEST_CASE("build_anchor_datasets invariants on a random corpus") {
  Rng rng(77);
  const std::vector<std::string> la{"a0", "a1", "a2", "a3", "a4", "a5"}, lb{"b0", "b1", "b2", "b3", "b4", "b5"};
  std::vector<std::pair<std::int64_t, std::vector<std::string>>> ca, cb;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::string> ta, tb;
    for (int k = 0; k < 5; ++k) ta.push_back(la[rng.below(la.size())]);
    for (int k = 0; k < 5; ++k) tb.push_back(lb[rng.below(lb.size())]);
    ca.push_back({i, ta});
    cb.push_back({i, tb});
  }
  const auto A = corpus(ca, 0), B = corpus(cb, 5000);
  const auto d = dict({{"a0", "b0"}, {"a0", "b1"}, {"a1", "b1"}, {"a2", "b2"}, {"a3", "b5"}, {"a9", "b9"}});
  const std::size_t cap = 4;
  const auto out = build_anchor_datasets(A, B, d, cap);
  std::map<std::pair<std::string, std::string>, std::size_t> per_pair;
  std::set<std::pair<std::string, std::string>> dict_set(d.pairs.begin(), d.pairs.end());
  for (std::size_t r = 0; r < out[0].size(); ++r) {
    const auto& rec = out[0].records[r];
    for (std::size_t l = 1; l < kLayers; ++l) {
      CHECK(out[l].records[r].context_id == rec.context_id);
      CHECK(out[l].records[r].lemma_a == rec.lemma_a);
      CHECK(out[l].records[r].lemma_b == rec.lemma_b);
    }
    CHECK(dict_set.count({rec.lemma_a, rec.lemma_b}) == 1);
    ++per_pair[{rec.lemma_a, rec.lemma_b}];
    // vectors belong to tokens of the matched context
    const auto& ctx_a = A.contexts[static_cast<std::size_t>(rec.context_id)];
    bool found = false;
    for (const auto& t : ctx_a.tokens) found = found || (t.lemma == rec.lemma_a && t.layers[0] == rec.vec_a);
    CHECK(found);
  }
  for (const auto& [pair, n] : per_pair) CHECK(n <= cap);

  // oracle: count of contexts where both lemmas appear, capped
  for (const auto& [pa, pb] : d.pairs) {
    std::size_t co = 0;
    for (std::size_t i = 0; i < A.contexts.size(); ++i) {
      bool ha = false, hb = false;
      for (const auto& t : A.contexts[i].tokens) ha = ha || t.lemma == pa;
      for (const auto& t : B.contexts[i].tokens) hb = hb || t.lemma == pb;
      co += ha && hb;
    }
    CHECK(per_pair[{pa, pb}] == std::min(co, cap));
  }
}

TEST_CASE("build_anchor_datasets errors") {
  const auto ca = corpus({{1, {"dog"}}, {2, {"cat"}}}, 0);
  CHECK_THROWS_AS(build_anchor_datasets(ca, corpus({{1, {"pes"}}}, 0), dict({})), Error);
  CHECK_THROWS_AS(build_anchor_datasets(ca, corpus({{1, {"pes"}}, {3, {"x"}}}, 0), dict({})), Error);
  auto cb = corpus({{1, {"pes"}}, {2, {"x"}}}, 0);
  cb.dims[1] = 3;
  CHECK_THROWS_AS(build_anchor_datasets(ca, cb, dict({})), Error);
  CHECK_THROWS_AS(build_anchor_datasets(ca, ca, dict({}), 0), Error);
}

TEST_CASE("split_dataset sizes and determinism") {
  AnchorDataset ds;
  ds.dim = 1;
  for (int i = 0; i < 1000; ++i) ds.records.push_back({i, "a" + std::to_string(i), "b", {double(i)}, {0}});
  Rng r1(5), r2(5), r3(6);
  const auto s1 = split_dataset(ds, 0.985, r1);
  const auto s2 = split_dataset(ds, 0.985, r2);
  const auto s3 = split_dataset(ds, 0.985, r3);
  CHECK(s1.train.size() == 985);
  CHECK(s1.eval.size() == 15);
  CHECK(s1.train == s2.train);
  CHECK(s1.eval == s2.eval);
  CHECK_FALSE(s1.eval == s3.eval);
  std::set<std::int64_t> ids;
  for (const auto* part : {&s1.train, &s1.eval})
    for (const auto& r : part->records) CHECK(ids.insert(r.context_id).second);
  CHECK(ids.size() == 1000);

  AnchorDataset one;
  one.records.push_back({0, "a", "b", {}, {}});
  Rng r(1);
  const auto s = split_dataset(one, 0.985, r);
  CHECK(s.train.size() == 1);
  CHECK(s.eval.size() == 0);
  CHECK_THROWS_AS(split_dataset(ds, 1.5, r), Error);
  CHECK_THROWS_AS(split_dataset(AnchorDataset{}, 0.5, r), Error);
}
