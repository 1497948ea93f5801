#include "xlanchor/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "xlanchor/error.hpp"

namespace xlanchor {

namespace {

// Base letter for a precomposed accented vowel, or 0 if `cp` is not one.
char32_t vowel_base(char32_t cp) {
  if (cp >= 0x00C0 && cp <= 0x00C5) return U'A';
  if (cp >= 0x00C8 && cp <= 0x00CB) return U'E';
  if (cp >= 0x00CC && cp <= 0x00CF) return U'I';
  if (cp >= 0x00D2 && cp <= 0x00D6) return U'O';
  if (cp >= 0x00D9 && cp <= 0x00DC) return U'U';
  if (cp == 0x00DD) return U'Y';
  if (cp >= 0x00E0 && cp <= 0x00E5) return U'a';
  if (cp >= 0x00E8 && cp <= 0x00EB) return U'e';
  if (cp >= 0x00EC && cp <= 0x00EF) return U'i';
  if (cp >= 0x00F2 && cp <= 0x00F6) return U'o';
  if (cp >= 0x00F9 && cp <= 0x00FC) return U'u';
  if (cp == 0x00FD || cp == 0x00FF) return U'y';
  // Latin Extended-A: upper case on even code points, lower case on odd.
  const auto ext = [cp](char32_t upper) { return (cp % 2 == 0) ? upper : upper + 0x20; };
  if (cp >= 0x0100 && cp <= 0x0105) return ext(U'A');
  if (cp >= 0x0112 && cp <= 0x011B) return ext(U'E');
  if (cp >= 0x0128 && cp <= 0x012F) return ext(U'I');
  if (cp == 0x0130) return U'I';
  if (cp >= 0x014C && cp <= 0x0151) return ext(U'O');
  if (cp >= 0x0168 && cp <= 0x0173) return ext(U'U');
  if (cp == 0x0176 || cp == 0x0178) return U'Y';
  if (cp == 0x0177) return U'y';
  // Cyrillic vowels with grave accent.
  if (cp == 0x0400) return 0x0415;
  if (cp == 0x040D) return 0x0418;
  if (cp == 0x0450) return 0x0435;
  if (cp == 0x045D) return 0x0438;
  return 0;
}

bool is_combining_mark(char32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one UTF-8 sequence at s[i]; returns its length, or 0 if invalid.
std::size_t decode_utf8(const std::string& s, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  return len;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\n\r\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool has_any_whitespace(const std::string& s) { return s.find_first_of(" \t\n\r\v\f") != std::string::npos; }

// Rejects NBSP and other common Unicode spaces as well as ASCII whitespace.
bool has_unicode_space(const std::string& s) {
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(s, i, cp);
    if (len == 0) {
      ++i;
      continue;
    }
    if (cp == 0x00A0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x202F || cp == 0x205F || cp == 0x3000)
      return true;
    i += len;
  }
  return false;
}

std::optional<std::string> clean_lemma(const std::string& raw, const LanguageProfile& profile) {
  std::string s = trim(raw);
  if (profile.strip_accented_vowels) s = fold_accented_vowels(s);
  if (s.empty() || has_any_whitespace(s) || has_unicode_space(s)) return std::nullopt;
  if (s.find_first_of(profile.forbidden_chars) != std::string::npos) return std::nullopt;
  return s;
}

}  // namespace

LanguageProfile LanguageProfile::parse(const std::string& spec) {
  LanguageProfile p;
  const auto colon = spec.find(':');
  p.lang = spec.substr(0, colon);
  if (p.lang.empty() || has_any_whitespace(p.lang))
    throw_error(ErrorKind::validation, "language profile '" + spec + "': empty or invalid language code");
  static const std::set<std::string> folding = {"sl", "hr", "ru", "sr", "bs", "mk"};
  p.strip_accented_vowels = folding.count(p.lang) > 0;
  if (colon != std::string::npos) {
    const std::string opt = spec.substr(colon + 1);
    if (opt == "strip")
      p.strip_accented_vowels = true;
    else if (opt == "nostrip")
      p.strip_accented_vowels = false;
    else
      throw_error(ErrorKind::validation, "language profile '" + spec + "': unknown option '" + opt + "'");
  }
  return p;
}

std::string fold_accented_vowels(const std::string& utf8) {
  std::string out;
  out.reserve(utf8.size());
  for (std::size_t i = 0; i < utf8.size();) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(utf8, i, cp);
    if (len == 0) {
      out.push_back(utf8[i]);
      ++i;
      continue;
    }
    if (is_combining_mark(cp)) {
      // dropped
    } else if (const char32_t base = vowel_base(cp)) {
      append_utf8(out, base);
    } else {
      out.append(utf8, i, len);
    }
    i += len;
  }
  return out;
}

BilingualDictionary clean_dictionary(const BilingualDictionary& dict, const LanguageProfile& a, const LanguageProfile& b) {
  BilingualDictionary out;
  out.lang_a = a.lang.empty() ? dict.lang_a : a.lang;
  out.lang_b = b.lang.empty() ? dict.lang_b : b.lang;
  out.provenance = dict.provenance;
  for (const auto& [la, lb] : dict.pairs) {
    auto ca = clean_lemma(la, a);
    auto cb = clean_lemma(lb, b);
    if (ca && cb) out.pairs.emplace_back(std::move(*ca), std::move(*cb));
  }
  out.normalize();
  return out;
}

BilingualDictionary triangulate(const BilingualDictionary& ac, const BilingualDictionary& cb) {
  if (!ac.lang_b.empty() && !cb.lang_a.empty() && ac.lang_b != cb.lang_a)
    throw_error(ErrorKind::validation,
                "triangulate: pivot language mismatch ('" + ac.lang_b + "' vs '" + cb.lang_a + "')");
  std::unordered_map<std::string, std::vector<const std::string*>> via;
  for (const auto& [c, b] : cb.pairs) via[c].push_back(&b);
  BilingualDictionary out;
  out.lang_a = ac.lang_a;
  out.lang_b = cb.lang_b;
  out.provenance = Provenance::triangulated;
  for (const auto& [a, c] : ac.pairs) {
    const auto it = via.find(c);
    if (it == via.end()) continue;
    for (const std::string* b : it->second) out.pairs.emplace_back(a, *b);
  }
  out.normalize();
  return out;
}

std::array<AnchorDataset, kLayers> build_anchor_datasets(const ContextCorpus& corpus_a, const ContextCorpus& corpus_b,
                                                          const BilingualDictionary& dict, std::size_t max_contexts) {
  require(max_contexts >= 1, ErrorKind::validation, "build_anchor_datasets: max_contexts must be at least 1");
  for (std::size_t l = 0; l < kLayers; ++l)
    if (corpus_a.dims[l] != corpus_b.dims[l])
      throw_error(ErrorKind::shape, "build_anchor_datasets: layer " + std::to_string(l) + " dimension differs (" +
                                        std::to_string(corpus_a.dims[l]) + " vs " + std::to_string(corpus_b.dims[l]) + ")");
  if (corpus_a.contexts.size() != corpus_b.contexts.size())
    throw_error(ErrorKind::validation, "build_anchor_datasets: corpora are not aligned (" +
                                           std::to_string(corpus_a.contexts.size()) + " vs " +
                                           std::to_string(corpus_b.contexts.size()) + " contexts)");
  for (std::size_t i = 0; i < corpus_a.contexts.size(); ++i)
    if (corpus_a.contexts[i].id != corpus_b.contexts[i].id)
      throw_error(ErrorKind::validation, "build_anchor_datasets: context id mismatch at position " + std::to_string(i) +
                                             " (#" + std::to_string(corpus_a.contexts[i].id) + " vs #" +
                                             std::to_string(corpus_b.contexts[i].id) + ")");

  std::array<AnchorDataset, kLayers> out;
  for (std::size_t l = 0; l < kLayers; ++l) {
    out[l].layer = static_cast<int>(l);
    out[l].lang_a = dict.lang_a.empty() ? "a" : dict.lang_a;
    out[l].lang_b = dict.lang_b.empty() ? "b" : dict.lang_b;
    out[l].dim = corpus_a.dims[l];
  }

  // Translations per source lemma, in sorted order.
  std::unordered_map<std::string, std::vector<std::size_t>> translations;
  for (std::size_t j = 0; j < dict.pairs.size(); ++j) translations[dict.pairs[j].first].push_back(j);
  std::vector<std::size_t> used(dict.pairs.size(), 0);

  for (std::size_t ci = 0; ci < corpus_a.contexts.size(); ++ci) {
    const Context& ca = corpus_a.contexts[ci];
    const Context& cb = corpus_b.contexts[ci];
    std::unordered_map<std::string_view, std::size_t> first_b;
    for (std::size_t t = 0; t < cb.tokens.size(); ++t) first_b.emplace(cb.tokens[t].lemma, t);
    std::unordered_set<std::string_view> seen_a;
    for (const auto& tok_a : ca.tokens) {
      if (!seen_a.insert(tok_a.lemma).second) continue;
      const auto tr = translations.find(tok_a.lemma);
      if (tr == translations.end()) continue;
      for (std::size_t j : tr->second) {
        if (used[j] >= max_contexts) continue;
        const auto hit = first_b.find(dict.pairs[j].second);
        if (hit == first_b.end()) continue;
        const auto& tok_b = cb.tokens[hit->second];
        ++used[j];
        for (std::size_t l = 0; l < kLayers; ++l)
          out[l].records.push_back({ca.id, dict.pairs[j].first, dict.pairs[j].second, tok_a.layers[l], tok_b.layers[l]});
      }
    }
  }
  return out;
}

DatasetSplit split_dataset(const AnchorDataset& ds, double train_fraction, Rng& rng) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::validation,
          "split_dataset: train fraction must be in (0, 1)");
  require(!ds.empty(), ErrorKind::validation, "split_dataset: empty dataset");
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
  const auto perm = permutation(n, rng);
  std::vector<bool> in_train(n, false);
  for (std::size_t k = 0; k < n_train; ++k) in_train[perm[k]] = true;

  DatasetSplit out;
  out.train = AnchorDataset{ds.layer, ds.lang_a, ds.lang_b, ds.dim, {}};
  out.eval = out.train;
  out.train.records.reserve(n_train);
  out.eval.records.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.eval).records.push_back(ds.records[i]);
  return out;
}

}  // namespace xlanchor
