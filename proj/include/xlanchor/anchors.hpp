#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "xlanchor/rng.hpp"
#include "xlanchor/vecstore.hpp"

namespace xlanchor {

struct LanguageProfile {
  std::string lang;
  bool strip_accented_vowels = false;
  std::string forbidden_chars = "#|()[]{}<>\\/*+=@$%^&~\"";

  // "<lang>" or "<lang>:strip" / "<lang>:nostrip". Without a suffix,
  // sl, hr, ru, sr, bs and mk fold accented vowels.
  static LanguageProfile parse(const std::string& spec);
};

// Folds precomposed Latin/Cyrillic accented vowels to their base letter and
// drops combining diacritics (U+0300..U+036F). Other code points are kept.
std::string fold_accented_vowels(const std::string& utf8);

// Drops multi-word entries and entries containing a forbidden character,
// folds accents per profile, collapses duplicates. Total and idempotent.
BilingualDictionary clean_dictionary(const BilingualDictionary& dict, const LanguageProfile& a,
                                     const LanguageProfile& b);

// {(a, b) : exists c with (a, c) in ac and (c, b) in cb}. Throws
// ErrorKind::validation when both pivot codes are known and differ.
BilingualDictionary triangulate(const BilingualDictionary& ac, const BilingualDictionary& cb);

inline constexpr std::size_t kDefaultMaxContexts = 20;

// One dataset per layer. For every aligned context and every dictionary pair
// whose lemmas both occur in it, one record is emitted using the first
// occurrence on each side; at most `max_contexts` records per pair, taken in
// ascending context order.
std::array<AnchorDataset, kLayers> build_anchor_datasets(const ContextCorpus& corpus_a, const ContextCorpus& corpus_b,
                                                          const BilingualDictionary& dict,
                                                          std::size_t max_contexts = kDefaultMaxContexts);

struct DatasetSplit {
  AnchorDataset train;
  AnchorDataset eval;
};

inline constexpr double kDefaultTrainFraction = 0.985;

// |train| = floor(fraction * N + 0.5). The train subset is the first |train|
// entries of a seeded permutation; both parts keep the original record order.
DatasetSplit split_dataset(const AnchorDataset& ds, double train_fraction, Rng& rng);

}  // namespace xlanchor
