#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scitech/common.hpp"

namespace scitech {

using Token = std::string;
using TokenList = std::vector<Token>;

namespace utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
inline std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (c < 0x80) { cp = c; len = 1; }
    else if ((c >> 5) == 0x6) { cp = c & 0x1F; len = 2; }
    else if ((c >> 4) == 0xE) { cp = c & 0x0F; len = 3; }
    else if ((c >> 3) == 0x1E) { cp = c & 0x07; len = 4; }
    else { out.push_back(0xFFFD); ++i; continue; }
    if (i + static_cast<std::size_t>(len) > s.size()) { out.push_back(0xFFFD); ++i; continue; }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((cc >> 6) != 0x2) { ok = false; break; }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) { out.push_back(0xFFFD); ++i; continue; }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
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

inline bool is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

/// Letter-or-digit test. Outside ASCII this is a block-level approximation:
/// punctuation, symbol, and space blocks are excluded and everything else is
/// treated as a word character.
inline bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || is_digit(cp);
  }
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows, math
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE10 && cp <= 0xFE6F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp == 0xFFFD || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
  return true;
}

inline bool is_hyphen(char32_t cp) { return cp == U'-' || cp == 0x2010 || cp == 0x2011; }

/// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

inline std::string lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : decode(s)) append(out, to_lower(cp));
  return out;
}

}  // namespace utf8

/// Splits text into lowercase word tokens.
///
/// Word characters are letters and digits (Unicode-aware); a hyphen is kept
/// only between two word characters. Tokens shorter than two code points and
/// tokens made only of digits (and hyphens) are dropped.
inline TokenList tokenize(std::string_view text) {
  const auto cps = utf8::decode(text);
  TokenList out;
  std::string current;
  std::size_t length = 0;
  bool has_non_digit = false;
  auto flush = [&] {
    if (length >= 2 && has_non_digit) out.push_back(current);
    current.clear();
    length = 0;
    has_non_digit = false;
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (utf8::is_word_char(cp)) {
      utf8::append(current, utf8::to_lower(cp));
      ++length;
      if (!utf8::is_digit(cp)) has_non_digit = true;
    } else if (utf8::is_hyphen(cp) && length > 0 && i + 1 < cps.size() &&
               utf8::is_word_char(cps[i + 1])) {
      current.push_back('-');
      ++length;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

struct Vocabulary {
  std::vector<Token> terms;
  std::unordered_map<Token, std::size_t> index;
  std::vector<std::size_t> counts;     // corpus frequency, aligned with terms
  std::vector<std::size_t> doc_freq;   // aligned with terms
  std::size_t total_docs = 0;
  std::size_t total_tokens = 0;

  std::size_t size() const { return terms.size(); }

  std::optional<std::size_t> find(const Token& t) const {
    auto it = index.find(t);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

/// Counts tokens over the corpus and keeps those occurring at least min_count
/// times, ordered by descending frequency then ascending token.
inline Vocabulary build_vocabulary(std::span<const TokenList> docs, std::size_t min_count) {
  if (min_count == 0) throw Error("build_vocabulary: min_count must be positive");
  std::unordered_map<Token, std::pair<std::size_t, std::size_t>> stats;  // count, df
  std::size_t total_tokens = 0;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : doc) {
      auto& s = stats[t];
      ++s.first;
      ++total_tokens;
    }
    for (const auto& t : doc) {
      if (seen.insert(t).second) ++stats[t].second;
    }
  }
  std::vector<std::pair<Token, std::pair<std::size_t, std::size_t>>> kept;
  for (auto& [t, s] : stats) {
    if (s.first >= min_count) kept.emplace_back(t, s);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  Vocabulary v;
  v.total_docs = docs.size();
  v.total_tokens = total_tokens;
  for (auto& [t, s] : kept) {
    v.index.emplace(t, v.terms.size());
    v.terms.push_back(t);
    v.counts.push_back(s.first);
    v.doc_freq.push_back(s.second);
  }
  return v;
}

struct TfidfModel {
  Vocabulary vocabulary;
  std::vector<double> idf;  // aligned with vocabulary.terms

  double idf_of(const Token& t) const {
    auto i = vocabulary.find(t);
    return i ? idf[*i] : 0.0;
  }
};

/// Smoothed inverse document frequency ln((1 + N) / (1 + df)) + 1.
inline double smoothed_idf(std::size_t total_docs, std::size_t doc_freq) {
  return std::log((1.0 + static_cast<double>(total_docs)) / (1.0 + static_cast<double>(doc_freq))) + 1.0;
}

/// Fits idf weights for the vocabulary. Document frequencies are recounted
/// from docs, so a vocabulary built with a different min_count still gets
/// frequencies consistent with this corpus.
inline TfidfModel fit_tfidf(std::span<const TokenList> docs, Vocabulary vocab) {
  std::vector<std::size_t> df(vocab.size(), 0);
  for (const auto& doc : docs) {
    std::unordered_set<std::size_t> seen;
    for (const auto& t : doc) {
      if (auto i = vocab.find(t)) seen.insert(*i);
    }
    for (auto i : seen) ++df[i];
  }
  vocab.doc_freq = df;
  vocab.total_docs = docs.size();
  TfidfModel model;
  model.idf.resize(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    model.idf[i] = smoothed_idf(vocab.total_docs, df[i]);
  }
  model.vocabulary = std::move(vocab);
  return model;
}

/// local_tf x idf, or 0 for tokens outside the vocabulary.
inline double tfidf_weight(const Token& token, std::size_t local_tf, const TfidfModel& model) {
  return static_cast<double>(local_tf) * model.idf_of(token);
}

/// JSONL sidecar, one line per term: token, ordinal, count, doc_freq, idf.
inline std::string encode_tfidf_sidecar(const TfidfModel& model) {
  std::string out;
  const auto& v = model.vocabulary;
  nlohmann::ordered_json header = {{"total_docs", v.total_docs}, {"total_tokens", v.total_tokens}};
  out += header.dump() + '\n';
  for (std::size_t i = 0; i < v.size(); ++i) {
    nlohmann::ordered_json row = {{"token", v.terms[i]},
                                  {"ordinal", i},
                                  {"count", v.counts[i]},
                                  {"doc_freq", v.doc_freq[i]},
                                  {"idf", model.idf[i]}};
    out += row.dump() + '\n';
  }
  return out;
}

inline TfidfModel decode_tfidf_sidecar(std::string_view text) {
  TfidfModel model;
  auto& v = model.vocabulary;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (header) {
      v.total_docs = j.at("total_docs").get<std::size_t>();
      v.total_tokens = j.at("total_tokens").get<std::size_t>();
      header = false;
      continue;
    }
    const auto ordinal = j.at("ordinal").get<std::size_t>();
    if (ordinal != v.terms.size()) throw Error("tfidf sidecar: ordinals out of order");
    auto token = j.at("token").get<std::string>();
    v.index.emplace(token, ordinal);
    v.terms.push_back(std::move(token));
    v.counts.push_back(j.at("count").get<std::size_t>());
    v.doc_freq.push_back(j.at("doc_freq").get<std::size_t>());
    model.idf.push_back(j.at("idf").get<double>());
  }
  return model;
}

}  // namespace scitech
