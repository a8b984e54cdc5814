#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scitech/cluster.hpp"
#include "scitech/common.hpp"
#include "scitech/ingest.hpp"
#include "scitech/textproc.hpp"

namespace scitech {

enum class KeywordLabel { Method, Task, Other };

inline std::string to_string(KeywordLabel l) {
  switch (l) {
    case KeywordLabel::Method: return "Method";
    case KeywordLabel::Task: return "Task";
    case KeywordLabel::Other: return "Other";
  }
  return "Other";
}

inline std::optional<KeywordLabel> parse_keyword_label(std::string_view s) {
  if (s == "Method") return KeywordLabel::Method;
  if (s == "Task") return KeywordLabel::Task;
  if (s == "Other") return KeywordLabel::Other;
  return std::nullopt;
}

inline constexpr KeywordLabel kAllLabels[] = {KeywordLabel::Method, KeywordLabel::Task, KeywordLabel::Other};

struct KeywordAnnotation {
  std::string doc_id;
  std::string surface;
  KeywordLabel label = KeywordLabel::Other;

  bool operator==(const KeywordAnnotation&) const = default;
};

/// Case-folds and collapses internal whitespace; hyphens are untouched.
inline std::string normalize_keyword(std::string_view surface) {
  std::string out;
  bool pending_space = false;
  for (char32_t cp : utf8::decode(surface)) {
    const bool space = cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == 0xA0;
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    utf8::append(out, utf8::to_lower(cp));
  }
  return out;
}

/// Reads (doc_id, surface, label) JSONL. Rows with unknown labels, empty
/// surfaces, or doc_ids outside `corpus_ids` (when given) are reported and skipped.
inline ParseResult<KeywordAnnotation> ingest_ner_annotations(
    const std::filesystem::path& path, const std::unordered_set<std::string>* corpus_ids = nullptr) {
  ParseResult<KeywordAnnotation> out;
  const std::string text = read_file(path);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto doc_id = j.at("doc_id").get<std::string>();
      const auto surface = j.at("surface").get<std::string>();
      const auto label_text = j.at("label").get<std::string>();
      const auto label = parse_keyword_label(label_text);
      if (!label) {
        out.errors.push_back({line_no, "unknown label '" + label_text + "'"});
        continue;
      }
      if (detail::trim(surface).empty()) {
        out.errors.push_back({line_no, "empty surface"});
        continue;
      }
      if (corpus_ids != nullptr && !corpus_ids->contains(doc_id)) {
        out.errors.push_back({line_no, "doc_id '" + doc_id + "' not in corpus"});
        continue;
      }
      out.records.push_back({doc_id, surface, *label});
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({line_no, std::string("malformed annotation: ") + e.what()});
    }
  }
  return out;
}

inline std::string write_annotations_jsonl(std::span<const KeywordAnnotation> annotations) {
  std::string out;
  for (const auto& a : annotations) {
    nlohmann::ordered_json j = {{"doc_id", a.doc_id}, {"surface", a.surface}, {"label", to_string(a.label)}};
    out += j.dump() + '\n';
  }
  return out;
}

/// The fixed 300-word English stopword list used by extract_rake (also in
/// docs/stopwords.txt).
inline const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
    "a", "about", "above", "according", "across", "actually", "after", "afterwards", "again",
    "against", "all", "almost", "alone", "along", "already", "also", "although", "always", "am",
    "among", "amongst", "an", "and", "another", "any", "anyhow", "anyone", "anything", "anyway",
    "anywhere", "are", "around", "as", "at", "be", "became", "because", "become", "becomes",
    "becoming", "been", "before", "beforehand", "behind", "being", "below", "beside", "besides",
    "between", "beyond", "both", "but", "by", "can", "cannot", "could", "did", "do", "does",
    "doing", "done", "down", "due", "during", "each", "either", "else", "elsewhere", "enough",
    "especially", "etc", "even", "ever", "every", "everyone", "everything", "everywhere",
    "except", "few", "finally", "first", "for", "former", "formerly", "found", "from",
    "further", "furthermore", "generally", "given", "had", "has", "have", "having", "he",
    "hence", "her", "here", "hereafter", "hereby", "herein", "hers", "herself", "him",
    "himself", "his", "how", "however", "i", "if", "in", "include", "included", "includes",
    "including", "indeed", "into", "is", "it", "its", "itself", "just", "largely", "last",
    "later", "latter", "least", "less", "like", "likely", "made", "mainly", "make", "makes",
    "many", "may", "me", "meanwhile", "might", "more", "moreover", "most", "mostly", "much",
    "must", "my", "myself", "namely", "near", "nearly", "neither", "never", "nevertheless",
    "next", "no", "nobody", "none", "nor", "not", "nothing", "now", "nowhere", "obtained", "of",
    "off", "often", "on", "once", "one", "only", "onto", "or", "other", "others", "otherwise",
    "our", "ours", "ourselves", "out", "over", "overall", "own", "per", "perhaps", "possible",
    "possibly", "present", "presented", "previously", "quite", "rather", "really", "regarding",
    "relatively", "respectively", "same", "several", "shall", "she", "should", "show", "showed",
    "shown", "shows", "significantly", "similar", "similarly", "since", "so", "some", "somehow",
    "someone", "something", "sometimes", "somewhat", "somewhere", "still", "such", "suggest",
    "suggests", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "thence", "there", "thereafter", "thereby", "therefore", "therein", "these", "they", "this",
    "those", "though", "through", "throughout", "thus", "to", "together", "too", "toward",
    "towards", "two", "under", "undergo", "unless", "until", "up", "upon", "us", "use", "used",
    "uses", "using", "usually", "various", "very", "via", "was", "we", "well", "were", "what",
    "whatever", "when", "whence", "whenever", "where", "whereas", "whereby", "wherein",
    "whether", "which", "while", "who", "whoever", "whole", "whom", "whose", "why", "will",
    "with", "within", "without", "would", "yet", "you", "your", "yours", "yourself",
    "yourselves", "abstract", "addition", "additionally", "aim",
  };
  return words;
}

namespace detail {

inline bool is_space(char32_t cp) { return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r'; }

/// RAKE candidate phrases: maximal runs of content words. Stopwords,
/// punctuation (other than intra-word hyphens) and tokens the tokenizer drops
/// (numbers, single characters) all end a phrase.
inline std::vector<std::vector<std::string>> rake_candidates(std::string_view text,
                                                             const std::unordered_set<std::string>& stopwords) {
  std::vector<std::vector<std::string>> phrases;
  std::vector<std::string> current;
  auto close = [&] {
    if (!current.empty()) phrases.push_back(std::move(current));
    current.clear();
  };
  const auto cps = utf8::decode(text);
  std::string word;
  for (std::size_t i = 0; i <= cps.size(); ++i) {
    const bool end = i == cps.size();
    if (!end) {
      const char32_t cp = cps[i];
      const bool hyphen_inside = utf8::is_hyphen(cp) && !word.empty() && i + 1 < cps.size() &&
                                 utf8::is_word_char(cps[i + 1]);
      if (utf8::is_word_char(cp) || hyphen_inside) {
        utf8::append(word, cp);
        continue;
      }
    }
    if (!word.empty()) {
      const auto toks = tokenize(word);
      if (toks.size() == 1 && !stopwords.contains(toks[0])) {
        current.push_back(toks[0]);
      } else {
        close();
      }
      word.clear();
    }
    if (end || !is_space(cps[i])) close();
  }
  return phrases;
}

inline std::string rake_text(const PublicationRecord& doc) {
  return doc.title.empty() ? doc.abstract : doc.title + ". " + doc.abstract;
}

}  // namespace detail

/// RAKE phrase scores for one document: each word scores degree / frequency
/// (degree = summed lengths of the candidates containing it), a phrase the sum
/// of its word scores.
inline std::map<std::string, double> rake_scores(const PublicationRecord& doc,
                                                 const std::unordered_set<std::string>& stopwords) {
  const auto phrases = detail::rake_candidates(detail::rake_text(doc), stopwords);
  std::unordered_map<std::string, double> freq, degree;
  for (const auto& p : phrases) {
    for (const auto& w : p) {
      freq[w] += 1.0;
      degree[w] += static_cast<double>(p.size());
    }
  }
  std::map<std::string, double> out;
  for (const auto& p : phrases) {
    std::string key;
    double score = 0.0;
    for (const auto& w : p) {
      if (!key.empty()) key += ' ';
      key += w;
      score += degree[w] / freq[w];
    }
    out.emplace(std::move(key), score);
  }
  return out;
}

inline constexpr std::size_t kRakeMaxPhrases = 15;

/// Top 15 RAKE phrases of title + abstract (ties by phrase text), labeled Other.
inline std::vector<KeywordAnnotation> extract_rake(const PublicationRecord& doc,
                                                   const std::unordered_set<std::string>& stopwords) {
  const auto scores = rake_scores(doc, stopwords);
  std::vector<std::pair<std::string, double>> ranked(scores.begin(), scores.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > kRakeMaxPhrases) ranked.resize(kRakeMaxPhrases);
  std::vector<KeywordAnnotation> out;
  for (auto& [phrase, score] : ranked) out.push_back({doc.doc_id, phrase, KeywordLabel::Other});
  return out;
}

// ---------------------------------------------------------------------------
// Class-based TF-IDF

struct RankedKeyword {
  std::string keyword;  // display form: most frequent original casing
  std::string normalized;
  double score = 0.0;
  std::size_t occurrences = 0;
};

struct TopicKeywordProfile {
  int topic_id = 0;
  std::map<KeywordLabel, std::vector<RankedKeyword>> ranked;

  bool empty() const {
    return std::all_of(ranked.begin(), ranked.end(), [](const auto& kv) { return kv.second.empty(); });
  }
  const std::vector<RankedKeyword>& of(KeywordLabel l) const {
    static const std::vector<RankedKeyword> none;
    auto it = ranked.find(l);
    return it == ranked.end() ? none : it->second;
  }
};

/// c-TF-IDF score tf x ln(1 + A / f): tf = occurrences in the topic, f =
/// occurrences across all topics, A = mean keyword occurrences per topic.
inline double ctfidf_score(double tf, double total_occurrences, double avg_per_topic) {
  return tf * std::log(1.0 + avg_per_topic / total_occurrences);
}

/// Ranks each topic's keywords per label. Every topic is one pseudo-document
/// made of its members' keyword occurrences; keywords are keyed by (label,
/// normalized form). Annotations of documents outside every topic are ignored.
inline std::vector<TopicKeywordProfile> rank_ctfidf(std::span<const Topic> topics,
                                                    std::span<const KeywordAnnotation> annotations,
                                                    Warnings* warnings = nullptr) {
  std::unordered_map<std::string, std::size_t> topic_of_doc;
  for (std::size_t t = 0; t < topics.size(); ++t) {
    for (const auto& id : topics[t].member_doc_ids) topic_of_doc.emplace(id, t);
  }
  using Key = std::pair<KeywordLabel, std::string>;
  std::vector<std::map<Key, std::size_t>> tf(topics.size());
  std::map<Key, std::size_t> total;
  std::map<Key, std::map<std::string, std::size_t>> casings;
  std::size_t all_occurrences = 0;
  for (const auto& a : annotations) {
    auto it = topic_of_doc.find(a.doc_id);
    if (it == topic_of_doc.end()) continue;
    Key key{a.label, normalize_keyword(a.surface)};
    if (key.second.empty()) continue;
    ++tf[it->second][key];
    ++total[key];
    // Display casing keeps the original case with collapsed whitespace.
    std::string display;
    bool pending = false;
    for (char32_t cp : utf8::decode(a.surface)) {
      if (detail::is_space(cp) || cp == 0xA0) { pending = !display.empty(); continue; }
      if (pending) display.push_back(' ');
      pending = false;
      utf8::append(display, cp);
    }
    ++casings[key][display];
    ++all_occurrences;
  }
  const double avg = topics.empty() ? 0.0 : static_cast<double>(all_occurrences) / static_cast<double>(topics.size());

  std::vector<TopicKeywordProfile> out;
  out.reserve(topics.size());
  for (std::size_t t = 0; t < topics.size(); ++t) {
    TopicKeywordProfile profile;
    profile.topic_id = topics[t].topic_id;
    if (tf[t].empty()) {
      warn(warnings, "topic " + std::to_string(topics[t].topic_id) + " has no keyword annotations");
    }
    for (const auto& [key, count] : tf[t]) {
      const auto& cases = casings[key];
      std::string display = cases.begin()->first;
      std::size_t best = 0;
      for (const auto& [form, n] : cases) {
        if (n > best) { best = n; display = form; }
      }
      profile.ranked[key.first].push_back(
          {display, key.second,
           ctfidf_score(static_cast<double>(count), static_cast<double>(total[key]), avg), count});
    }
    for (auto& [label, list] : profile.ranked) {
      std::stable_sort(list.begin(), list.end(), [](const RankedKeyword& a, const RankedKeyword& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.normalized < b.normalized;
      });
    }
    out.push_back(std::move(profile));
  }
  return out;
}

/// JSONL rows (topic_id, label, keyword, score, rank), rank starting at 1.
inline std::string write_profiles_jsonl(std::span<const TopicKeywordProfile> profiles) {
  std::string out;
  for (const auto& p : profiles) {
    for (auto label : kAllLabels) {
      const auto& list = p.of(label);
      for (std::size_t r = 0; r < list.size(); ++r) {
        nlohmann::ordered_json j = {{"topic_id", p.topic_id},
                                    {"label", to_string(label)},
                                    {"keyword", list[r].keyword},
                                    {"normalized", list[r].normalized},
                                    {"score", list[r].score},
                                    {"occurrences", list[r].occurrences},
                                    {"rank", r + 1}};
        out += j.dump() + '\n';
      }
    }
  }
  return out;
}

/// Reads profiles written by write_profiles_jsonl. Topics without rows are
/// returned only if listed in `topic_ids`.
inline std::vector<TopicKeywordProfile> read_profiles_jsonl(std::string_view text,
                                                            std::span<const int> topic_ids = {}) {
  std::map<int, TopicKeywordProfile> by_topic;
  for (int id : topic_ids) by_topic[id].topic_id = id;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const int id = j.at("topic_id").get<int>();
    auto label = parse_keyword_label(j.at("label").get<std::string>());
    if (!label) throw Error("profile row with unknown label");
    auto& p = by_topic[id];
    p.topic_id = id;
    p.ranked[*label].push_back({j.at("keyword").get<std::string>(), j.at("normalized").get<std::string>(),
                                j.at("score").get<double>(), j.at("occurrences").get<std::size_t>()});
  }
  std::vector<TopicKeywordProfile> out;
  for (auto& [id, p] : by_topic) out.push_back(std::move(p));
  return out;
}

}  // namespace scitech
