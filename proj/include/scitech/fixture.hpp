#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scitech/common.hpp"
#include "scitech/ingest.hpp"
#include "scitech/keywords.hpp"

namespace scitech {

/// Synthetic linkage corpus: publications drawn from disjoint theme
/// vocabularies, patents that are either distractors (generic vocabulary
/// only) or planted into one theme, and NER-style annotations for the
/// Method/Task phrases embedded in every publication.
struct FixtureParams {
  std::size_t themes = 3;
  std::size_t publications_per_theme = 200;
  std::size_t distractor_patents = 300;
  std::size_t planted_per_theme = 30;
  std::size_t filtered_patents = 10;  // non-priority or non-IP5, removed at ingest
  std::size_t theme_words = 60;
  std::size_t phrases_per_label = 20;
  std::uint64_t seed = 7;
};

struct Fixture {
  std::vector<PublicationRecord> publications;
  std::vector<PatentRecord> patents;
  std::vector<KeywordAnnotation> annotations;
  std::map<std::string, int> publication_theme;  // doc_id -> theme
  std::map<std::string, int> planted_theme;      // patent_id -> theme, planted patents only
  std::vector<std::vector<std::string>> method_phrases;  // per theme
  std::vector<std::vector<std::string>> task_phrases;    // per theme
};

namespace detail {

/// Pronounceable pseudo-words, unique, at least 5 letters, never stopwords.
inline std::vector<std::string> pseudo_words(std::size_t n, Rng& rng, std::set<std::string>& used) {
  static const char* onsets[] = {"b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                 "br", "cl", "dr", "gr", "pl", "st", "tr", "sk", "sn", "th"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "eo", "ou"};
  static const char* codas[] = {"", "n", "r", "s", "l", "x", "m"};
  const auto& stop = default_stopwords();
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    const std::size_t syllables = 2 + uniform_index(rng, 2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += onsets[uniform_index(rng, std::size(onsets))];
      w += vowels[uniform_index(rng, std::size(vowels))];
    }
    w += codas[uniform_index(rng, std::size(codas))];
    if (w.size() < 5 || stop.contains(w) || !used.insert(w).second) continue;
    out.push_back(w);
  }
  return out;
}

inline std::string pick(const std::vector<std::string>& v, Rng& rng) { return v[uniform_index(rng, v.size())]; }

inline std::string sentence(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace detail

inline Fixture make_fixture(const FixtureParams& params = {}) {
  Rng rng(params.seed);
  std::set<std::string> used;
  const std::vector<std::string> fillers = {"the", "of", "and", "in", "with", "for", "to", "by", "on", "is", "was"};
  const auto generic = detail::pseudo_words(80, rng, used);
  const auto industrial = detail::pseudo_words(60, rng, used);
  std::vector<std::vector<std::string>> theme_vocab;
  for (std::size_t t = 0; t < params.themes; ++t) theme_vocab.push_back(detail::pseudo_words(params.theme_words, rng, used));

  Fixture f;
  // Two-word phrases built from each theme's vocabulary; first half of the
  // vocabulary feeds Method phrases, second half Task phrases.
  for (std::size_t t = 0; t < params.themes; ++t) {
    const auto& v = theme_vocab[t];
    const std::size_t half = v.size() / 2;
    std::vector<std::string> methods, tasks;
    std::set<std::string> seen;
    while (methods.size() < params.phrases_per_label) {
      auto p = v[uniform_index(rng, half)] + " " + v[uniform_index(rng, half)];
      if (seen.insert(p).second) methods.push_back(p);
    }
    while (tasks.size() < params.phrases_per_label) {
      auto p = v[half + uniform_index(rng, v.size() - half)] + " " + v[half + uniform_index(rng, v.size() - half)];
      if (seen.insert(p).second) tasks.push_back(p);
    }
    f.method_phrases.push_back(std::move(methods));
    f.task_phrases.push_back(std::move(tasks));
  }

  static const char* countries[] = {"US", "DE", "JP", "CN", "KR", "FR", "GB", "CH"};
  std::size_t serial = 0;
  for (std::size_t t = 0; t < params.themes; ++t) {
    for (std::size_t i = 0; i < params.publications_per_theme; ++i) {
      PublicationRecord p;
      p.doc_id = "pub-" + std::to_string(++serial);
      std::vector<std::string> title;
      for (int k = 0; k < 4; ++k) title.push_back(detail::pick(theme_vocab[t], rng));
      p.title = detail::sentence(title);
      std::vector<std::string> methods, tasks;
      for (int k = 0; k < 3; ++k) methods.push_back(detail::pick(f.method_phrases[t], rng));
      for (int k = 0; k < 3; ++k) tasks.push_back(detail::pick(f.task_phrases[t], rng));
      std::string abstract;
      for (int s = 0; s < 6; ++s) {
        std::vector<std::string> words;
        for (int k = 0; k < 9; ++k) {
          const double u = uniform01(rng);
          if (u < 0.5) words.push_back(detail::pick(theme_vocab[t], rng));
          else if (u < 0.75) words.push_back(detail::pick(generic, rng));
          else words.push_back(detail::pick(fillers, rng));
        }
        if (s < 3) words.push_back("using " + methods[static_cast<std::size_t>(s)]);
        else words.push_back("for " + tasks[static_cast<std::size_t>(s - 3)]);
        abstract += detail::sentence(words) + ". ";
      }
      abstract.pop_back();
      p.abstract = abstract;
      p.year = 2000 + static_cast<int>(uniform_index(rng, 22));
      p.citation_count = static_cast<std::int64_t>(uniform_index(rng, 500));
      p.countries = {countries[uniform_index(rng, std::size(countries))]};
      p.journal = "Journal of Synthetic Studies " + std::to_string(t + 1);
      f.publication_theme[p.doc_id] = static_cast<int>(t);
      for (const auto& m : methods) f.annotations.push_back({p.doc_id, m, KeywordLabel::Method});
      for (const auto& k : tasks) f.annotations.push_back({p.doc_id, k, KeywordLabel::Task});
      f.annotations.push_back({p.doc_id, title[0] + " " + title[1], KeywordLabel::Other});
      f.publications.push_back(std::move(p));
    }
  }
  shuffle(f.publications, rng);

  auto make_patent = [&](const std::string& id, int theme) {
    PatentRecord p;
    p.patent_id = id;
    std::vector<std::string> words;
    for (int k = 0; k < 50; ++k) {
      const double u = uniform01(rng);
      if (theme >= 0 && u < 0.5) words.push_back(detail::pick(theme_vocab[static_cast<std::size_t>(theme)], rng));
      else if (u < 0.75) words.push_back(detail::pick(theme >= 0 ? generic : industrial, rng));
      else words.push_back(detail::pick(fillers, rng));
    }
    p.abstract = detail::sentence(words) + ".";
    p.priority_year = 2000 + static_cast<int>(uniform_index(rng, 22));
    p.family_id = "fam-" + id;
    p.offices = {std::vector<std::string>{"US", "EP", "JP", "KR", "CN"}[uniform_index(rng, 5)]};
    const std::size_t nc = 1 + uniform_index(rng, 2);
    for (std::size_t c = 0; c < nc; ++c) {
      std::string code = countries[uniform_index(rng, std::size(countries))];
      if (std::find(p.applicant_countries.begin(), p.applicant_countries.end(), code) == p.applicant_countries.end()) {
        p.applicant_countries.push_back(code);
      }
    }
    const std::size_t nf = 1 + uniform_index(rng, 3);
    for (std::size_t c = 0; c < nf; ++c) {
      const int field = 1 + static_cast<int>(uniform_index(rng, 35));
      if (std::find(p.tech_fields.begin(), p.tech_fields.end(), field) == p.tech_fields.end()) {
        p.tech_fields.push_back(field);
      }
    }
    p.is_priority = true;
    return p;
  };
  serial = 0;
  for (std::size_t i = 0; i < params.distractor_patents; ++i) {
    f.patents.push_back(make_patent("pat-" + std::to_string(++serial), -1));
  }
  for (std::size_t t = 0; t < params.themes; ++t) {
    for (std::size_t i = 0; i < params.planted_per_theme; ++i) {
      auto p = make_patent("pat-" + std::to_string(++serial), static_cast<int>(t));
      f.planted_theme[p.patent_id] = static_cast<int>(t);
      f.patents.push_back(std::move(p));
    }
  }
  for (std::size_t i = 0; i < params.filtered_patents; ++i) {
    auto p = make_patent("pat-" + std::to_string(++serial), -1);
    if (i % 2 == 0) p.is_priority = false;
    else p.offices = {"BR"};
    f.patents.push_back(std::move(p));
  }
  shuffle(f.patents, rng);
  return f;
}

/// Pipeline config for a fixture directory: defaults plus input paths.
inline nlohmann::ordered_json fixture_config() {
  return {{"seed", 1},
          {"inputs",
           {{"publications", "publications.jsonl"},
            {"patents", "patents.jsonl"},
            {"annotations", "annotations.jsonl"}}}};
}

inline nlohmann::ordered_json fixture_truth(const Fixture& f) {
  nlohmann::ordered_json pubs = nlohmann::ordered_json::object();
  for (const auto& [id, t] : f.publication_theme) pubs[id] = t;
  nlohmann::ordered_json planted = nlohmann::ordered_json::object();
  for (const auto& [id, t] : f.planted_theme) planted[id] = t;
  return {{"publication_theme", std::move(pubs)}, {"planted_theme", std::move(planted)}};
}

/// Writes publications.jsonl, patents.jsonl, annotations.jsonl, truth.json
/// and config.json into dir.
inline void write_fixture(const Fixture& f, const std::filesystem::path& dir) {
  write_file_atomic(dir / "publications.jsonl", write_publications_jsonl(f.publications));
  write_file_atomic(dir / "patents.jsonl", write_patents_jsonl(f.patents));
  write_file_atomic(dir / "annotations.jsonl", write_annotations_jsonl(f.annotations));
  write_file_atomic(dir / "truth.json", fixture_truth(f).dump(2) + '\n');
  write_file_atomic(dir / "config.json", fixture_config().dump(2) + '\n');
}

}  // namespace scitech
