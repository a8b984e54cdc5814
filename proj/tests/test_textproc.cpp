#include <gtest/gtest.h>

#include <cmath>

#include "scitech/textproc.hpp"

using namespace scitech;

TEST(Tokenize, Empty) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, HyphenKeptPunctuationDropped) {
  EXPECT_EQ(tokenize("Slow-wave sleep, REM sleep."), (TokenList{"slow-wave", "sleep", "rem", "sleep"}));
}

TEST(Tokenize, NumbersDroppedUnicodeFolded) {
  EXPECT_EQ(tokenize("EEG 2020 \xce\xb1-band"), (TokenList{"eeg", "\xce\xb1-band"}));
}

TEST(Tokenize, EdgeHyphensAndSingleCharacters) {
  EXPECT_EQ(tokenize("-lead trail- a b cd 3-4 x2"), (TokenList{"lead", "trail", "cd", "x2"}));
  EXPECT_EQ(tokenize("\xc3\x84RGER"), (TokenList{"\xc3\xa4rger"}));
}

TEST(Vocabulary, EmptyCorpus) {
  const auto v = build_vocabulary(std::vector<TokenList>{}, 1);
  EXPECT_EQ(v.size(), 0u);
}

TEST(Vocabulary, MinCountThreshold) {
  const std::vector<TokenList> docs = {{"a", "a", "b"}};
  const auto v = build_vocabulary(docs, 2);
  EXPECT_EQ(v.terms, (std::vector<Token>{"a"}));
}

TEST(Vocabulary, DocumentFrequency) {
  const std::vector<TokenList> docs = {{"x", "y"}, {"y", "z"}};
  const auto v = build_vocabulary(docs, 1);
  EXPECT_EQ(v.total_docs, 2u);
  EXPECT_EQ(v.doc_freq[*v.find("x")], 1u);
  EXPECT_EQ(v.doc_freq[*v.find("y")], 2u);
  EXPECT_EQ(v.doc_freq[*v.find("z")], 1u);
  EXPECT_EQ(v.terms.front(), "y");
  EXPECT_EQ(v.total_tokens, 4u);
}

TEST(Tfidf, IdfValues) {
  const std::vector<TokenList> docs = {{"all", "one"}, {"all"}, {"all"}};
  const auto m = fit_tfidf(docs, build_vocabulary(docs, 1));
  EXPECT_NEAR(m.idf_of("all"), 1.0, 1e-12);
  EXPECT_NEAR(m.idf_of("one"), std::log(4.0 / 2.0) + 1.0, 1e-12);
  EXPECT_NEAR(m.idf_of("one"), 1.6931, 1e-4);
}

TEST(Tfidf, EmptyCorpus) {
  const std::vector<TokenList> docs;
  const auto m = fit_tfidf(docs, build_vocabulary(docs, 1));
  EXPECT_TRUE(m.idf.empty());
}

TEST(Tfidf, Weights) {
  const std::vector<TokenList> docs = {{"all", "one"}, {"all"}, {"all"}};
  const auto m = fit_tfidf(docs, build_vocabulary(docs, 1));
  EXPECT_EQ(tfidf_weight("oov", 3, m), 0.0);
  EXPECT_EQ(tfidf_weight("all", 1, m), m.idf_of("all"));
  EXPECT_DOUBLE_EQ(tfidf_weight("one", 2, m), 2.0 * m.idf_of("one"));
  TfidfModel fixed = m;
  fixed.idf[*fixed.vocabulary.find("one")] = 1.5;
  EXPECT_DOUBLE_EQ(tfidf_weight("one", 2, fixed), 3.0);
}

TEST(Tfidf, SidecarRoundTrip) {
  const std::vector<TokenList> docs = {{"alpha", "beta", "beta"}, {"beta", "gamma"}};
  const auto m = fit_tfidf(docs, build_vocabulary(docs, 1));
  const auto text = encode_tfidf_sidecar(m);
  const auto back = decode_tfidf_sidecar(text);
  EXPECT_EQ(back.vocabulary.terms, m.vocabulary.terms);
  EXPECT_EQ(back.vocabulary.counts, m.vocabulary.counts);
  EXPECT_EQ(back.vocabulary.doc_freq, m.vocabulary.doc_freq);
  EXPECT_EQ(back.idf, m.idf);
  EXPECT_EQ(encode_tfidf_sidecar(back), text);
}
