#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "scitech/common.hpp"
#include "scitech/textproc.hpp"
#include "scitech/vecfile.hpp"

namespace scitech {

struct DocVector {
  std::string doc_id;
  std::vector<float> vector;
  bool norm_flag = false;

  std::span<const float> view() const { return vector; }
};

class UnembeddableDocument : public Error {
 public:
  explicit UnembeddableDocument(std::string id)
      : Error("unembeddable document: " + id), doc_id(std::move(id)) {}
  std::string doc_id;
};

struct WordEmbeddings {
  Vocabulary vocabulary;
  std::size_t dim = 0;
  std::vector<float> input_vectors;   // V x dim, the published embeddings
  std::vector<float> output_vectors;  // V x dim, context vectors

  std::span<const float> vector_of(std::size_t term) const {
    return {input_vectors.data() + term * dim, dim};
  }
};

struct SgnsParams {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double initial_lr = 0.025;
  std::uint64_t seed = 1;
  /// Frequent-word subsampling threshold (word2vec's `sample`); 0 disables it.
  double subsample = 0.0;
  /// 1 is the deterministic mode. More threads train document shards
  /// concurrently with unsynchronized updates, so results vary run to run.
  std::size_t threads = 1;
};

namespace detail {

inline float sigmoid(float x) {
  if (x > 30.0f) return 1.0f;
  if (x < -30.0f) return 0.0f;
  return 1.0f / (1.0f + std::exp(-x));
}

/// Cumulative unigram^0.75 distribution for negative sampling.
class NegativeSampler {
 public:
  explicit NegativeSampler(const std::vector<std::size_t>& counts) {
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (auto c : counts) {
      total += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(total);
    }
    for (auto& c : cumulative_) c /= total;
  }
  std::size_t sample(Rng& rng) const {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace detail

/// Trains skip-gram word vectors with negative sampling.
///
/// Every (center, context) pair within `window` positions ascends
/// ln s(u_o . v_c) + sum_neg ln s(-u_n . v_c), with negatives drawn from the
/// unigram distribution raised to 0.75. The learning rate decays linearly from
/// initial_lr to initial_lr / 10000 over all training pairs.
inline WordEmbeddings train_sgns(std::span<const TokenList> docs, Vocabulary vocab,
                                 const SgnsParams& params) {
  if (vocab.size() == 0 || docs.empty()) throw Error("nothing to train");
  if (params.dim < 2) throw Error("train_sgns: dim must be at least 2");
  if (params.window == 0 || params.negatives == 0 || params.epochs == 0 || !(params.initial_lr > 0)) {
    throw Error("train_sgns: window, negatives, epochs and initial_lr must be positive");
  }
  const std::size_t dim = params.dim;
  const std::size_t V = vocab.size();

  // Sentences as vocabulary ordinals; OOV tokens are removed before windowing.
  std::vector<std::vector<std::uint32_t>> sentences;
  sentences.reserve(docs.size());
  for (const auto& doc : docs) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : doc) {
      if (auto i = vocab.find(t)) ids.push_back(static_cast<std::uint32_t>(*i));
    }
    if (ids.size() >= 2) sentences.push_back(std::move(ids));
  }
  if (sentences.empty()) throw Error("nothing to train");

  std::vector<double> keep_prob(V, 1.0);
  if (params.subsample > 0.0) {
    const double total = static_cast<double>(vocab.total_tokens);
    for (std::size_t w = 0; w < V; ++w) {
      const double f = static_cast<double>(vocab.counts[w]) / total;
      keep_prob[w] = std::min(1.0, (std::sqrt(f / params.subsample) + 1.0) * params.subsample / f);
    }
  }

  // Exact pair count per epoch without subsampling; with subsampling this is
  // an upper bound and the schedule floor is reached slightly late.
  std::size_t pairs_per_epoch = 0;
  for (const auto& s : sentences) {
    const std::size_t n = s.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i >= params.window ? i - params.window : 0;
      const std::size_t hi = std::min(n - 1, i + params.window);
      pairs_per_epoch += hi - lo;
    }
  }
  const double total_pairs = static_cast<double>(pairs_per_epoch * params.epochs);

  WordEmbeddings emb;
  emb.dim = dim;
  emb.input_vectors.resize(V * dim);
  emb.output_vectors.assign(V * dim, 0.0f);
  {
    Rng init(derive_seed(params.seed, 0xE1));
    for (auto& x : emb.input_vectors) {
      x = static_cast<float>((uniform01(init) - 0.5) / static_cast<double>(dim));
    }
  }
  const detail::NegativeSampler sampler(vocab.counts);
  const double min_lr_fraction = 1e-4;

  const std::size_t threads = std::max<std::size_t>(1, params.threads);
  std::atomic<std::size_t> processed{0};

  auto train_shard = [&](std::size_t shard) {
    Rng rng(derive_seed(params.seed, 0x5EED, shard));
    std::vector<float> grad(dim);
    std::vector<std::uint32_t> kept;
    std::size_t local_processed = 0;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
      for (std::size_t si = shard; si < sentences.size(); si += threads) {
        const auto* sentence = &sentences[si];
        if (params.subsample > 0.0) {
          kept.clear();
          for (auto w : *sentence) {
            if (uniform01(rng) < keep_prob[w]) kept.push_back(w);
          }
          sentence = &kept;
        }
        const std::size_t n = sentence->size();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t center = (*sentence)[i];
          const std::size_t lo = i >= params.window ? i - params.window : 0;
          const std::size_t hi = std::min(n == 0 ? 0 : n - 1, i + params.window);
          float* v = emb.input_vectors.data() + center * dim;
          for (std::size_t j = lo; j <= hi; ++j) {
            if (j == i) continue;
            const std::size_t done =
                threads == 1 ? local_processed : processed.load(std::memory_order_relaxed);
            const double progress = std::min(1.0, static_cast<double>(done) / total_pairs);
            const float lr = static_cast<float>(params.initial_lr *
                                                (1.0 - progress * (1.0 - min_lr_fraction)));
            std::fill(grad.begin(), grad.end(), 0.0f);
            const std::size_t context = (*sentence)[j];
            for (std::size_t s = 0; s <= params.negatives; ++s) {
              std::size_t target;
              float label;
              if (s == 0) {
                target = context;
                label = 1.0f;
              } else {
                target = sampler.sample(rng);
                if (target == context) continue;
                label = 0.0f;
              }
              float* u = emb.output_vectors.data() + target * dim;
              float f = 0.0f;
              for (std::size_t d = 0; d < dim; ++d) f += v[d] * u[d];
              const float g = (label - detail::sigmoid(f)) * lr;
              for (std::size_t d = 0; d < dim; ++d) grad[d] += g * u[d];
              for (std::size_t d = 0; d < dim; ++d) u[d] += g * v[d];
            }
            for (std::size_t d = 0; d < dim; ++d) v[d] += grad[d];
            ++local_processed;
            if (threads > 1) processed.fetch_add(1, std::memory_order_relaxed);
          }
        }
      }
    }
  };

  if (threads == 1) {
    train_shard(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(train_shard, t);
  }

  for (float x : emb.input_vectors) {
    if (!std::isfinite(x)) throw Error("train_sgns: training diverged (non-finite weight)");
  }
  emb.vocabulary = std::move(vocab);
  return emb;
}

/// TF-IDF weighted sum of word vectors, L2-normalized. Token order does not
/// matter; out-of-vocabulary tokens are ignored.
inline DocVector embed_tokens(const TokenList& tokens, const WordEmbeddings& emb,
                              const TfidfModel& tfidf, std::string doc_id = {}) {
  std::map<Token, std::size_t> tf;
  for (const auto& t : tokens) ++tf[t];
  std::vector<double> acc(emb.dim, 0.0);
  double weight_sum = 0.0;
  for (const auto& [token, count] : tf) {
    const auto term = emb.vocabulary.find(token);
    if (!term) continue;
    const double w = tfidf_weight(token, count, tfidf);
    if (w == 0.0) continue;
    weight_sum += w;
    const auto vec = emb.vector_of(*term);
    for (std::size_t d = 0; d < emb.dim; ++d) acc[d] += w * static_cast<double>(vec[d]);
  }
  if (weight_sum == 0.0 || !normalize<double>(acc)) throw UnembeddableDocument(std::move(doc_id));
  DocVector out;
  out.doc_id = std::move(doc_id);
  out.vector.assign(acc.begin(), acc.end());
  out.norm_flag = true;
  return out;
}

struct BindResult {
  std::vector<DocVector> vectors;
  std::vector<std::string> missing;
};

/// Pairs externally computed vectors with corpus ids, normalizing each.
/// Fails when more than max_missing_fraction of the ids have no usable vector.
inline BindResult bind_external(const ExternalVectorSet& vectors, std::span<const std::string> corpus_ids,
                                double max_missing_fraction = 0.05, Warnings* warnings = nullptr) {
  BindResult out;
  for (const auto& id : corpus_ids) {
    const float* v = vectors.find(id);
    if (v == nullptr) {
      out.missing.push_back(id);
      continue;
    }
    DocVector dv;
    dv.doc_id = id;
    dv.vector.assign(v, v + vectors.dim);
    if (!normalize<float>(dv.vector)) {
      out.missing.push_back(id);
      warn(warnings, "zero vector for id '" + id + "'");
      continue;
    }
    dv.norm_flag = true;
    out.vectors.push_back(std::move(dv));
  }
  if (!out.missing.empty()) {
    const double frac = static_cast<double>(out.missing.size()) /
                        static_cast<double>(std::max<std::size_t>(1, corpus_ids.size()));
    std::string list;
    for (std::size_t i = 0; i < out.missing.size() && i < 20; ++i) {
      list += (i ? ", " : "") + out.missing[i];
    }
    if (out.missing.size() > 20) list += ", ...";
    if (frac > max_missing_fraction) {
      throw Error("bind_external: " + std::to_string(out.missing.size()) + " of " +
                  std::to_string(corpus_ids.size()) + " ids have no vector: " + list);
    }
    warn(warnings, "bind_external: ids without vector: " + list);
  }
  return out;
}

inline VectorSet to_vector_set(std::span<const DocVector> docs) {
  VectorSet set;
  if (!docs.empty()) set.dim = static_cast<std::uint32_t>(docs.front().vector.size());
  for (const auto& d : docs) set.add(d.doc_id, d.vector);
  return set;
}

inline std::vector<DocVector> from_vector_set(const VectorSet& set) {
  std::vector<DocVector> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto r = set.row(i);
    out.push_back({set.ids[i], std::vector<float>(r.begin(), r.end()), true});
  }
  return out;
}

/// Word embeddings in the vector file format; ids are vocabulary terms in
/// ordinal order.
inline VectorSet word_vectors_to_set(const WordEmbeddings& emb) {
  VectorSet set;
  set.dim = static_cast<std::uint32_t>(emb.dim);
  for (std::size_t i = 0; i < emb.vocabulary.size(); ++i) {
    set.add(emb.vocabulary.terms[i], emb.vector_of(i));
  }
  return set;
}

/// Rebuilds embeddings from a saved vector set and the tf-idf sidecar's
/// vocabulary. Context vectors are not persisted.
inline WordEmbeddings word_vectors_from_set(const VectorSet& set, const Vocabulary& vocab) {
  if (set.size() != vocab.size()) throw Error("word vectors do not match vocabulary size");
  WordEmbeddings emb;
  emb.dim = set.dim;
  emb.vocabulary = vocab;
  emb.input_vectors = set.values;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.ids[i] != vocab.terms[i]) throw Error("word vectors do not match vocabulary order");
  }
  return emb;
}

}  // namespace scitech
