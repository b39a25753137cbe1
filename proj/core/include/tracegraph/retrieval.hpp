#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tracegraph/graph.hpp"

namespace tracegraph::retrieval {

/// Lower-cases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 are kept inside terms so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct Document {
  VarRef id;
  std::string text;
};

/// Documents plus cached term statistics for BM25.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

  const std::unordered_map<std::string, std::size_t>& term_freqs(std::size_t doc) const {
    return tf_[doc];
  }
  std::size_t length(std::size_t doc) const { return lengths_[doc]; }
  std::size_t doc_freq(const std::string& term) const;
  double avg_length() const { return avg_length_; }

 private:
  std::vector<Document> docs_;
  std::vector<std::unordered_map<std::string, std::size_t>> tf_;
  std::vector<std::size_t> lengths_;
  std::unordered_map<std::string, std::size_t> df_;
  double avg_length_ = 0.0;
};

struct Scored {
  VarRef id;
  double score = 0.0;
  bool operator==(const Scored&) const = default;
};

/// Best first; equal scores ordered by id.
using RankedList = std::vector<Scored>;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Okapi BM25 with idf = ln((N - df + 0.5) / (df + 0.5) + 1). Zero scores
/// are dropped.
RankedList bm25_rank(const Corpus& corpus, std::string_view query, std::size_t top_n,
                     Bm25Params params = {});

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) const;
};

/// Bag-of-words feature hashing: term counts bucketed by FNV-1a(term) % dim,
/// then L2-normalized. Empty token sets embed to the zero vector.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

/// Remote embedder. POSTs {"texts":[...]} to `url` and expects
/// {"vectors":[[...],...]} back, each of length `dim`.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string url, std::size_t dim, std::string api_key = {});
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::string url_;
  std::size_t dim_;
  std::string api_key_;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// Cosine similarity ranking; documents scoring exactly 0 are dropped.
RankedList dense_rank(const Corpus& corpus, std::string_view query,
                      const EmbeddingProvider& provider, std::size_t top_n);

inline constexpr std::size_t kRrfK = 60;

/// Reciprocal rank fusion: score(d) = sum over lists of 1 / (k + rank),
/// rank 1-based. Input scores are ignored; only positions matter.
RankedList rrf_fuse(std::span<const RankedList> lists, std::size_t k = kRrfK,
                    std::size_t top_n = static_cast<std::size_t>(-1));

/// Starting variables for exploration: the top floor(N/2) raw messages of
/// the fused sparse+dense ranking for "question golden_answer", followed by
/// the question variable.
std::vector<VarRef> seed_exploration(const ExecutionGraph& graph, const VarRef& question,
                                     std::string_view golden_answer, std::size_t list_capacity,
                                     const EmbeddingProvider& provider);

/// |top-k seeds ∩ golden| / |golden|, comparing variable ids. Empty golden
/// sets score 0.
double recall_at_k(std::span<const VarRef> seeds, std::span<const std::string> golden_var_ids,
                   std::size_t k = 8);

}  // namespace tracegraph::retrieval
