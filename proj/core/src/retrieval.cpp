#include "tracegraph/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "tracegraph/errors.hpp"
#include "tracegraph/text_util.hpp"
#include "http_util.hpp"

namespace tracegraph::retrieval {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    bool ascii_alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (ascii_alnum || c >= 0x80) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

Corpus::Corpus(std::vector<Document> documents) : docs_(std::move(documents)) {
  std::set<VarRef> ids;
  for (const auto& d : docs_) {
    if (!ids.insert(d.id).second) throw ConfigError("duplicate document id " + to_string(d.id));
  }
  tf_.resize(docs_.size());
  lengths_.resize(docs_.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    auto terms = tokenize(docs_[i].text);
    lengths_[i] = terms.size();
    total += terms.size();
    for (auto& t : terms) ++tf_[i][t];
    for (const auto& [term, _] : tf_[i]) ++df_[term];
  }
  avg_length_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
}

std::size_t Corpus::doc_freq(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

namespace {

RankedList finish_ranking(RankedList scored, std::size_t top_n) {
  std::erase_if(scored, [](const Scored& s) { return s.score == 0.0; });
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (scored.size() > top_n) scored.resize(top_n);
  return scored;
}

}  // namespace

RankedList bm25_rank(const Corpus& corpus, std::string_view query, std::size_t top_n,
                     Bm25Params params) {
  if (top_n == 0) throw ConfigError("bm25_rank: top_n must be >= 1");
  if (corpus.empty()) return {};
  const auto terms = tokenize(query);
  const double n = static_cast<double>(corpus.size());
  const double avgdl = corpus.avg_length();

  RankedList scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& tf = corpus.term_freqs(i);
    const double dl = static_cast<double>(corpus.length(i));
    const double norm = avgdl > 0.0 ? dl / avgdl : 0.0;
    double score = 0.0;
    for (const auto& term : terms) {
      auto it = tf.find(term);
      if (it == tf.end()) continue;
      const double df = static_cast<double>(corpus.doc_freq(term));
      const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      const double f = static_cast<double>(it->second);
      score += idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * norm));
    }
    scored.push_back({corpus.documents()[i].id, score});
  }
  return finish_ranking(std::move(scored), top_n);
}

std::vector<std::vector<double>> EmbeddingProvider::embed_batch(
    std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  for (const auto& term : tokenize(text)) v[text::fnv1a64(term) % dim_] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::size_t dim,
                                             std::string api_key)
    : url_(std::move(url)), dim_(dim), api_key_(std::move(api_key)) {
  if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<double> HttpEmbeddingProvider::embed(std::string_view text) const {
  std::string one(text);
  return embed_batch(std::span<const std::string>(&one, 1)).front();
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) const {
  nlohmann::json request;
  request["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  nlohmann::json response = detail::post_json(url_, request, api_key_);
  const auto it = response.find("vectors");
  if (it == response.end() || !it->is_array() || it->size() != texts.size()) {
    throw BackendError("embedding response lacks a matching 'vectors' array", false);
  }
  std::vector<std::vector<double>> out;
  for (const auto& row : *it) {
    if (!row.is_array() || row.size() != dim_) {
      throw BackendError("embedding vector has wrong dimension", false);
    }
    out.push_back(row.get<std::vector<double>>());
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RankedList dense_rank(const Corpus& corpus, std::string_view query,
                      const EmbeddingProvider& provider, std::size_t top_n) {
  if (top_n == 0) throw ConfigError("dense_rank: top_n must be >= 1");
  if (corpus.empty()) return {};
  const auto q = provider.embed(query);
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& d : corpus.documents()) texts.push_back(d.text);
  const auto vectors = provider.embed_batch(texts);

  RankedList scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scored.push_back({corpus.documents()[i].id, cosine(q, vectors[i])});
  }
  return finish_ranking(std::move(scored), top_n);
}

RankedList rrf_fuse(std::span<const RankedList> lists, std::size_t k, std::size_t top_n) {
  std::map<VarRef, double> fused;
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      fused[list[r].id] += 1.0 / static_cast<double>(k + r + 1);
    }
  }
  RankedList out;
  out.reserve(fused.size());
  for (const auto& [id, score] : fused) out.push_back({id, score});
  std::stable_sort(out.begin(), out.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

std::vector<VarRef> seed_exploration(const ExecutionGraph& graph, const VarRef& question,
                                     std::string_view golden_answer, std::size_t list_capacity,
                                     const EmbeddingProvider& provider) {
  const VariableVersion& q = graph.version(question);

  std::vector<Document> docs;
  for (const auto& chain : graph.variables()) {
    if (chain.category != "raw_message" || chain.versions.empty()) continue;
    const auto& latest = chain.latest();
    docs.push_back({VarRef{chain.var_id, latest.version}, latest.value});
  }

  std::vector<VarRef> seeds;
  const std::size_t keep = list_capacity / 2;
  if (!docs.empty() && keep > 0) {
    Corpus corpus(std::move(docs));
    const std::string query = q.value + " " + std::string(golden_answer);
    const std::size_t per_list = std::max<std::size_t>(list_capacity, 1);
    const RankedList lists[] = {bm25_rank(corpus, query, per_list),
                                dense_rank(corpus, query, provider, per_list)};
    for (const auto& hit : rrf_fuse(lists, kRrfK, keep)) seeds.push_back(hit.id);
  }
  seeds.push_back(question);
  return seeds;
}

double recall_at_k(std::span<const VarRef> seeds, std::span<const std::string> golden_var_ids,
                   std::size_t k) {
  std::set<std::string> golden(golden_var_ids.begin(), golden_var_ids.end());
  if (golden.empty()) return 0.0;
  std::set<std::string> hit;
  for (std::size_t i = 0; i < seeds.size() && i < k; ++i) {
    if (golden.contains(seeds[i].var_id)) hit.insert(seeds[i].var_id);
  }
  return static_cast<double>(hit.size()) / static_cast<double>(golden.size());
}

}  // namespace tracegraph::retrieval
