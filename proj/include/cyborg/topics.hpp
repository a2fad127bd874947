#pragma once

// LDA topic model fit by collapsed Gibbs sampling.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cyborg/ingest.hpp"

namespace cyborg::topics {

using StopWords = std::set<std::string>;

// One word per line; blank lines ignored.
StopWords load_stopwords(const std::filesystem::path& path);

// Lowercases, drops URL tokens (http://, https://, www.) and @mentions,
// strips '#', splits on every byte that is not an ASCII letter or digit,
// then removes stop words and tokens shorter than 2 characters.
std::vector<std::string> tokenize(std::string_view text, const StopWords& stopwords);

struct Corpus {
  std::vector<std::vector<std::size_t>> documents;  // token ids, no empty documents
  std::vector<std::string> vocabulary;              // sorted; id = position
  std::vector<std::string> doc_ids;                 // source id per document

  std::size_t token_count() const;
};

// Documents that tokenize to nothing are dropped.
Corpus make_corpus(const std::vector<std::vector<std::string>>& documents, std::vector<std::string> doc_ids = {});
Corpus preprocess(const std::vector<ingest::PostRecord>& posts, const StopWords& stopwords);

struct LdaOptions {
  std::size_t topics = 5;
  double alpha = -1.0;  // negative: 50 / topics
  double beta = 0.01;
  int iterations = 1000;
  std::uint64_t seed = 0;
};

// Sampler counts after a full sweep, handed to an optional observer.
struct GibbsState {
  int sweep = 0;  // 1-based
  const std::vector<std::vector<std::uint32_t>>* topic_word = nullptr;  // K x V
  const std::vector<std::uint32_t>* topic_totals = nullptr;             // K
  const std::vector<std::vector<std::uint32_t>>* doc_topic = nullptr;   // D x K
  double log_likelihood = 0.0;  // log p(words | assignments)
};
using SweepObserver = std::function<void(const GibbsState&)>;

struct TopicModel {
  std::size_t topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<std::string> vocabulary;
  std::vector<std::vector<double>> topic_word;  // K x V, (n_kw + beta) / (n_k + V beta)
  std::vector<std::vector<double>> doc_topic;   // D x K, (n_dk + alpha) / (len_d + K alpha)
};

// Random initial assignments, then `iterations` sweeps in document order.
// Deterministic for a given seed. Throws InvalidArgument on an empty corpus,
// topics == 0, or more topics than tokens.
TopicModel lda_fit(const Corpus& corpus, const LdaOptions& options = {}, const SweepObserver& observer = {});

// The n most probable terms of a topic; equal probabilities are ordered
// lexicographically.
std::vector<std::pair<std::string, double>> top_terms(const TopicModel& model, std::size_t topic, std::size_t n = 10);

}  // namespace cyborg::topics
