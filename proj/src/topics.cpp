#include "cyborg/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cyborg/error.hpp"
#include "cyborg/rng.hpp"

namespace cyborg::topics {

StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stop-word list " + path.string());
  StopWords words;
  std::string line;
  while (std::getline(in, line)) {
    std::string w;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!w.empty()) words.insert(w);
  }
  return words;
}

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool is_token_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalnum(u);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const StopWords& stopwords) {
  std::vector<std::string> out;
  auto emit = [&](std::string& tok) {
    if (tok.size() >= 2 && !stopwords.count(tok)) out.push_back(tok);
    tok.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string word(text.substr(i, j - i));
    i = j;
    if (word.empty()) continue;
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (starts_with(word, "http://") || starts_with(word, "https://") || starts_with(word, "www.") || word[0] == '@')
      continue;
    std::string tok;
    for (char c : word) {
      if (is_token_char(c))
        tok += c;
      else
        emit(tok);
    }
    emit(tok);
  }
  return out;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

Corpus make_corpus(const std::vector<std::vector<std::string>>& documents, std::vector<std::string> doc_ids) {
  if (!doc_ids.empty() && doc_ids.size() != documents.size())
    throw InvalidArgument("make_corpus: doc_ids size differs from documents");
  Corpus c;
  std::set<std::string> vocab;
  for (const auto& d : documents) vocab.insert(d.begin(), d.end());
  c.vocabulary.assign(vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (documents[i].empty()) continue;
    std::vector<std::size_t> ids;
    ids.reserve(documents[i].size());
    for (const auto& w : documents[i])
      ids.push_back(std::lower_bound(c.vocabulary.begin(), c.vocabulary.end(), w) - c.vocabulary.begin());
    c.documents.push_back(std::move(ids));
    c.doc_ids.push_back(doc_ids.empty() ? std::to_string(i) : doc_ids[i]);
  }
  return c;
}

Corpus preprocess(const std::vector<ingest::PostRecord>& posts, const StopWords& stopwords) {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::string> ids;
  docs.reserve(posts.size());
  ids.reserve(posts.size());
  for (const auto& p : posts) {
    docs.push_back(tokenize(p.text, stopwords));
    ids.push_back(p.post_id);
  }
  return make_corpus(docs, std::move(ids));
}

TopicModel lda_fit(const Corpus& corpus, const LdaOptions& options, const SweepObserver& observer) {
  const std::size_t K = options.topics;
  const std::size_t V = corpus.vocabulary.size();
  const std::size_t D = corpus.documents.size();
  const std::size_t N = corpus.token_count();
  if (D == 0 || N == 0) throw InvalidArgument("lda_fit: empty corpus");
  if (K == 0) throw InvalidArgument("lda_fit: topics must be >= 1");
  if (K > N) throw InvalidArgument("lda_fit: more topics (" + std::to_string(K) + ") than tokens (" + std::to_string(N) + ")");
  if (!(options.beta > 0.0)) throw InvalidArgument("lda_fit: beta must be > 0");
  if (options.iterations < 0) throw InvalidArgument("lda_fit: iterations must be >= 0");
  const double alpha = options.alpha < 0.0 ? 50.0 / static_cast<double>(K) : options.alpha;
  if (!(alpha > 0.0)) throw InvalidArgument("lda_fit: alpha must be > 0");
  const double beta = options.beta;
  const double vbeta = static_cast<double>(V) * beta;

  std::vector<std::vector<std::uint32_t>> nkw(K, std::vector<std::uint32_t>(V, 0));
  std::vector<std::uint32_t> nk(K, 0);
  std::vector<std::vector<std::uint32_t>> ndk(D, std::vector<std::uint32_t>(K, 0));
  std::vector<std::vector<std::uint32_t>> z(D);

  Rng rng(options.seed);
  for (std::size_t d = 0; d < D; ++d) {
    z[d].resize(corpus.documents[d].size());
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      const auto k = static_cast<std::uint32_t>(rng.below(K));
      const std::size_t w = corpus.documents[d][i];
      z[d][i] = k;
      ++nkw[k][w];
      ++nk[k];
      ++ndk[d][k];
    }
  }

  auto log_likelihood = [&] {
    double ll = static_cast<double>(K) * (std::lgamma(vbeta) - static_cast<double>(V) * std::lgamma(beta));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t w = 0; w < V; ++w) ll += std::lgamma(nkw[k][w] + beta);
      ll -= std::lgamma(nk[k] + vbeta);
    }
    return ll;
  };

  std::vector<double> cumulative(K);
  for (int sweep = 1; sweep <= options.iterations; ++sweep) {
    for (std::size_t d = 0; d < D; ++d) {
      const auto& doc = corpus.documents[d];
      for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::size_t w = doc[i];
        std::uint32_t k = z[d][i];
        --nkw[k][w];
        --nk[k];
        --ndk[d][k];
        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          total += (ndk[d][t] + alpha) * (nkw[t][w] + beta) / (nk[t] + vbeta);
          cumulative[t] = total;
        }
        const double u = rng.uniform() * total;
        k = static_cast<std::uint32_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        if (k >= K) k = static_cast<std::uint32_t>(K - 1);
        z[d][i] = k;
        ++nkw[k][w];
        ++nk[k];
        ++ndk[d][k];
      }
    }
    if (observer) observer(GibbsState{sweep, &nkw, &nk, &ndk, log_likelihood()});
  }

  TopicModel m;
  m.topics = K;
  m.alpha = alpha;
  m.beta = beta;
  m.seed = options.seed;
  m.iterations = options.iterations;
  m.vocabulary = corpus.vocabulary;
  m.topic_word.assign(K, std::vector<double>(V));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t w = 0; w < V; ++w) m.topic_word[k][w] = (nkw[k][w] + beta) / (nk[k] + vbeta);
  m.doc_topic.assign(D, std::vector<double>(K));
  for (std::size_t d = 0; d < D; ++d) {
    const double len = static_cast<double>(corpus.documents[d].size());
    for (std::size_t k = 0; k < K; ++k)
      m.doc_topic[d][k] = (ndk[d][k] + alpha) / (len + static_cast<double>(K) * alpha);
  }
  return m;
}

std::vector<std::pair<std::string, double>> top_terms(const TopicModel& model, std::size_t topic, std::size_t n) {
  if (topic >= model.topics) throw InvalidArgument("top_terms: topic out of range");
  const auto& row = model.topic_word[topic];
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return row[a] != row[b] ? row[a] > row[b] : model.vocabulary[a] < model.vocabulary[b];
                    });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(model.vocabulary[order[i]], row[order[i]]);
  return out;
}

}  // namespace cyborg::topics
