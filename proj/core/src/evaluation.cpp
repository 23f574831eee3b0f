#include "valta/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "valta/concrete.hpp"

namespace valta {

std::vector<TopicWordList> top_words(const ModelParams& params,
                                     const std::vector<std::string>& vocab,
                                     int top_t) {
  const int A = params.config.num_aspects;
  const int K = params.config.topics_per_aspect;
  const int V = params.config.vocab_size;
  if (static_cast<int>(vocab.size()) != V) {
    throw std::invalid_argument("vocabulary size does not match model");
  }
  if (top_t < 1 || top_t > V) {
    throw std::invalid_argument("top_t must lie in [1, vocab_size]");
  }

  std::vector<TopicWordList> lists;
  lists.reserve(A * K);
  std::vector<int> order(V);
  for (int a = 0; a < A; ++a) {
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd column = params.decoder.weight.col(a * K + k);
      std::iota(order.begin(), order.end(), 0);
      // Descending weight; ties resolved by vocabulary index, ascending.
      std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
        if (column[lhs] != column[rhs]) return column[lhs] > column[rhs];
        return lhs < rhs;
      });
      TopicWordList list;
      list.aspect = a;
      list.sub_aspect = k;
      for (int t = 0; t < top_t; ++t) {
        list.words.push_back(vocab[order[t]]);
        list.weights.push_back(column[order[t]]);
      }
      lists.push_back(std::move(list));
    }
  }
  return lists;
}

std::vector<std::vector<int>> collect_documents(const Corpus& corpus,
                                                Granularity granularity) {
  std::vector<std::vector<int>> documents;
  auto push_unique = [&](const BagOfWords& bow) {
    std::vector<int> ids;
    ids.reserve(bow.entries().size());
    for (const auto& [w, c] : bow.entries()) ids.push_back(w);
    documents.push_back(std::move(ids));
  };
  for (const auto& rec : corpus.reviews) {
    if (granularity == Granularity::kReview) {
      push_unique(rec.review_bow);
    } else {
      for (const auto& sent : rec.sentences) push_unique(sent);
    }
  }
  return documents;
}

namespace {

// Presence bitset per scored word over the document list.
class PresenceIndex {
 public:
  PresenceIndex(const std::vector<std::vector<int>>& documents,
                const std::vector<int>& word_ids)
      : num_docs_(documents.size()),
        blocks_((documents.size() + 63) / 64) {
    int slot = 0;
    for (int w : word_ids) slots_.emplace(w, slot++);
    bits_.assign(slots_.size(), std::vector<std::uint64_t>(blocks_, 0));
    for (std::size_t d = 0; d < documents.size(); ++d) {
      for (int w : documents[d]) {
        auto it = slots_.find(w);
        if (it == slots_.end()) continue;
        bits_[it->second][d / 64] |= (std::uint64_t{1} << (d % 64));
      }
    }
  }

  long count(int word) const {
    long n = 0;
    for (std::uint64_t block : bits_.at(slots_.at(word))) {
      n += std::popcount(block);
    }
    return n;
  }

  long co_count(int a, int b) const {
    const auto& x = bits_.at(slots_.at(a));
    const auto& y = bits_.at(slots_.at(b));
    long n = 0;
    for (std::size_t i = 0; i < blocks_; ++i) n += std::popcount(x[i] & y[i]);
    return n;
  }

  std::size_t num_docs() const { return num_docs_; }

 private:
  std::size_t num_docs_;
  std::size_t blocks_;
  std::map<int, int> slots_;
  std::vector<std::vector<std::uint64_t>> bits_;
};

// Association of one word pair: log(p_ij / (p_i p_j)) / -log(p_ij), with
// document counts n_i, n_j, n_ij out of n. A never-co-occurring pair is
// smoothed by counting it once; a pair present in every document has zero
// PMI and contributes zero.
double pair_npmi(long n_i, long n_j, long n_ij, std::size_t n) {
  const double total = static_cast<double>(n);
  const double joint =
      (n_ij > 0 ? static_cast<double>(n_ij) : 1.0) / total;
  if (joint >= 1.0) return 0.0;
  const double log_joint = std::log(joint);
  const double numerator = log_joint -
                           std::log(static_cast<double>(n_i) / total) -
                           std::log(static_cast<double>(n_j) / total);
  return numerator / -log_joint;
}

}  // namespace

CoherenceReport npmi(const std::vector<TopicWordList>& word_lists,
                     const std::vector<std::vector<int>>& documents,
                     const Vocabulary& vocabulary, int top_t,
                     Granularity granularity) {
  if (documents.empty()) {
    throw std::invalid_argument("npmi requires a nonempty document list");
  }

  // Resolve the scored words once across all topics.
  std::set<int> scored;
  std::vector<std::vector<int>> topic_ids;
  for (const auto& list : word_lists) {
    if (static_cast<int>(list.words.size()) < top_t) {
      throw std::invalid_argument("topic word list shorter than top_t");
    }
    std::vector<int> ids;
    for (int t = 0; t < top_t; ++t) {
      const int id = vocabulary.id(list.words[t]);
      if (id < 0) {
        throw std::runtime_error("word '" + list.words[t] +
                                 "' not in the reference vocabulary");
      }
      ids.push_back(id);
      scored.insert(id);
    }
    topic_ids.push_back(std::move(ids));
  }

  PresenceIndex index(documents,
                      std::vector<int>(scored.begin(), scored.end()));
  for (int id : scored) {
    if (index.count(id) == 0) {
      throw std::runtime_error("word '" + vocabulary.token(id) +
                               "' has zero document frequency");
    }
  }

  CoherenceReport report;
  report.granularity = granularity;
  for (const auto& ids : topic_ids) {
    double topic_sum = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double word_sum = 0.0;  // NPMI(w_i): sum over the other T-1 words
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (i == j) continue;
        word_sum += pair_npmi(index.count(ids[i]), index.count(ids[j]),
                              index.co_count(ids[i], ids[j]),
                              index.num_docs());
      }
      topic_sum += word_sum;
    }
    report.per_topic.push_back(topic_sum / static_cast<double>(ids.size()));
  }
  report.overall =
      std::accumulate(report.per_topic.begin(), report.per_topic.end(), 0.0) /
      static_cast<double>(report.per_topic.size());
  return report;
}

// Kuhn-Munkres with potentials on the square matrix padded with zeros;
// weights must be nonnegative, so padding never displaces a real pair.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights) {
  const Eigen::Index rows = weights.rows(), cols = weights.cols();
  if (weights.size() > 0 && weights.minCoeff() < 0.0) {
    throw std::invalid_argument("assignment weights must be nonnegative");
  }
  const Eigen::Index n = std::max(rows, cols);
  const double kInf = std::numeric_limits<double>::infinity();

  // Minimize negated weights; 1-based arrays per the classic formulation.
  auto cost = [&](Eigen::Index i, Eigen::Index j) {
    return (i < rows && j < cols) ? -weights(i, j) : 0.0;
  };
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Eigen::Index i0 = match[j0];
      double delta = kInf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(rows, -1);
  for (Eigen::Index j = 1; j <= n; ++j) {
    const Eigen::Index i = match[j];
    if (i >= 1 && i <= rows && j <= cols) {
      assignment[i - 1] = static_cast<int>(j - 1);
    }
  }
  return assignment;
}

AspectLabelReport label_aspects(const ModelParams& params,
                                const std::vector<LabeledSentence>& sentences) {
  if (sentences.empty()) {
    throw std::invalid_argument("no labeled sentences given");
  }
  const int A = params.config.num_aspects;

  std::set<std::string> label_set;
  for (const auto& s : sentences) label_set.insert(s.label);
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  if (static_cast<int>(labels.size()) > A) {
    throw std::invalid_argument("more gold labels than aspects");
  }
  std::map<std::string, int> label_index;
  for (std::size_t l = 0; l < labels.size(); ++l) label_index[labels[l]] = l;

  // Noise-free assignment: argmax of the raw aspect logits, first index wins.
  std::vector<int> assigned(sentences.size());
  Eigen::MatrixXd confusion =
      Eigen::MatrixXd::Zero(A, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const Eigen::VectorXd logits = params.aspect_head(
        encode_hidden(sentences[s].bow, params));
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    assigned[s] = static_cast<int>(best);
    confusion(best, label_index[sentences[s].label]) += 1.0;
  }

  const std::vector<int> matches = max_weight_assignment(confusion);

  AspectLabelReport report;
  report.labels = labels;
  report.confusion = confusion;
  for (int a = 0; a < A; ++a) {
    // Zero-weight pairings carry no evidence; leave those aspects unmapped.
    if (matches[a] >= 0 && confusion(a, matches[a]) > 0.0) {
      report.mapping[a] = labels[matches[a]];
    }
  }

  long correct = 0;
  std::vector<long> true_pos(labels.size(), 0), predicted(labels.size(), 0),
      gold(labels.size(), 0);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const int gold_l = label_index[sentences[s].label];
    ++gold[gold_l];
    auto it = report.mapping.find(assigned[s]);
    if (it == report.mapping.end()) continue;  // unmapped aspect: a miss
    const int pred_l = label_index[it->second];
    ++predicted[pred_l];
    if (pred_l == gold_l) {
      ++correct;
      ++true_pos[gold_l];
    }
  }
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(sentences.size());
  double f1_sum = 0.0;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    const double precision =
        predicted[l] > 0 ? static_cast<double>(true_pos[l]) / predicted[l] : 0.0;
    const double recall =
        gold[l] > 0 ? static_cast<double>(true_pos[l]) / gold[l] : 0.0;
    f1_sum += (precision + recall) > 0.0
                  ? 2.0 * precision * recall / (precision + recall)
                  : 0.0;
  }
  report.macro_f1 = f1_sum / static_cast<double>(labels.size());
  return report;
}

std::vector<RepresentationRow> export_item_representations(
    const Corpus& corpus, const ModelParams& params,
    const std::vector<std::string>& item_ids) {
  const std::set<std::string> wanted(item_ids.begin(), item_ids.end());
  for (const auto& id : wanted) {
    if (!corpus.item_bow.count(id)) {
      throw std::runtime_error("unknown item id: " + id);
    }
  }
  const int A = params.config.num_aspects;
  const int K = params.config.topics_per_aspect;

  std::vector<RepresentationRow> rows;
  for (std::size_t r = 0; r < corpus.reviews.size(); ++r) {
    const auto& rec = corpus.reviews[r];
    if (!wanted.count(rec.item_id)) continue;
    // rho is deterministic: no sampling enters the export.
    const Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(A, K, 0.5);
    const LatentState latent =
        encode_user_item(corpus.user_bow.at(rec.user_id),
                         corpus.item_bow.at(rec.item_id), params, noise);
    for (int a = 0; a < A; ++a) {
      for (int k = 0; k < K; ++k) {
        rows.push_back(RepresentationRow{static_cast<int>(r), rec.item_id,
                                         rec.user_id, a, k, latent.rho(a, k)});
      }
    }
  }
  return rows;
}

}  // namespace valta
