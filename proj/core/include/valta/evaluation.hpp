#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "valta/corpus.hpp"
#include "valta/model.hpp"

// Measurement: per-topic top words, NPMI coherence at sentence or review
// granularity, aspect labelling accuracy against gold sentences, and the
// per-review topic-logit export for downstream comparison plots.

namespace valta {

struct TopicWordList {
  int aspect = 0;
  int sub_aspect = 0;
  std::vector<std::string> words;    // descending decoder weight
  std::vector<double> weights;       // parallel to words
};

// Top-T vocabulary words per (aspect, sub-aspect) decoder column.
// Ties break by vocabulary index ascending.
std::vector<TopicWordList> top_words(const ModelParams& params,
                                     const std::vector<std::string>& vocab,
                                     int top_t = 10);

enum class Granularity { kSentence, kReview };

struct CoherenceReport {
  Granularity granularity = Granularity::kSentence;
  std::vector<double> per_topic;  // NPMI_k per (aspect, sub_aspect), flattened
  double overall = 0.0;           // arithmetic mean over topics
};

// Documents at the chosen granularity, as sorted unique token-id lists.
std::vector<std::vector<int>> collect_documents(const Corpus& corpus,
                                                Granularity granularity);

// Normalized PMI coherence over the first top_t words of each list, computed
// by exact document-frequency counting over `documents`. A pair that never
// co-occurs is smoothed by counting it once; a pair present in every document
// contributes 0. Throws std::runtime_error naming any scored word with zero
// document frequency.
CoherenceReport npmi(const std::vector<TopicWordList>& word_lists,
                     const std::vector<std::vector<int>>& documents,
                     const Vocabulary& vocabulary, int top_t,
                     Granularity granularity);

struct LabeledSentence {
  BagOfWords bow;
  std::string label;
};

struct AspectLabelReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<int, std::string> mapping;  // aspect index -> gold label
  std::vector<std::string> labels;
  Eigen::MatrixXd confusion;  // aspects x labels, counts
};

// Assigns each sentence argmax_a of the noise-free aspect logits, maps
// aspects to gold labels by maximum-weight bipartite matching on the
// confusion matrix, then scores accuracy and macro-F1 under that mapping.
AspectLabelReport label_aspects(const ModelParams& params,
                                const std::vector<LabeledSentence>& sentences);

// Maximum-weight one-to-one assignment of rows to columns (weights >= 0).
// Returns per-row column index, or -1 for unassigned rows.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights);

struct RepresentationRow {
  int review_id = 0;  // index into corpus.reviews
  std::string item_id;
  std::string user_id;
  int aspect = 0;
  int sub_aspect = 0;
  double rho = 0.0;
};

// One row per (review, aspect, sub-aspect) for every review of the listed
// items; rho is the deterministic topic logit from the user-item encoder.
std::vector<RepresentationRow> export_item_representations(
    const Corpus& corpus, const ModelParams& params,
    const std::vector<std::string>& item_ids);

}  // namespace valta
