#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

// Corpus ingestion and preprocessing: vocabulary construction, sentence
// segmentation, bag-of-words views at sentence / review / user / item
// granularity, and the on-disk corpus directory format.

namespace valta {

// Sparse count vector over the vocabulary. Entries are (word id, count),
// sorted by word id, counts strictly positive.
class BagOfWords {
 public:
  BagOfWords() = default;

  static BagOfWords from_ids(std::vector<int> ids);

  void add(int word, int count = 1);
  void merge(const BagOfWords& other);

  bool empty() const { return entries_.empty(); }
  int total() const;
  int count(int word) const;
  const std::vector<std::pair<int, int>>& entries() const { return entries_; }

  // Word ids expanded with multiplicity, ascending. Canonical serialized form.
  std::vector<int> expand() const;

  bool operator==(const BagOfWords& other) const = default;

 private:
  std::vector<std::pair<int, int>> entries_;
};

struct RawReview {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::string text;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Tokens must be distinct; ids are assigned by position.
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // -1 when absent.
  int id(const std::string& token) const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class Split { kTrain, kTest };

struct ReviewRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::vector<BagOfWords> sentences;  // nonempty, each with >= 1 token
  BagOfWords review_bow;              // elementwise sum of sentences
  Split split = Split::kTrain;

  bool operator==(const ReviewRecord& other) const = default;
};

struct CorpusBuildSettings {
  int min_word_count = 5;
  int min_reviews = 5;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const CorpusBuildSettings& other) const = default;
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<ReviewRecord> reviews;
  // Aggregated over train reviews only; every user/item in the corpus has at
  // least one train review.
  std::map<std::string, BagOfWords> user_bow;
  std::map<std::string, BagOfWords> item_bow;
  CorpusBuildSettings settings;

  std::size_t num_train() const;
  std::size_t num_test() const;
  std::size_t num_sentences() const;
};

// --- preprocessing -----------------------------------------------------

// Splits text into sentences on '.', '!' or '?' when followed by whitespace
// and an uppercase letter, or by end of text. A '.' between two digits never
// splits. Whitespace-only input yields an empty list.
std::vector<std::string> segment_sentences(const std::string& text);

// Lowercases, splits on non-alphanumeric bytes, keeps tokens of length >= 2.
std::vector<std::string> tokenize(const std::string& sentence);

// Reads a JSON-lines review file: one object per line with fields
// user (string), item (string), rating (number), text (string).
// Throws std::runtime_error naming the line for malformed lines or
// missing fields.
std::vector<RawReview> ingest_jsonl(const std::filesystem::path& path);

// One stopword per line; '#' lines and blanks ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

// Full preprocessing pipeline: segmentation, tokenization, stopword removal,
// vocabulary min-count filter, iterative user/item min-review filter (to a
// joint fixed point with the vocabulary filter), seeded per-item stratified
// train/test split, and train-only user/item bags.
// Throws std::runtime_error("empty corpus after filtering") when nothing
// survives.
Corpus build_corpus(const std::vector<RawReview>& raws,
                    const CorpusBuildSettings& settings,
                    const std::unordered_set<std::string>& stopwords);

// --- corpus directory --------------------------------------------------
// Layout: vocab.txt (one token per line, line index = id),
// reviews.jsonl (token-id sentences), manifest.json (settings, seed,
// split assignment, counts, format version).

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// FNV-1a over the serialized vocabulary and reviews; identifies a corpus in
// run manifests and checkpoints.
std::string corpus_content_hash(const Corpus& corpus);

}  // namespace valta
