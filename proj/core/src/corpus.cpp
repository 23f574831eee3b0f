#include "valta/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "valta/rng.hpp"
#include "valta/version.hpp"

namespace valta {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Locale-free ASCII classification; bytes >= 0x80 are treated as opaque.
bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}
bool ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool ascii_alnum(char c) {
  return ascii_digit(c) || ascii_upper(c) || (c >= 'a' && c <= 'z');
}
char ascii_lower(char c) { return ascii_upper(c) ? char(c - 'A' + 'a') : c; }

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && ascii_space(s[b])) ++b;
  while (e > b && ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << data;
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

}  // namespace

// --- BagOfWords ----------------------------------------------------------

BagOfWords BagOfWords::from_ids(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  BagOfWords bow;
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    bow.entries_.emplace_back(ids[i], static_cast<int>(j - i));
    i = j;
  }
  return bow;
}

void BagOfWords::add(int word, int count) {
  if (count <= 0) return;
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), word,
      [](const std::pair<int, int>& e, int w) { return e.first < w; });
  if (it != entries_.end() && it->first == word) {
    it->second += count;
  } else {
    entries_.insert(it, {word, count});
  }
}

void BagOfWords::merge(const BagOfWords& other) {
  std::vector<std::pair<int, int>> merged;
  merged.reserve(entries_.size() + other.entries_.size());
  std::size_t a = 0, b = 0;
  while (a < entries_.size() || b < other.entries_.size()) {
    if (b == other.entries_.size() ||
        (a < entries_.size() && entries_[a].first < other.entries_[b].first)) {
      merged.push_back(entries_[a++]);
    } else if (a == entries_.size() ||
               other.entries_[b].first < entries_[a].first) {
      merged.push_back(other.entries_[b++]);
    } else {
      merged.emplace_back(entries_[a].first,
                          entries_[a].second + other.entries_[b].second);
      ++a;
      ++b;
    }
  }
  entries_ = std::move(merged);
}

int BagOfWords::total() const {
  int sum = 0;
  for (const auto& [w, c] : entries_) sum += c;
  return sum;
}

int BagOfWords::count(int word) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), word,
      [](const std::pair<int, int>& e, int w) { return e.first < w; });
  return (it != entries_.end() && it->first == word) ? it->second : 0;
}

std::vector<int> BagOfWords::expand() const {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(total()));
  for (const auto& [w, c] : entries_) {
    for (int i = 0; i < c; ++i) ids.push_back(w);
  }
  return ids;
}

// --- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted) {
      throw std::invalid_argument("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

// --- Corpus counters ---------------------------------------------------------

std::size_t Corpus::num_train() const {
  std::size_t n = 0;
  for (const auto& r : reviews) n += (r.split == Split::kTrain);
  return n;
}

std::size_t Corpus::num_test() const { return reviews.size() - num_train(); }

std::size_t Corpus::num_sentences() const {
  std::size_t n = 0;
  for (const auto& r : reviews) n += r.sentences.size();
  return n;
}

// --- segmentation and tokenization -----------------------------------------

std::vector<std::string> segment_sentences(const std::string& text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  auto emit = [&](std::size_t begin, std::size_t end) {
    std::string seg = trim(text.substr(begin, end - begin));
    if (!seg.empty()) out.push_back(std::move(seg));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    // A period between two digits is a decimal point, not a boundary.
    if (c == '.' && i > 0 && i + 1 < n && ascii_digit(text[i - 1]) &&
        ascii_digit(text[i + 1])) {
      continue;
    }
    // Absorb a run of terminators ("?!", "...") into the segment.
    std::size_t j = i + 1;
    while (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
    if (j >= n) {
      emit(start, n);
      start = n;
      break;
    }
    if (!ascii_space(text[j])) {
      i = j - 1;
      continue;
    }
    std::size_t k = j;
    while (k < n && ascii_space(text[k])) ++k;
    if (k >= n) {
      emit(start, j);
      start = n;
      break;
    }
    if (ascii_upper(text[k])) {
      emit(start, j);
      start = k;
      i = k - 1;
    } else {
      i = j - 1;
    }
  }
  if (start < n) emit(start, n);
  return out;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(current);
    current.clear();
  };
  for (char c : sentence) {
    if (ascii_alnum(c)) {
      current.push_back(ascii_lower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

// --- ingestion ---------------------------------------------------------------

std::vector<RawReview> ingest_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::vector<RawReview> raws;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("malformed line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    if (!record.is_object()) {
      throw std::runtime_error("malformed line " + std::to_string(line_no) +
                               ": expected an object");
    }
    auto require = [&](const char* field) -> const json& {
      auto it = record.find(field);
      if (it == record.end()) {
        throw std::runtime_error(std::string("missing field ") + field +
                                 " at line " + std::to_string(line_no));
      }
      return *it;
    };
    const json& user = require("user");
    const json& item = require("item");
    const json& rating = require("rating");
    const json& text = require("text");
    if (!user.is_string() || user.get<std::string>().empty()) {
      throw std::runtime_error("invalid field user at line " +
                               std::to_string(line_no));
    }
    if (!item.is_string() || item.get<std::string>().empty()) {
      throw std::runtime_error("invalid field item at line " +
                               std::to_string(line_no));
    }
    if (!rating.is_number() || !std::isfinite(rating.get<double>())) {
      throw std::runtime_error("invalid field rating at line " +
                               std::to_string(line_no));
    }
    if (!text.is_string()) {
      throw std::runtime_error("invalid field text at line " +
                               std::to_string(line_no));
    }
    raws.push_back(RawReview{user.get<std::string>(), item.get<std::string>(),
                             rating.get<double>(), text.get<std::string>()});
  }
  return raws;
}

std::unordered_set<std::string> load_stopwords(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string w = trim(line);
    if (w.empty() || w[0] == '#') continue;
    for (char& c : w) c = ascii_lower(c);
    words.insert(w);
  }
  return words;
}

// --- build_corpus -------------------------------------------------------------

namespace {

struct TokenizedReview {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::vector<std::vector<std::string>> sentences;
};

}  // namespace

Corpus build_corpus(const std::vector<RawReview>& raws,
                    const CorpusBuildSettings& settings,
                    const std::unordered_set<std::string>& stopwords) {
  if (settings.min_word_count < 1) {
    throw std::invalid_argument("min_word_count must be >= 1");
  }
  if (settings.min_reviews < 1) {
    throw std::invalid_argument("min_reviews must be >= 1");
  }
  if (settings.test_fraction < 0.0 || settings.test_fraction >= 1.0) {
    throw std::invalid_argument("test_fraction must lie in [0, 1)");
  }

  // Segment, tokenize, drop stopwords and empty sentences.
  std::vector<TokenizedReview> tokenized;
  tokenized.reserve(raws.size());
  for (const RawReview& raw : raws) {
    if (raw.user_id.empty() || raw.item_id.empty()) {
      throw std::invalid_argument("review with empty user or item id");
    }
    if (!std::isfinite(raw.rating)) {
      throw std::invalid_argument("review with non-finite rating");
    }
    TokenizedReview tok;
    tok.user_id = raw.user_id;
    tok.item_id = raw.item_id;
    tok.rating = raw.rating;
    for (const std::string& sentence : segment_sentences(raw.text)) {
      std::vector<std::string> kept;
      for (std::string& t : tokenize(sentence)) {
        if (!stopwords.count(t)) kept.push_back(std::move(t));
      }
      if (!kept.empty()) tok.sentences.push_back(std::move(kept));
    }
    tokenized.push_back(std::move(tok));
  }

  // Joint fixed point of the vocabulary min-count filter and the user/item
  // min-review filter. Dropping reviews can push a word below the count
  // threshold and vice versa, so iterate until nothing changes; both filters
  // only shrink, so this terminates.
  std::vector<bool> alive(tokenized.size());
  for (std::size_t r = 0; r < tokenized.size(); ++r) {
    alive[r] = !tokenized[r].sentences.empty();
  }
  std::unordered_set<std::string> vocab_set;
  bool changed = true;
  while (changed) {
    changed = false;

    std::unordered_map<std::string, long> freq;
    for (std::size_t r = 0; r < tokenized.size(); ++r) {
      if (!alive[r]) continue;
      for (const auto& sent : tokenized[r].sentences) {
        for (const auto& t : sent) ++freq[t];
      }
    }
    vocab_set.clear();
    for (const auto& [t, n] : freq) {
      if (n >= settings.min_word_count) vocab_set.insert(t);
    }

    // A review survives the vocabulary filter if some sentence keeps a token.
    for (std::size_t r = 0; r < tokenized.size(); ++r) {
      if (!alive[r]) continue;
      bool has_token = false;
      for (const auto& sent : tokenized[r].sentences) {
        for (const auto& t : sent) {
          if (vocab_set.count(t)) {
            has_token = true;
            break;
          }
        }
        if (has_token) break;
      }
      if (!has_token) {
        alive[r] = false;
        changed = true;
      }
    }

    bool inner_changed = true;
    while (inner_changed) {
      inner_changed = false;
      std::unordered_map<std::string, int> user_count, item_count;
      for (std::size_t r = 0; r < tokenized.size(); ++r) {
        if (!alive[r]) continue;
        ++user_count[tokenized[r].user_id];
        ++item_count[tokenized[r].item_id];
      }
      for (std::size_t r = 0; r < tokenized.size(); ++r) {
        if (!alive[r]) continue;
        if (user_count[tokenized[r].user_id] < settings.min_reviews ||
            item_count[tokenized[r].item_id] < settings.min_reviews) {
          alive[r] = false;
          inner_changed = true;
          changed = true;
        }
      }
    }
  }

  if (std::none_of(alive.begin(), alive.end(), [](bool a) { return a; })) {
    throw std::runtime_error("empty corpus after filtering");
  }

  // Token ids by lexicographic order over the surviving vocabulary.
  std::vector<std::string> vocab_tokens(vocab_set.begin(), vocab_set.end());
  std::sort(vocab_tokens.begin(), vocab_tokens.end());

  Corpus corpus;
  corpus.vocabulary = Vocabulary(std::move(vocab_tokens));
  corpus.settings = settings;

  for (std::size_t r = 0; r < tokenized.size(); ++r) {
    if (!alive[r]) continue;
    ReviewRecord record;
    record.user_id = tokenized[r].user_id;
    record.item_id = tokenized[r].item_id;
    record.rating = tokenized[r].rating;
    for (const auto& sent : tokenized[r].sentences) {
      std::vector<int> ids;
      for (const auto& t : sent) {
        int id = corpus.vocabulary.id(t);
        if (id >= 0) ids.push_back(id);
      }
      if (ids.empty()) continue;
      BagOfWords bow = BagOfWords::from_ids(std::move(ids));
      record.review_bow.merge(bow);
      record.sentences.push_back(std::move(bow));
    }
    corpus.reviews.push_back(std::move(record));
  }

  // Per-item stratified split: floor(n_i * test_fraction) test reviews per
  // item, so every item keeps a train review. Users left without a train
  // review get their lowest-index test review moved back.
  if (settings.test_fraction > 0.0) {
    std::map<std::string, std::vector<std::size_t>> by_item;
    for (std::size_t r = 0; r < corpus.reviews.size(); ++r) {
      by_item[corpus.reviews[r].item_id].push_back(r);
    }
    Rng rng = make_rng(settings.seed, 0);
    for (auto& [item, indices] : by_item) {
      const auto n_test = static_cast<std::size_t>(std::floor(
          static_cast<double>(indices.size()) * settings.test_fraction));
      if (n_test == 0) continue;
      shuffle(indices, rng);
      for (std::size_t i = 0; i < n_test; ++i) {
        corpus.reviews[indices[i]].split = Split::kTest;
      }
    }
    std::map<std::string, std::vector<std::size_t>> user_train, user_test;
    for (std::size_t r = 0; r < corpus.reviews.size(); ++r) {
      const auto& rec = corpus.reviews[r];
      (rec.split == Split::kTrain ? user_train : user_test)[rec.user_id]
          .push_back(r);
    }
    for (const auto& [user, test_indices] : user_test) {
      if (!user_train[user].empty()) continue;
      corpus.reviews[test_indices.front()].split = Split::kTrain;
    }
  }

  for (const auto& rec : corpus.reviews) {
    if (rec.split != Split::kTrain) continue;
    corpus.user_bow[rec.user_id].merge(rec.review_bow);
    corpus.item_bow[rec.item_id].merge(rec.review_bow);
  }
  return corpus;
}

// --- corpus directory ----------------------------------------------------------

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  std::string vocab_data;
  for (const auto& token : corpus.vocabulary.tokens()) {
    vocab_data += token;
    vocab_data += '\n';
  }
  write_file(dir / "vocab.txt", vocab_data);

  std::string reviews_data;
  ordered_json split = ordered_json::array();
  for (const auto& rec : corpus.reviews) {
    ordered_json sentences = ordered_json::array();
    for (const auto& bow : rec.sentences) {
      sentences.push_back(bow.expand());
    }
    ordered_json line;
    line["user"] = rec.user_id;
    line["item"] = rec.item_id;
    line["rating"] = rec.rating;
    line["sentences"] = std::move(sentences);
    reviews_data += line.dump();
    reviews_data += '\n';
    split.push_back(rec.split == Split::kTrain ? "train" : "test");
  }
  write_file(dir / "reviews.jsonl", reviews_data);

  ordered_json manifest;
  manifest["format_version"] = kCorpusFormatVersion;
  manifest["settings"] = {{"min_word_count", corpus.settings.min_word_count},
                          {"min_reviews", corpus.settings.min_reviews},
                          {"test_fraction", corpus.settings.test_fraction},
                          {"seed", corpus.settings.seed}};
  manifest["counts"] = {{"vocabulary", corpus.vocabulary.size()},
                        {"reviews", corpus.reviews.size()},
                        {"train", corpus.num_train()},
                        {"test", corpus.num_test()},
                        {"sentences", corpus.num_sentences()},
                        {"users", corpus.user_bow.size()},
                        {"items", corpus.item_bow.size()}};
  manifest["split"] = std::move(split);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  json manifest = json::parse(read_file(dir / "manifest.json"));
  if (!manifest.contains("format_version") ||
      manifest["format_version"].get<int>() != kCorpusFormatVersion) {
    throw std::runtime_error("unsupported corpus format version in " +
                             (dir / "manifest.json").string());
  }

  Corpus corpus;
  const json& settings = manifest["settings"];
  corpus.settings.min_word_count = settings["min_word_count"].get<int>();
  corpus.settings.min_reviews = settings["min_reviews"].get<int>();
  corpus.settings.test_fraction = settings["test_fraction"].get<double>();
  corpus.settings.seed = settings["seed"].get<std::uint64_t>();

  std::vector<std::string> tokens;
  {
    std::ifstream in(dir / "vocab.txt", std::ios::binary);
    if (!in) {
      throw std::runtime_error("cannot open " + (dir / "vocab.txt").string());
    }
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
  }
  corpus.vocabulary = Vocabulary(std::move(tokens));

  const json& split = manifest["split"];
  std::ifstream in(dir / "reviews.jsonl", std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + (dir / "reviews.jsonl").string());
  }
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json rec = json::parse(line);
    ReviewRecord record;
    record.user_id = rec["user"].get<std::string>();
    record.item_id = rec["item"].get<std::string>();
    record.rating = rec["rating"].get<double>();
    for (const json& sent : rec["sentences"]) {
      BagOfWords bow = BagOfWords::from_ids(sent.get<std::vector<int>>());
      record.review_bow.merge(bow);
      record.sentences.push_back(std::move(bow));
    }
    if (index >= split.size()) {
      throw std::runtime_error("split assignment shorter than reviews.jsonl");
    }
    record.split = split[index].get<std::string>() == "test" ? Split::kTest
                                                             : Split::kTrain;
    ++index;
    corpus.reviews.push_back(std::move(record));
  }
  if (index != split.size()) {
    throw std::runtime_error("split assignment longer than reviews.jsonl");
  }

  for (const auto& rec : corpus.reviews) {
    if (rec.split != Split::kTrain) continue;
    corpus.user_bow[rec.user_id].merge(rec.review_bow);
    corpus.item_bow[rec.item_id].merge(rec.review_bow);
  }
  return corpus;
}

std::string corpus_content_hash(const Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_byte = [&](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  auto mix_bytes = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) mix_byte(p[i]);
  };
  auto mix_string = [&](const std::string& s) {
    mix_bytes(s.data(), s.size());
    mix_byte(0);
  };
  auto mix_int = [&](std::int64_t v) { mix_bytes(&v, sizeof(v)); };

  for (const auto& token : corpus.vocabulary.tokens()) mix_string(token);
  for (const auto& rec : corpus.reviews) {
    mix_string(rec.user_id);
    mix_string(rec.item_id);
    mix_bytes(&rec.rating, sizeof(rec.rating));
    mix_int(rec.split == Split::kTrain ? 0 : 1);
    for (const auto& bow : rec.sentences) {
      for (const auto& [w, c] : bow.entries()) {
        mix_int(w);
        mix_int(c);
      }
      mix_int(-1);
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace valta
