#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "test_util.hpp"
#include "valta/corpus.hpp"

using namespace valta;
using valta::testing::make_temp_dir;
using valta::testing::read_text;
using valta::testing::write_text;

namespace {

// Independent segmentation oracle: examines every terminator position and
// collects cut points, instead of the single left-to-right scan the library
// uses. Both encode the same rule: a run of [.!?] ends a sentence when
// followed by whitespace then an uppercase letter, or by end of text, and a
// '.' between two digits never does.
std::vector<std::string> segment_oracle(const std::string& text) {
  auto is_term = [](char c) { return c == '.' || c == '!' || c == '?'; };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  const std::size_t n = text.size();
  std::set<std::pair<std::size_t, std::size_t>> cuts;  // (segment end, next start)
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_term(text[i])) continue;
    if (text[i] == '.' && i > 0 && i + 1 < n && is_digit(text[i - 1]) &&
        is_digit(text[i + 1])) {
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && is_term(text[j])) ++j;
    if (j >= n) {
      cuts.insert({n, n});
      continue;
    }
    if (!is_space(text[j])) continue;
    std::size_t k = j;
    while (k < n && is_space(text[k])) ++k;
    if (k >= n) {
      cuts.insert({j, n});
    } else if (is_upper(text[k])) {
      cuts.insert({j, k});
    }
  }
  cuts.insert({n, n});

  std::vector<std::string> segments;
  std::size_t start = 0;
  for (const auto& [end, next] : cuts) {
    if (end < start) continue;
    std::string seg = text.substr(start, end - start);
    std::size_t b = 0, e = seg.size();
    while (b < e && is_space(seg[b])) ++b;
    while (e > b && is_space(seg[e - 1])) --e;
    if (e > b) segments.push_back(seg.substr(b, e - b));
    start = next;
  }
  return segments;
}

std::string review_line(const std::string& user, const std::string& item,
                        double rating, const std::string& text) {
  return "{\"user\":\"" + user + "\",\"item\":\"" + item +
         "\",\"rating\":" + std::to_string(rating) + ",\"text\":\"" + text +
         "\"}";
}

RawReview raw(const std::string& user, const std::string& item,
              const std::string& text, double rating = 4.0) {
  return RawReview{user, item, rating, text};
}

// Brute-force recount of every corpus invariant over the final records.
void check_corpus_invariants(const Corpus& corpus) {
  std::unordered_map<int, long> vocab_freq;
  std::map<std::string, int> user_count, item_count;
  std::map<std::string, BagOfWords> user_sum, item_sum;
  for (const auto& rec : corpus.reviews) {
    BagOfWords sum;
    for (const auto& sent : rec.sentences) {
      CHECK(!sent.empty());
      sum.merge(sent);
      for (const auto& [w, c] : sent.entries()) vocab_freq[w] += c;
    }
    CHECK(sum == rec.review_bow);
    ++user_count[rec.user_id];
    ++item_count[rec.item_id];
    if (rec.split == Split::kTrain) {
      user_sum[rec.user_id].merge(rec.review_bow);
      item_sum[rec.item_id].merge(rec.review_bow);
    }
  }
  for (const auto& [user, n] : user_count) {
    CHECK(n >= corpus.settings.min_reviews);
  }
  for (const auto& [item, n] : item_count) {
    CHECK(n >= corpus.settings.min_reviews);
  }
  for (int w = 0; w < corpus.vocabulary.size(); ++w) {
    CHECK(vocab_freq[w] >= corpus.settings.min_word_count);
  }
  CHECK(user_sum == corpus.user_bow);
  CHECK(item_sum == corpus.item_bow);
}

}  // namespace

TEST_CASE("segment_sentences splits on terminator then uppercase") {
  CHECK(segment_sentences("Great taste. Bad smell.") ==
        std::vector<std::string>{"Great taste.", "Bad smell."});
  CHECK(segment_sentences("No punctuation here") ==
        std::vector<std::string>{"No punctuation here"});
  CHECK(segment_sentences("Cost $5.50 today! Worth it?") ==
        std::vector<std::string>{"Cost $5.50 today!", "Worth it?"});
  CHECK(segment_sentences("   \t\n ").empty());
  CHECK(segment_sentences("").empty());
  CHECK(segment_sentences("ends low. next stays") ==
        std::vector<std::string>{"ends low. next stays"});
}

TEST_CASE("segment_sentences agrees with the rule-trace oracle") {
  const std::vector<std::string> cases = {
      "Great taste. Bad smell.",
      "No punctuation here",
      "Cost $5.50 today! Worth it?",
      "Pi is 3.14159 everywhere. True story.",
      "What?! Really... Yes.",
      "Dr. smith stayed home. Mr. Jones left.",
      "one. two. Three. FOUR! five",
      "Trailing spaces. Next one.   ",
      "A.B. testing is hard. Agreed.",
      "Version 2.0 shipped. Version 3.0 is next.",
      "ends with punctuation!",
      "!starts with punctuation",
      "double  spaces.  Still splits.",
      "newline.\nNo uppercase stays",
      "newline.\nYes uppercase splits",
      "digits 12.34.56 chained. Done.",
      "ellipsis... Works fine",
      "?",
      "a?b!c.d",
      "Hello?World stays glued",
      "Tab.\tThen upper",
      "5. Numbered list stays? Yes.",
  };
  for (const auto& text : cases) {
    CAPTURE(text);
    CHECK(segment_sentences(text) == segment_oracle(text));
  }
}

TEST_CASE("segments cover the input modulo delimiters") {
  const std::string text = "First bit. Second bit! Third?  Fourth trails";
  std::string joined;
  for (const auto& seg : segment_sentences(text)) joined += seg;
  std::string squeezed;
  for (char c : text) {
    if (c != ' ' && c != '\t' && c != '\n') squeezed += c;
  }
  std::string joined_squeezed;
  for (char c : joined) {
    if (c != ' ' && c != '\t' && c != '\n') joined_squeezed += c;
  }
  CHECK(joined_squeezed == squeezed);
}

TEST_CASE("tokenize lowercases, splits on non-alphanumerics, keeps length >= 2") {
  CHECK(tokenize("Great-Tasting BEER, 99 bottles!") ==
        std::vector<std::string>{"great", "tasting", "beer", "99", "bottles"});
  CHECK(tokenize("a b c") == std::vector<std::string>{});
  CHECK(tokenize("it's") == std::vector<std::string>{"it"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("x1 y2z") == std::vector<std::string>{"x1", "y2z"});
}

TEST_CASE("ingest_jsonl maps fields directly") {
  auto dir = make_temp_dir("ingest");
  write_text(dir / "ok.jsonl",
             "{\"user\":\"u1\",\"item\":\"i1\",\"rating\":4.0,\"text\":\"Good "
             "beer.\"}\n");
  auto raws = ingest_jsonl(dir / "ok.jsonl");
  REQUIRE(raws.size() == 1);
  CHECK(raws[0].user_id == "u1");
  CHECK(raws[0].item_id == "i1");
  CHECK(raws[0].rating == 4.0);
  CHECK(raws[0].text == "Good beer.");
}

TEST_CASE("ingest_jsonl on an empty file returns an empty list") {
  auto dir = make_temp_dir("ingest_empty");
  write_text(dir / "empty.jsonl", "");
  CHECK(ingest_jsonl(dir / "empty.jsonl").empty());
}

TEST_CASE("ingest_jsonl reports missing fields and malformed lines by number") {
  auto dir = make_temp_dir("ingest_bad");
  write_text(dir / "missing.jsonl",
             review_line("u1", "i1", 4.0, "ok") + "\n" +
                 "{\"user\":\"u2\",\"item\":\"i2\",\"text\":\"no rating\"}\n");
  CHECK_THROWS_WITH_AS(ingest_jsonl(dir / "missing.jsonl"),
                       doctest::Contains("missing field rating at line 2"),
                       std::runtime_error);

  write_text(dir / "broken.jsonl", "not json at all\n");
  CHECK_THROWS_WITH_AS(ingest_jsonl(dir / "broken.jsonl"),
                       doctest::Contains("malformed line 1"),
                       std::runtime_error);

  CHECK_THROWS_AS(ingest_jsonl(dir / "does_not_exist.jsonl"),
                  std::runtime_error);
}

TEST_CASE("rare words drop out of the vocabulary") {
  // "zzz" appears four times in total; threshold five removes it.
  std::vector<RawReview> raws;
  for (int i = 0; i < 5; ++i) {
    std::string text = "solid beer with hops and malt flavor";
    if (i < 4) text += " zzz";
    raws.push_back(raw("u1", "i1", text));
  }
  CorpusBuildSettings settings;
  settings.min_word_count = 5;
  settings.min_reviews = 1;
  settings.test_fraction = 0.0;
  Corpus corpus = build_corpus(raws, settings, {});
  CHECK(corpus.vocabulary.id("zzz") == -1);
  CHECK(corpus.vocabulary.id("beer") >= 0);
  check_corpus_invariants(corpus);
}

TEST_CASE("no-filter settings keep every distinct token") {
  std::vector<RawReview> raws = {raw("u1", "i1", "Crisp pale ale. Lovely head."),
                                 raw("u2", "i1", "Dark malt bomb")};
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 1;
  settings.test_fraction = 0.0;
  Corpus corpus = build_corpus(raws, settings, {});
  const std::set<std::string> expected = {"crisp", "pale",  "ale",  "lovely",
                                          "head",  "dark", "malt", "bomb"};
  std::set<std::string> got(corpus.vocabulary.tokens().begin(),
                            corpus.vocabulary.tokens().end());
  CHECK(got == expected);
}

TEST_CASE("stopwords never reach the vocabulary") {
  std::vector<RawReview> raws = {raw("u1", "i1", "the beer the beer the beer")};
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 1;
  settings.test_fraction = 0.0;
  Corpus corpus = build_corpus(raws, settings, {"the"});
  CHECK(corpus.vocabulary.id("the") == -1);
  CHECK(corpus.vocabulary.id("beer") >= 0);
}

TEST_CASE("users below the review threshold disappear, to a fixed point") {
  std::vector<RawReview> raws;
  for (int i = 0; i < 5; ++i) raws.push_back(raw("u1", "i1", "hoppy fresh pint here"));
  for (int i = 0; i < 5; ++i) raws.push_back(raw("u2", "i1", "sweet dark stout pour"));
  for (int i = 0; i < 3; ++i) raws.push_back(raw("u9", "i2", "watery bland lager meh"));
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 5;
  settings.test_fraction = 0.0;
  Corpus corpus = build_corpus(raws, settings, {});
  CHECK(corpus.reviews.size() == 10);
  for (const auto& rec : corpus.reviews) {
    CHECK(rec.user_id != "u9");
    CHECK(rec.item_id != "i2");
  }
  check_corpus_invariants(corpus);
}

TEST_CASE("cascading filters can empty the corpus") {
  std::vector<RawReview> raws;
  for (int i = 0; i < 3; ++i) raws.push_back(raw("u9", "i1", "fine crisp brew"));
  for (int i = 0; i < 4; ++i) raws.push_back(raw("u1", "i1", "fine crisp brew"));
  raws.push_back(raw("u1", "i2", "fine crisp brew"));
  for (int i = 0; i < 4; ++i) raws.push_back(raw("u2", "i2", "fine crisp brew"));
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 5;
  settings.test_fraction = 0.0;
  CHECK_THROWS_WITH_AS(build_corpus(raws, settings, {}),
                       "empty corpus after filtering", std::runtime_error);
}

TEST_CASE("vocabulary filter interacts with review filter at the fixed point") {
  // "rare" appears only in u9's reviews; once u9 is filtered its count falls
  // to zero, so it must not survive in the vocabulary.
  std::vector<RawReview> raws;
  for (int i = 0; i < 6; ++i) raws.push_back(raw("u1", "i1", "classic amber lager pour"));
  for (int i = 0; i < 4; ++i) raws.push_back(raw("u9", "i1", "rare rare rare rare rare"));
  CorpusBuildSettings settings;
  settings.min_word_count = 2;
  settings.min_reviews = 5;
  settings.test_fraction = 0.0;
  Corpus corpus = build_corpus(raws, settings, {});
  CHECK(corpus.vocabulary.id("rare") == -1);
  CHECK(corpus.reviews.size() == 6);
  check_corpus_invariants(corpus);
}

TEST_CASE("per-item stratified split with user rescue") {
  std::vector<RawReview> raws;
  for (int u = 0; u < 4; ++u) {
    for (int i = 0; i < 2; ++i) {
      for (int n = 0; n < 5; ++n) {
        raws.push_back(raw("user" + std::to_string(u), "item" + std::to_string(i),
                           "plenty of words to chew on here"));
      }
    }
  }
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 5;
  settings.test_fraction = 0.25;
  settings.seed = 99;
  Corpus corpus = build_corpus(raws, settings, {});

  std::map<std::string, int> item_total, item_test;
  std::map<std::string, int> user_train;
  for (const auto& rec : corpus.reviews) {
    ++item_total[rec.item_id];
    if (rec.split == Split::kTest) ++item_test[rec.item_id];
    if (rec.split == Split::kTrain) ++user_train[rec.user_id];
  }
  for (const auto& [item, total] : item_total) {
    CHECK(item_test[item] == total / 4);  // floor(n * 0.25)
    CHECK(item_test[item] < total);
  }
  for (const auto& [user, n] : user_train) CHECK(n >= 1);
  CHECK(corpus.num_test() > 0);
  check_corpus_invariants(corpus);
}

TEST_CASE("save and load round-trip the corpus field for field") {
  std::vector<RawReview> raws;
  for (int i = 0; i < 8; ++i) {
    raws.push_back(raw("u" + std::to_string(i % 2), "i1",
                       "Nice pour with thick head. Smells of citrus and pine.",
                       3.5 + 0.25 * i));
  }
  CorpusBuildSettings settings;
  settings.min_word_count = 2;
  settings.min_reviews = 2;
  settings.test_fraction = 0.25;
  settings.seed = 5;
  Corpus corpus = build_corpus(raws, settings, {"of", "and", "with"});

  auto dir = make_temp_dir("roundtrip");
  save_corpus(corpus, dir);
  Corpus loaded = load_corpus(dir);

  CHECK(loaded.vocabulary == corpus.vocabulary);
  CHECK(loaded.reviews == corpus.reviews);
  CHECK(loaded.user_bow == corpus.user_bow);
  CHECK(loaded.item_bow == corpus.item_bow);
  CHECK(loaded.settings == corpus.settings);
  CHECK(corpus_content_hash(loaded) == corpus_content_hash(corpus));
}

TEST_CASE("corpus loader rejects unknown format versions") {
  std::vector<RawReview> raws = {raw("u1", "i1", "some words here")};
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 1;
  settings.test_fraction = 0.0;
  Corpus corpus = build_corpus(raws, settings, {});
  auto dir = make_temp_dir("version");
  save_corpus(corpus, dir);
  std::string manifest = read_text(dir / "manifest.json");
  const std::string needle = "\"format_version\": 1";
  manifest.replace(manifest.find(needle), needle.size(),
                   "\"format_version\": 999");
  write_text(dir / "manifest.json", manifest);
  CHECK_THROWS_WITH_AS(load_corpus(dir),
                       doctest::Contains("unsupported corpus format version"),
                       std::runtime_error);
}

TEST_CASE("build_corpus is deterministic: identical saved bytes") {
  std::vector<RawReview> raws;
  for (int i = 0; i < 30; ++i) {
    raws.push_back(raw("u" + std::to_string(i % 5), "i" + std::to_string(i % 3),
                       "Full body and great balance. Would buy again!",
                       1.0 + (i % 5)));
  }
  CorpusBuildSettings settings;
  settings.min_word_count = 2;
  settings.min_reviews = 3;
  settings.test_fraction = 0.2;
  settings.seed = 1234;

  auto dir_a = make_temp_dir("det_a");
  auto dir_b = make_temp_dir("det_b");
  save_corpus(build_corpus(raws, settings, {"and"}), dir_a);
  save_corpus(build_corpus(raws, settings, {"and"}), dir_b);
  for (const char* name : {"vocab.txt", "reviews.jsonl", "manifest.json"}) {
    CHECK(read_text(dir_a / name) == read_text(dir_b / name));
  }
}

TEST_CASE("settings are validated") {
  std::vector<RawReview> raws = {raw("u1", "i1", "words")};
  CHECK_THROWS_AS(build_corpus(raws, {0, 1, 0.0, 0}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_corpus(raws, {1, 0, 0.0, 0}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_corpus(raws, {1, 1, 1.0, 0}, {}),
                  std::invalid_argument);
}

TEST_CASE("BagOfWords arithmetic") {
  BagOfWords a = BagOfWords::from_ids({3, 1, 3, 7});
  CHECK(a.total() == 4);
  CHECK(a.count(3) == 2);
  CHECK(a.count(2) == 0);
  BagOfWords b;
  b.add(3);
  b.add(0, 2);
  a.merge(b);
  CHECK(a.count(3) == 3);
  CHECK(a.count(0) == 2);
  CHECK(a.expand() == std::vector<int>{0, 0, 1, 3, 3, 3, 7});
}
