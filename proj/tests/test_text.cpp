#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hlpnn/text.hpp"

using namespace hlpnn;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/hlpnn_text_") + name;
}

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

UserRecord user_with_tweets(std::vector<std::string> tweets) {
  UserRecord u;
  u.user_id = "u";
  u.tweets = std::move(tweets);
  return u;
}

}  // namespace

TEST_CASE("tokenizer goldens") {
  CHECK(tokenize("Hello WORLD!") == std::vector<std::string>{"hello", "world", "!"});
  CHECK(tokenize("@Bob check http://x.co #nyc") ==
        std::vector<std::string>{"@bob", "check", "http://x.co", "#nyc"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("   ") == std::vector<std::string>{});
  CHECK(tokenize("(hi)") == std::vector<std::string>{"(", "hi", ")"});
  CHECK(tokenize("https://A.B/c?d=1") == std::vector<std::string>{"https://a.b/c?d=1"});
  CHECK(tokenize("WWW.Site.com rocks...") ==
        std::vector<std::string>{"www.site.com", "rocks", "..."});
  CHECK(tokenize("!!!") == std::vector<std::string>{"!!!"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
}

TEST_CASE("utf8 decoding") {
  CHECK(utf8_codepoints("abc") == std::vector<std::uint32_t>{'a', 'b', 'c'});
  CHECK(utf8_codepoints("caf\xc3\xa9") == std::vector<std::uint32_t>{'c', 'a', 'f', 0xE9});
  // lone continuation byte decodes as the replacement character
  CHECK(utf8_codepoints("\x80") == std::vector<std::uint32_t>{0xFFFD});
}

TEST_CASE("vocabulary thresholds are strict") {
  std::vector<UserRecord> corpus;
  std::string ten, eleven;
  for (int i = 0; i < 10; ++i) ten += "edge ";
  for (int i = 0; i < 11; ++i) eleven += "kept ";
  corpus.push_back(user_with_tweets({ten, eleven}));
  Vocabulary v = build_vocab(corpus, 10, 5);
  CHECK(v.word_id("edge") == kUnkId);   // exactly 10 -> excluded
  CHECK(v.word_id("kept") > kUnkId);    // 11 -> included
}

TEST_CASE("vocabulary orders ids by count then token") {
  std::vector<UserRecord> corpus;
  corpus.push_back(user_with_tweets({"bb aa bb aa cc cc cc"}));
  Vocabulary v = build_vocab(corpus, 0, 0);
  // cc appears 3x; aa and bb tie at 2 -> lexicographic
  CHECK(v.word_id("cc") == 2);
  CHECK(v.word_id("aa") == 3);
  CHECK(v.word_id("bb") == 4);
  CHECK(v.word_of(kPadId) == "<pad>");
  CHECK(v.word_of(kUnkId) == "<unk>");
}

TEST_CASE("vocabulary counts every text field and is deterministic") {
  UserRecord u;
  u.tweets = {"alpha alpha"};
  u.description = "alpha beta";
  u.profile_location = "beta";
  u.name = "gamma";
  std::vector<UserRecord> corpus{u};
  Vocabulary a = build_vocab(corpus, 0, 0);
  Vocabulary b = build_vocab(corpus, 0, 0);
  CHECK(a.word_count("alpha") == 3);
  CHECK(a.word_count("beta") == 2);
  CHECK(a.word_count("gamma") == 1);
  CHECK(a.to_tsv() == b.to_tsv());
}

TEST_CASE("vocabulary tsv round trip") {
  std::vector<UserRecord> corpus;
  corpus.push_back(user_with_tweets({"xx yy xx zz zz zz"}));
  Vocabulary v = build_vocab(corpus, 0, 0);
  const std::string path = temp_path("vocab.tsv");
  v.save_tsv(path);
  Vocabulary w = Vocabulary::load_tsv(path);
  CHECK(w.n_words() == v.n_words());
  CHECK(w.n_chars() == v.n_chars());
  CHECK(w.word_id("zz") == v.word_id("zz"));
  CHECK(w.char_id('x') == v.char_id('x'));
  CHECK(w.to_tsv() == v.to_tsv());
  std::remove(path.c_str());
}

TEST_CASE("encode_field covers padding, truncation, and OOV chars") {
  std::vector<UserRecord> corpus;
  corpus.push_back(user_with_tweets({"zebra zebra quick quick"}));
  Vocabulary v = build_vocab(corpus, 0, 0);

  EncodedField empty = encode_field({}, v, 4, 3);
  CHECK(empty.length == 0);
  for (int id : empty.word_ids) CHECK(id == kPadId);
  for (bool m : empty.mask) CHECK_FALSE(m);

  // unseen word: UNK at word level, real ids at char level
  EncodedField oov = encode_field({"zzzq"}, v, 4, 6);
  CHECK(oov.word_ids[0] == kUnkId);
  CHECK(oov.char_ids[0][0] == v.char_id('z'));
  CHECK(oov.char_ids[0][3] == v.char_id('q'));

  EncodedField trunc = encode_field({"a", "b", "c", "d", "e", "f"}, v, 4, 3);
  CHECK(trunc.length == 4);
  CHECK(static_cast<int>(trunc.word_ids.size()) == 4);
}

TEST_CASE("assemble_user field layout") {
  std::vector<UserRecord> corpus;
  corpus.push_back(user_with_tweets({"hello world"}));
  Vocabulary v = build_vocab(corpus, 0, 0);
  CategoricalVocab langs, tzs;
  langs.add("en");
  tzs.add("utc");

  UserRecord none;
  none.user_id = "a";
  EncodedUser e0 = assemble_user(none, v, langs, tzs, 100, 8, 6);
  CHECK(e0.t_used == 0);
  CHECK(e0.fields.size() == 3);  // metadata only
  CHECK(e0.tz_id == CategoricalVocab::kCatUnk);

  UserRecord many;
  many.user_id = "b";
  for (int i = 0; i < 120; ++i) many.tweets.push_back("hello");
  many.user_language = "en";
  EncodedUser e1 = assemble_user(many, v, langs, tzs, 100, 8, 6);
  CHECK(e1.t_used == 100);
  CHECK(e1.fields.size() == 103);
  CHECK(e1.lang_id == langs.id("en"));
}

TEST_CASE("categorical vocab maps unknown and empty to UNK") {
  CategoricalVocab c;
  c.add("x");
  c.add("");
  CHECK(c.id("x") == 1);
  CHECK(c.id("y") == CategoricalVocab::kCatUnk);
  CHECK(c.id("") == CategoricalVocab::kCatUnk);
  CHECK(c.size() == 2);
}

TEST_CASE("dataset loading and validation") {
  const std::string path = temp_path("data.jsonl");
  const std::string rec =
      R"({"user_id":"u1","tweets":["hi"],"description":"","profile_location":"","name":"","user_language":"en","lat":10.0,"lon":20.0,"city":"c1"})";
  write(path, rec + "\n" + rec + "\n" + rec + "\n");
  auto users = load_dataset(path);
  CHECK(users.size() == 3);
  CHECK(users[0].time_zone == "");  // absent optional key
  CHECK(users[0].user_language == "en");

  write(path, R"({"user_id":"u","tweets":[],"lat":95.0,"lon":0.0})" "\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(path)),
                       doctest::Contains("lat"), std::runtime_error);

  write(path, rec + "\n" + R"({"user_id":"u","tweets":[],"lat":0.0,"lon":181.0})" "\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(path)), doctest::Contains("line 2"),
                       std::runtime_error);

  write(path, R"({"user_id":"u","tweets":[],"lat":0.0,"lon":0.0,"bogus":1})" "\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(load_dataset(path)), doctest::Contains("bogus"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("pretrained embeddings") {
  std::vector<UserRecord> corpus;
  corpus.push_back(user_with_tweets({"red blue red blue"}));
  Vocabulary v = build_vocab(corpus, 0, 0);
  const std::string path = temp_path("emb.txt");
  write(path, "red 1.5 -2.5\n");

  Rng rng(1);
  Tensor table = load_pretrained_embeddings(path, v, 2, rng);
  CHECK(table.rows() == v.n_words());
  const int red = v.word_id("red");
  CHECK(table.at(red, 0) == 1.5);
  CHECK(table.at(red, 1) == -2.5);
  const int blue = v.word_id("blue");
  CHECK(table.at(blue, 0) >= -0.25);
  CHECK(table.at(blue, 0) <= 0.25);
  CHECK(table.at(blue, 0) != 1.5);

  write(path, "red 1 2 3\n");  // dimension mismatch vs dim=2
  Rng rng2(1);
  CHECK_THROWS(static_cast<void>(load_pretrained_embeddings(path, v, 2, rng2)));

  write(path, "");
  Rng rng3(1);
  Tensor t3 = load_pretrained_embeddings(path, v, 4, rng3);
  for (double x : t3.data()) {
    CHECK(x >= -0.25);
    CHECK(x <= 0.25);
  }
  std::remove(path.c_str());
}

TEST_CASE("random embeddings stay in range") {
  std::vector<UserRecord> corpus;
  corpus.push_back(user_with_tweets({"a b c"}));
  Vocabulary v = build_vocab(corpus, 0, 0);
  Rng rng(2);
  Tensor t = random_embeddings(v, 3, rng);
  CHECK(t.rows() == v.n_words());
  CHECK(t.cols() == 3);
  for (double x : t.data()) {
    CHECK(x >= -0.25);
    CHECK(x <= 0.25);
  }
}
