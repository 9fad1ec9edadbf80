#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hlpnn/rng.hpp"
#include "hlpnn/tensor.hpp"

namespace hlpnn {

constexpr int kPadId = 0;
constexpr int kUnkId = 1;

struct UserRecord {
  std::string user_id;
  std::vector<std::string> tweets;
  std::string description;
  std::string profile_location;
  std::string name;
  std::string user_language;  // "" when absent
  std::string time_zone;      // "" when absent
  double lat = 0.0;
  double lon = 0.0;
  std::string city;  // gold city id, "" at inference
};

// Lowercased tweet-style tokens: whitespace split, @mentions/#hashtags/URLs
// kept whole, leading/trailing punctuation runs split off as separate tokens.
std::vector<std::string> tokenize(const std::string& text);

// UTF-8 string -> unicode codepoints. Invalid bytes decode as U+FFFD.
std::vector<std::uint32_t> utf8_codepoints(const std::string& s);

class Vocabulary {
 public:
  int word_min_count = 10;
  int char_min_count = 5;

  int word_id(const std::string& token) const;       // UNK when absent
  int char_id(std::uint32_t codepoint) const;        // UNK when absent
  const std::string& word_of(int id) const;          // inverse lookup
  int n_words() const { return static_cast<int>(id_to_word_.size()); }
  int n_chars() const { return static_cast<int>(id_to_char_.size()); }
  std::int64_t word_count(const std::string& token) const;

  void save_tsv(const std::string& path) const;
  static Vocabulary load_tsv(const std::string& path);
  std::string to_tsv() const;
  static Vocabulary from_tsv(const std::string& text);

  friend Vocabulary build_vocab(const std::vector<UserRecord>& corpus, int word_min,
                                int char_min);

 private:
  std::map<std::string, int> word_to_id_;
  std::map<std::uint32_t, int> char_to_id_;
  std::vector<std::string> id_to_word_;       // includes PAD, UNK
  std::vector<std::uint32_t> id_to_char_;
  std::map<std::string, std::int64_t> word_counts_;
  std::map<std::uint32_t, std::int64_t> char_counts_;
};

// Counts tokens over every text field of the corpus (training split only);
// strict > threshold inclusion; ids assigned by (count desc, token asc).
Vocabulary build_vocab(const std::vector<UserRecord>& corpus, int word_min = 10,
                       int char_min = 5);

// Categorical value table (language / time zone). UNK = 0; "" maps to UNK.
class CategoricalVocab {
 public:
  void add(const std::string& value);
  int id(const std::string& value) const;  // kCatUnk when absent or ""
  int size() const { return static_cast<int>(values_.size()) + 1; }
  const std::vector<std::string>& values() const { return values_; }
  static constexpr int kCatUnk = 0;

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> values_;
};

struct EncodedField {
  std::vector<int> word_ids;               // length n_max
  std::vector<std::vector<int>> char_ids;  // n_max rows of k_max
  int length = 0;                          // real token count <= n_max
  std::vector<bool> mask;                  // true at real positions
};

// OOV words keep their character ids so the char-CNN path still sees them.
EncodedField encode_field(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          int n_max, int k_max);

struct EncodedUser {
  std::vector<EncodedField> fields;  // t_used tweets, then desc, location, name
  int t_used = 0;
  int lang_id = 0;
  int tz_id = 0;
  int gold_city = -1;
  int gold_country = -1;
  double lat = 0.0;
  double lon = 0.0;
  std::string user_id;
};

EncodedUser assemble_user(const UserRecord& user, const Vocabulary& vocab,
                          const CategoricalVocab& lang_vocab, const CategoricalVocab& tz_vocab,
                          int t_max, int n_max, int k_max);

// JSONL ingestion; throws with field and line number on schema violations.
std::vector<UserRecord> load_dataset(const std::string& path);

// Plain-text "token v1 ... vD" lines; in-vocab rows from the file, the rest
// from U(-0.25, 0.25).
Tensor load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, int dim,
                                  Rng& rng);
Tensor random_embeddings(const Vocabulary& vocab, int dim, Rng& rng);

}  // namespace hlpnn
