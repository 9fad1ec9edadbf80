#include "hlpnn/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hlpnn {

namespace {

bool is_ascii_punct(std::uint32_t cp) {
  return cp < 128 && std::ispunct(static_cast<int>(cp));
}

std::string to_lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool looks_like_url(const std::string& tok) {
  return tok.rfind("http://", 0) == 0 || tok.rfind("https://", 0) == 0 ||
         tok.rfind("www.", 0) == 0;
}

std::string encode_utf8(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string from_codepoints(const std::vector<std::uint32_t>& cps, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) out += encode_utf8(cps[i]);
  return out;
}

}  // namespace

std::vector<std::uint32_t> utf8_codepoints(const std::string& s) {
  std::vector<std::uint32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      len = 2;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3;
    } else if ((b & 0xF8) == 0xF0) {
      len = 4;
    }
    if (len > 1) {
      if (i + len <= s.size()) {
        static const std::uint32_t first_mask[5] = {0, 0x7F, 0x1F, 0x0F, 0x07};
        cp = b & first_mask[len];
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
          const unsigned char cb = static_cast<unsigned char>(s[i + k]);
          if ((cb & 0xC0) != 0x80) {
            ok = false;
            break;
          }
          cp = (cp << 6) | (cb & 0x3F);
        }
        if (!ok) {
          cp = 0xFFFD;
          len = 1;
        }
      } else {
        cp = 0xFFFD;
        len = 1;
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream ss(to_lower_ascii(text));
  std::string raw;
  while (ss >> raw) {
    if (looks_like_url(raw)) {
      tokens.push_back(raw);
      continue;
    }
    const std::vector<std::uint32_t> cps = utf8_codepoints(raw);
    std::size_t b = 0, e = cps.size();
    // @mentions and #hashtags keep their sigil.
    const bool sigil = cps.size() >= 2 && (cps[0] == '@' || cps[0] == '#') &&
                       !is_ascii_punct(cps[1]);
    std::size_t core_b = sigil ? 1 : 0;
    while (core_b < e && is_ascii_punct(cps[core_b])) ++core_b;
    std::size_t core_e = e;
    while (core_e > core_b && is_ascii_punct(cps[core_e - 1])) --core_e;
    if (core_b == core_e) {
      // All punctuation: one token for the whole run.
      tokens.push_back(from_codepoints(cps, 0, e));
      continue;
    }
    const std::size_t lead_b = sigil ? 1 : 0;
    if (core_b > lead_b) tokens.push_back(from_codepoints(cps, lead_b, core_b));
    tokens.push_back(from_codepoints(cps, b, lead_b) + from_codepoints(cps, core_b, core_e));
    if (core_e < e) tokens.push_back(from_codepoints(cps, core_e, e));
  }
  return tokens;
}

int Vocabulary::word_id(const std::string& token) const {
  auto it = word_to_id_.find(token);
  return it == word_to_id_.end() ? kUnkId : it->second;
}

int Vocabulary::char_id(std::uint32_t codepoint) const {
  auto it = char_to_id_.find(codepoint);
  return it == char_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::word_of(int id) const {
  if (id < 0 || id >= n_words()) throw std::out_of_range("vocabulary: bad word id");
  return id_to_word_[id];
}

std::int64_t Vocabulary::word_count(const std::string& token) const {
  auto it = word_counts_.find(token);
  return it == word_counts_.end() ? 0 : it->second;
}

Vocabulary build_vocab(const std::vector<UserRecord>& corpus, int word_min, int char_min) {
  Vocabulary v;
  v.word_min_count = word_min;
  v.char_min_count = char_min;
  for (const UserRecord& u : corpus) {
    std::vector<std::string> texts = u.tweets;
    texts.push_back(u.description);
    texts.push_back(u.profile_location);
    texts.push_back(u.name);
    for (const std::string& t : texts) {
      for (const std::string& tok : tokenize(t)) {
        ++v.word_counts_[tok];
        for (std::uint32_t cp : utf8_codepoints(tok)) ++v.char_counts_[cp];
      }
    }
  }
  // Deterministic assignment: count desc, token asc.
  std::vector<std::pair<std::string, std::int64_t>> words;
  for (const auto& [tok, cnt] : v.word_counts_)
    if (cnt > word_min) words.emplace_back(tok, cnt);
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  v.id_to_word_ = {"<pad>", "<unk>"};
  for (const auto& [tok, cnt] : words) {
    v.word_to_id_[tok] = static_cast<int>(v.id_to_word_.size());
    v.id_to_word_.push_back(tok);
  }
  std::vector<std::pair<std::uint32_t, std::int64_t>> chars;
  for (const auto& [cp, cnt] : v.char_counts_)
    if (cnt > char_min) chars.emplace_back(cp, cnt);
  std::sort(chars.begin(), chars.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  v.id_to_char_ = {0, 0};  // PAD, UNK placeholders
  for (const auto& [cp, cnt] : chars) {
    v.char_to_id_[cp] = static_cast<int>(v.id_to_char_.size());
    v.id_to_char_.push_back(cp);
  }
  return v;
}

void Vocabulary::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocabulary: cannot write '" + path + "'");
  out << to_tsv();
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_tsv(buf.str());
}

std::string Vocabulary::to_tsv() const {
  std::ostringstream out;
  out << "#word_min\t" << word_min_count << "\t0\n";
  out << "#char_min\t" << char_min_count << "\t0\n";
  for (int i = 2; i < n_words(); ++i) {
    auto it = word_counts_.find(id_to_word_[i]);
    out << "w:" << id_to_word_[i] << '\t' << i << '\t' << (it == word_counts_.end() ? 0 : it->second)
        << '\n';
  }
  for (int i = 2; i < n_chars(); ++i) {
    auto it = char_counts_.find(id_to_char_[i]);
    out << "c:" << encode_utf8(id_to_char_[i]) << '\t' << i << '\t'
        << (it == char_counts_.end() ? 0 : it->second) << '\n';
  }
  return out.str();
}

Vocabulary Vocabulary::from_tsv(const std::string& text) {
  std::istringstream in(text);
  Vocabulary v;
  v.id_to_word_ = {"<pad>", "<unk>"};
  v.id_to_char_ = {0, 0};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, id_s, count_s;
    if (!std::getline(ss, key, '\t') || !std::getline(ss, id_s, '\t') ||
        !std::getline(ss, count_s, '\t'))
      throw std::runtime_error("vocabulary: malformed line '" + line + "'");
    const std::int64_t count = std::stoll(count_s);
    if (key == "#word_min") {
      v.word_min_count = std::stoi(id_s);
    } else if (key == "#char_min") {
      v.char_min_count = std::stoi(id_s);
    } else if (key.rfind("w:", 0) == 0) {
      const std::string tok = key.substr(2);
      v.word_to_id_[tok] = static_cast<int>(v.id_to_word_.size());
      v.id_to_word_.push_back(tok);
      v.word_counts_[tok] = count;
    } else if (key.rfind("c:", 0) == 0) {
      const auto cps = utf8_codepoints(key.substr(2));
      if (cps.size() != 1) throw std::runtime_error("vocabulary: bad char entry '" + key + "'");
      v.char_to_id_[cps[0]] = static_cast<int>(v.id_to_char_.size());
      v.id_to_char_.push_back(cps[0]);
      v.char_counts_[cps[0]] = count;
    } else {
      throw std::runtime_error("vocabulary: unknown entry '" + key + "'");
    }
  }
  return v;
}

void CategoricalVocab::add(const std::string& value) {
  if (value.empty()) return;
  if (ids_.count(value)) return;
  ids_[value] = static_cast<int>(values_.size()) + 1;  // 0 is UNK
  values_.push_back(value);
}

int CategoricalVocab::id(const std::string& value) const {
  auto it = ids_.find(value);
  return it == ids_.end() ? kCatUnk : it->second;
}

EncodedField encode_field(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                          int n_max, int k_max) {
  EncodedField f;
  f.word_ids.assign(n_max, kPadId);
  f.char_ids.assign(n_max, std::vector<int>(k_max, kPadId));
  f.mask.assign(n_max, false);
  f.length = std::min<int>(n_max, static_cast<int>(tokens.size()));
  for (int i = 0; i < f.length; ++i) {
    f.word_ids[i] = vocab.word_id(tokens[i]);
    const auto cps = utf8_codepoints(tokens[i]);
    for (int k = 0; k < k_max && k < static_cast<int>(cps.size()); ++k)
      f.char_ids[i][k] = vocab.char_id(cps[k]);
    f.mask[i] = true;
  }
  return f;
}

EncodedUser assemble_user(const UserRecord& user, const Vocabulary& vocab,
                          const CategoricalVocab& lang_vocab, const CategoricalVocab& tz_vocab,
                          int t_max, int n_max, int k_max) {
  EncodedUser eu;
  eu.t_used = std::min<int>(t_max, static_cast<int>(user.tweets.size()));
  for (int t = 0; t < eu.t_used; ++t)
    eu.fields.push_back(encode_field(tokenize(user.tweets[t]), vocab, n_max, k_max));
  eu.fields.push_back(encode_field(tokenize(user.description), vocab, n_max, k_max));
  eu.fields.push_back(encode_field(tokenize(user.profile_location), vocab, n_max, k_max));
  eu.fields.push_back(encode_field(tokenize(user.name), vocab, n_max, k_max));
  eu.lang_id = lang_vocab.id(user.user_language);
  eu.tz_id = tz_vocab.id(user.time_zone);
  eu.lat = user.lat;
  eu.lon = user.lon;
  eu.user_id = user.user_id;
  return eu;
}

std::vector<UserRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open '" + path + "'");
  std::vector<UserRecord> users;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& field, const std::string& why) {
    throw std::runtime_error("dataset: line " + std::to_string(lineno) + ", field '" + field +
                             "': " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": invalid JSON");
    if (!j.is_object())
      throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": not an object");
    static const std::vector<std::string> known = {"user_id", "tweets",        "description",
                                                   "profile_location", "name", "user_language",
                                                   "time_zone", "lat",         "lon",
                                                   "city"};
    for (auto& [key, val] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        fail(key, "unknown key");
    UserRecord u;
    if (!j.contains("user_id") || !j["user_id"].is_string()) fail("user_id", "missing or not a string");
    u.user_id = j["user_id"].get<std::string>();
    if (j.contains("tweets")) {
      if (!j["tweets"].is_array()) fail("tweets", "not an array");
      for (const auto& t : j["tweets"]) {
        if (!t.is_string()) fail("tweets", "element is not a string");
        u.tweets.push_back(t.get<std::string>());
      }
    }
    auto opt_string = [&](const char* key, std::string& dst) {
      if (j.contains(key)) {
        if (!j[key].is_string()) fail(key, "not a string");
        dst = j[key].get<std::string>();
      }
    };
    opt_string("description", u.description);
    opt_string("profile_location", u.profile_location);
    opt_string("name", u.name);
    opt_string("user_language", u.user_language);
    opt_string("time_zone", u.time_zone);
    opt_string("city", u.city);
    if (!j.contains("lat") || !j["lat"].is_number()) fail("lat", "missing or not a number");
    if (!j.contains("lon") || !j["lon"].is_number()) fail("lon", "missing or not a number");
    u.lat = j["lat"].get<double>();
    u.lon = j["lon"].get<double>();
    if (u.lat < -90.0 || u.lat > 90.0) fail("lat", "out of range [-90,90]");
    if (u.lon < -180.0 || u.lon > 180.0) fail("lon", "out of range [-180,180]");
    users.push_back(std::move(u));
  }
  return users;
}

Tensor random_embeddings(const Vocabulary& vocab, int dim, Rng& rng) {
  return Tensor::uniform(vocab.n_words(), dim, -0.25, 0.25, rng, true);
}

Tensor load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, int dim,
                                  Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("embeddings: cannot open '" + path + "'");
  Tensor table = random_embeddings(vocab, dim, rng);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (static_cast<int>(vals.size()) != dim)
      throw std::runtime_error("embeddings: line " + std::to_string(lineno) + " has " +
                               std::to_string(vals.size()) + " values, config expects " +
                               std::to_string(dim));
    const int id = vocab.word_id(tok);
    if (id != kUnkId || tok == "<unk>")
      std::copy(vals.begin(), vals.end(),
                table.data().begin() + static_cast<std::size_t>(id) * dim);
  }
  return table;
}

}  // namespace hlpnn
