#include "hlpnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace hlpnn {

void WorldSpec::validate() const {
  if (n_countries <= 0 || cities_per_country <= 0 || n_users <= 0 || vocab_size <= 0 ||
      location_words_per_city <= 0)
    throw std::invalid_argument("world spec: counts must be positive");
  if (noise_word_rate < 0.0 || noise_word_rate >= 1.0)
    throw std::invalid_argument("world spec: noise_word_rate must be in [0,1)");
  if (mention_intra_city_prob < 0.0 || mention_intra_city_prob > 1.0)
    throw std::invalid_argument("world spec: mention_intra_city_prob must be in [0,1]");
  if (char_swap_rate < 0.0 || char_swap_rate > 1.0)
    throw std::invalid_argument("world spec: char_swap_rate must be in [0,1]");
  if (tweets_per_user_min < 0 || tweets_per_user_max < tweets_per_user_min)
    throw std::invalid_argument("world spec: bad tweets_per_user range");
  if (tweet_len_min < 1 || tweet_len_max < tweet_len_min)
    throw std::invalid_argument("world spec: bad tweet length range");
}

std::string WorldSpec::to_json() const {
  nlohmann::json j{{"n_countries", n_countries},
                   {"cities_per_country", cities_per_country},
                   {"vocab_size", vocab_size},
                   {"location_words_per_city", location_words_per_city},
                   {"noise_word_rate", noise_word_rate},
                   {"tweets_per_user_min", tweets_per_user_min},
                   {"tweets_per_user_max", tweets_per_user_max},
                   {"tweet_len_min", tweet_len_min},
                   {"tweet_len_max", tweet_len_max},
                   {"n_users", n_users},
                   {"mention_intra_city_prob", mention_intra_city_prob},
                   {"mentions_per_user", mentions_per_user},
                   {"char_swap_rate", char_swap_rate},
                   {"seed", seed}};
  return j.dump();
}

WorldSpec WorldSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  WorldSpec s;
  nlohmann::json defaults = nlohmann::json::parse(s.to_json());
  for (auto& [key, val] : j.items())
    if (!defaults.contains(key))
      throw std::invalid_argument("world spec: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j[key].get<std::decay_t<decltype(dst)>>();
  };
  get("n_countries", s.n_countries);
  get("cities_per_country", s.cities_per_country);
  get("vocab_size", s.vocab_size);
  get("location_words_per_city", s.location_words_per_city);
  get("noise_word_rate", s.noise_word_rate);
  get("tweets_per_user_min", s.tweets_per_user_min);
  get("tweets_per_user_max", s.tweets_per_user_max);
  get("tweet_len_min", s.tweet_len_min);
  get("tweet_len_max", s.tweet_len_max);
  get("n_users", s.n_users);
  get("mention_intra_city_prob", s.mention_intra_city_prob);
  get("mentions_per_user", s.mentions_per_user);
  get("char_swap_rate", s.char_swap_rate);
  get("seed", s.seed);
  return s;
}

namespace {

std::string swap_adjacent_chars(const std::string& tok, Rng& rng) {
  if (tok.size() < 2) return tok;
  std::string out = tok;
  const std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tok.size()) - 2));
  std::swap(out[i], out[i + 1]);
  return out;
}

}  // namespace

SynthWorld generate(const WorldSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int n_cities = spec.n_countries * spec.cities_per_country;

  // City centers on a lat/lon grid away from the poles. 6 degrees of
  // longitude at |lat| <= 60 is at least ~333 km; 5 degrees of latitude is
  // ~556 km.
  const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_cities))));
  const int grid_rows = (n_cities + grid_cols - 1) / grid_cols;
  const double lat0 = -30.0, lat_step = 5.0;
  const double lon0 = -150.0, lon_step = 6.0;
  if (lat0 + lat_step * (grid_rows - 1) > 60.0 || lon0 + lon_step * (grid_cols - 1) > 180.0)
    throw std::runtime_error("world spec: too many cities for the placement grid");

  std::vector<City> cities;
  cities.reserve(n_cities);
  for (int i = 0; i < n_cities; ++i) {
    City c;
    c.city_id = "city" + std::to_string(i);
    c.country_id = "country" + std::to_string(i / spec.cities_per_country);
    c.lat = lat0 + lat_step * (i / grid_cols);
    c.lon = lon0 + lon_step * (i % grid_cols);
    cities.push_back(std::move(c));
  }
  for (int i = 0; i < n_cities; ++i)
    for (int j = i + 1; j < n_cities; ++j)
      if (haversine({cities[i].lat, cities[i].lon}, {cities[j].lat, cities[j].lon}) < 300.0)
        throw std::runtime_error("world spec: city separation constraint violated");

  auto city_word = [&](int city, Rng& r) {
    return "loc" + std::to_string(city) + "w" +
           std::to_string(r.uniform_int(0, spec.location_words_per_city - 1));
  };
  auto noise_word = [&](Rng& r) {
    return "filler" + std::to_string(r.uniform_int(0, spec.vocab_size - 1));
  };

  std::vector<int> user_city(spec.n_users);
  for (int u = 0; u < spec.n_users; ++u)
    user_city[u] = static_cast<int>(rng.uniform_int(0, n_cities - 1));
  std::vector<std::vector<int>> city_users(n_cities);
  for (int u = 0; u < spec.n_users; ++u) city_users[user_city[u]].push_back(u);

  std::vector<UserRecord> users(spec.n_users);
  for (int u = 0; u < spec.n_users; ++u) {
    UserRecord& rec = users[u];
    const int city = user_city[u];
    rec.user_id = "u" + std::to_string(u);
    const int n_tweets =
        static_cast<int>(rng.uniform_int(spec.tweets_per_user_min, spec.tweets_per_user_max));
    for (int t = 0; t < n_tweets; ++t) {
      const int len = static_cast<int>(rng.uniform_int(spec.tweet_len_min, spec.tweet_len_max));
      std::string tweet;
      for (int w = 0; w < len; ++w) {
        std::string tok =
            rng.bernoulli(spec.noise_word_rate) ? noise_word(rng) : city_word(city, rng);
        if (spec.char_swap_rate > 0.0 && rng.bernoulli(spec.char_swap_rate))
          tok = swap_adjacent_chars(tok, rng);
        if (!tweet.empty()) tweet += ' ';
        tweet += tok;
      }
      rec.tweets.push_back(std::move(tweet));
    }
    // Metadata carries half the tweet signal strength.
    const double meta_noise = 0.5 + 0.5 * spec.noise_word_rate;
    auto meta_text = [&](int len) {
      std::string out;
      for (int w = 0; w < len; ++w) {
        if (!out.empty()) out += ' ';
        out += rng.bernoulli(meta_noise) ? noise_word(rng) : city_word(city, rng);
      }
      return out;
    };
    rec.description = meta_text(4);
    rec.profile_location = meta_text(2);
    rec.name = meta_text(1);
    rec.user_language = "lang" + std::to_string(city / spec.cities_per_country);
    rec.time_zone = "zone" + std::to_string(city / spec.cities_per_country);
    rec.lat = cities[city].lat;
    rec.lon = cities[city].lon;
    rec.city = cities[city].city_id;
  }

  // Mention edges prefer same-city targets; mentions also appear as @tokens
  // inside tweets so graph construction from raw text works.
  std::map<std::pair<int, int>, double> edge_weights;
  for (int u = 0; u < spec.n_users && spec.n_users > 1; ++u) {
    const int city = user_city[u];
    for (int m = 0; m < spec.mentions_per_user; ++m) {
      int target;
      if (rng.bernoulli(spec.mention_intra_city_prob) && city_users[city].size() > 1) {
        do {
          target = city_users[city][static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<std::int64_t>(city_users[city].size()) - 1))];
        } while (target == u);
      } else {
        do {
          target = static_cast<int>(rng.uniform_int(0, spec.n_users - 1));
        } while (target == u);
      }
      if (!users[u].tweets.empty()) {
        const std::size_t ti = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(users[u].tweets.size()) - 1));
        users[u].tweets[ti] += " @u" + std::to_string(target);
      }
      edge_weights[{u, target}] += 1.0;
    }
  }

  // Deterministic shuffle, then 70/15/15 split.
  std::vector<int> order(spec.n_users);
  for (int i = 0; i < spec.n_users; ++i) order[i] = i;
  for (int i = spec.n_users - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(0, i));
    std::swap(order[i], order[j]);
  }

  SynthWorld world{CityRegistry(std::move(cities)), {}, {}, {}, {}};
  const int n_train = spec.n_users * 70 / 100;
  const int n_dev = spec.n_users * 15 / 100;
  for (int i = 0; i < spec.n_users; ++i) {
    const UserRecord& rec = users[order[i]];
    if (i < n_train) world.train.push_back(rec);
    else if (i < n_train + n_dev) world.dev.push_back(rec);
    else world.test.push_back(rec);
  }
  for (const auto& [key, w] : edge_weights)
    world.edges.push_back({"u" + std::to_string(key.first), "u" + std::to_string(key.second), w});
  return world;
}

void write_world(const SynthWorld& world, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  world.registry.save_tsv(out_dir + "/registry.tsv");

  auto write_split = [&](const std::vector<UserRecord>& users, const std::string& name) {
    std::ofstream out(out_dir + "/" + name);
    if (!out) throw std::runtime_error("world: cannot write '" + name + "'");
    for (const UserRecord& u : users) {
      nlohmann::json j{{"user_id", u.user_id},
                       {"tweets", u.tweets},
                       {"description", u.description},
                       {"profile_location", u.profile_location},
                       {"name", u.name},
                       {"user_language", u.user_language},
                       {"time_zone", u.time_zone},
                       {"lat", u.lat},
                       {"lon", u.lon},
                       {"city", u.city}};
      out << j.dump() << '\n';
    }
  };
  write_split(world.train, "train.jsonl");
  write_split(world.dev, "dev.jsonl");
  write_split(world.test, "test.jsonl");

  std::ofstream edges(out_dir + "/edges.tsv");
  if (!edges) throw std::runtime_error("world: cannot write edges.tsv");
  for (const auto& e : world.edges) edges << e.src << '\t' << e.dst << '\t' << e.weight << '\n';
}

}  // namespace hlpnn
