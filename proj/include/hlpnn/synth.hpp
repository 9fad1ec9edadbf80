#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hlpnn/geo.hpp"
#include "hlpnn/text.hpp"

namespace hlpnn {

// Deterministic synthetic world: a region/city hierarchy with coordinates,
// users whose tweets mix city-indicative tokens with noise, weaker metadata
// signal, and community-structured mention edges.
struct WorldSpec {
  int n_countries = 3;
  int cities_per_country = 4;
  int vocab_size = 50;               // shared noise vocabulary
  int location_words_per_city = 8;
  double noise_word_rate = 0.2;
  int tweets_per_user_min = 2;
  int tweets_per_user_max = 5;
  int tweet_len_min = 6;
  int tweet_len_max = 10;
  int n_users = 2000;
  double mention_intra_city_prob = 0.8;
  int mentions_per_user = 2;
  double char_swap_rate = 0.0;       // adjacent-character swap noise in tweet tokens
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static WorldSpec from_json(const std::string& text);
};

struct SynthWorld {
  CityRegistry registry;
  std::vector<UserRecord> train;
  std::vector<UserRecord> dev;
  std::vector<UserRecord> test;
  struct Edge {
    std::string src;
    std::string dst;
    double weight;
  };
  std::vector<Edge> edges;
};

SynthWorld generate(const WorldSpec& spec);

// Emits registry.tsv, train/dev/test.jsonl, and edges.tsv under out_dir.
void write_world(const SynthWorld& world, const std::string& out_dir);

}  // namespace hlpnn
