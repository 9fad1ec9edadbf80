#pragma once

#include <string>
#include <vector>

#include "hlpnn/tensor.hpp"

namespace hlpnn {

constexpr double kEarthRadiusKm = 6371.0;
// Inclusive near-miss radius: 161 km (100 miles).
constexpr double kAcc161RadiusKm = 161.0;

struct City {
  std::string city_id;
  std::string country_id;
  double lat = 0.0;
  double lon = 0.0;
};

// City/region registry with dense indices: cities 0..n_cities-1 in file
// order, countries 0..n_countries-1 in first-appearance order. "Country"
// here is any level-1 label (a country or an administrative region).
class CityRegistry {
 public:
  explicit CityRegistry(std::vector<City> cities);

  static CityRegistry load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  int n_cities() const { return static_cast<int>(cities_.size()); }
  int n_countries() const { return static_cast<int>(country_ids_.size()); }

  const City& city(int idx) const;
  int country_of(int city_idx) const;
  int city_index(const std::string& city_id) const;     // -1 when absent
  int country_index(const std::string& country_id) const;
  const std::string& country_id(int idx) const { return country_ids_[idx]; }
  const std::vector<City>& cities() const { return cities_; }

 private:
  std::vector<City> cities_;
  std::vector<int> city_country_;            // city idx -> country idx
  std::vector<std::string> country_ids_;
  std::vector<std::pair<std::string, int>> city_lookup_;  // sorted by id
};

struct LatLon {
  double lat;
  double lon;
};

// Great-circle distance in km (haversine, R = 6371 km).
double haversine(LatLon a, LatLon b);

// M_co x M_ci matrix over {0,-1}: 0 where city j belongs to country i.
Tensor build_bias(const CityRegistry& registry);

struct MetricsReport {
  double accuracy = 0.0;
  double acc161 = 0.0;
  double median_km = 0.0;
  double mean_km = 0.0;
  double relative_country_error = 0.0;
  int n = 0;

  std::string to_json() const;
};

struct GoldLabel {
  int city_idx;  // gold city index into the registry
  LatLon coords; // true coordinates
};

MetricsReport evaluate(const std::vector<int>& predicted_cities,
                       const std::vector<GoldLabel>& golds,
                       const CityRegistry& registry);

// Among city-misclassified predictions, the fraction whose predicted country
// differs from the gold city's country. 0 when nothing is misclassified.
double relative_country_error(const std::vector<int>& predicted_cities,
                              const std::vector<GoldLabel>& golds,
                              const CityRegistry& registry);

}  // namespace hlpnn
