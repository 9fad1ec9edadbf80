#include "hlpnn/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hlpnn {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void check_coords(double lat, double lon, const std::string& where) {
  if (lat < -90.0 || lat > 90.0)
    throw std::out_of_range(where + ": latitude " + std::to_string(lat) + " out of [-90,90]");
  if (lon < -180.0 || lon > 180.0)
    throw std::out_of_range(where + ": longitude " + std::to_string(lon) + " out of [-180,180]");
}

}  // namespace

CityRegistry::CityRegistry(std::vector<City> cities) : cities_(std::move(cities)) {
  city_country_.reserve(cities_.size());
  for (const City& c : cities_) {
    check_coords(c.lat, c.lon, "registry city " + c.city_id);
    auto it = std::find(country_ids_.begin(), country_ids_.end(), c.country_id);
    int idx;
    if (it == country_ids_.end()) {
      idx = static_cast<int>(country_ids_.size());
      country_ids_.push_back(c.country_id);
    } else {
      idx = static_cast<int>(it - country_ids_.begin());
    }
    city_country_.push_back(idx);
  }
  city_lookup_.reserve(cities_.size());
  for (std::size_t i = 0; i < cities_.size(); ++i)
    city_lookup_.emplace_back(cities_[i].city_id, static_cast<int>(i));
  std::sort(city_lookup_.begin(), city_lookup_.end());
  for (std::size_t i = 1; i < city_lookup_.size(); ++i)
    if (city_lookup_[i].first == city_lookup_[i - 1].first)
      throw std::invalid_argument("registry: duplicate city id '" + city_lookup_[i].first + "'");
}

CityRegistry CityRegistry::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("registry: cannot open '" + path + "'");
  std::vector<City> cities;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    City c;
    std::string lat_s, lon_s;
    if (!std::getline(ss, c.city_id, '\t') || !std::getline(ss, c.country_id, '\t') ||
        !std::getline(ss, lat_s, '\t') || !std::getline(ss, lon_s, '\t')) {
      throw std::runtime_error("registry: malformed line " + std::to_string(lineno) + " in '" +
                               path + "'");
    }
    c.lat = std::stod(lat_s);
    c.lon = std::stod(lon_s);
    cities.push_back(std::move(c));
  }
  return CityRegistry(std::move(cities));
}

void CityRegistry::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("registry: cannot write '" + path + "'");
  out.precision(10);
  for (const City& c : cities_)
    out << c.city_id << '\t' << c.country_id << '\t' << c.lat << '\t' << c.lon << '\n';
}

const City& CityRegistry::city(int idx) const {
  if (idx < 0 || idx >= n_cities())
    throw std::out_of_range("registry: city index " + std::to_string(idx) + " out of range");
  return cities_[idx];
}

int CityRegistry::country_of(int city_idx) const {
  if (city_idx < 0 || city_idx >= n_cities())
    throw std::out_of_range("registry: city index " + std::to_string(city_idx) + " out of range");
  return city_country_[city_idx];
}

int CityRegistry::city_index(const std::string& city_id) const {
  auto it = std::lower_bound(city_lookup_.begin(), city_lookup_.end(),
                             std::make_pair(city_id, -1));
  if (it != city_lookup_.end() && it->first == city_id) return it->second;
  return -1;
}

int CityRegistry::country_index(const std::string& country_id) const {
  auto it = std::find(country_ids_.begin(), country_ids_.end(), country_id);
  return it == country_ids_.end() ? -1 : static_cast<int>(it - country_ids_.begin());
}

double haversine(LatLon a, LatLon b) {
  check_coords(a.lat, a.lon, "haversine");
  check_coords(b.lat, b.lon, "haversine");
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlam = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

Tensor build_bias(const CityRegistry& registry) {
  const int mco = registry.n_countries();
  const int mci = registry.n_cities();
  Tensor bias = Tensor::full(mco, mci, -1.0, false);
  for (int j = 0; j < mci; ++j) bias.at(registry.country_of(j), j) = 0.0;
  return bias;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j{{"accuracy", accuracy},
                   {"acc161", acc161},
                   {"median_km", median_km},
                   {"mean_km", mean_km},
                   {"relative_country_error", relative_country_error},
                   {"n", n}};
  return j.dump();
}

MetricsReport evaluate(const std::vector<int>& predicted_cities,
                       const std::vector<GoldLabel>& golds, const CityRegistry& registry) {
  if (predicted_cities.size() != golds.size())
    throw std::invalid_argument("evaluate: prediction/gold length mismatch");
  MetricsReport r;
  r.n = static_cast<int>(golds.size());
  if (r.n == 0) return r;
  std::vector<double> dists;
  dists.reserve(golds.size());
  int correct = 0, within = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const City& pred = registry.city(predicted_cities[i]);
    const double d = haversine({pred.lat, pred.lon}, golds[i].coords);
    dists.push_back(d);
    total += d;
    if (predicted_cities[i] == golds[i].city_idx) ++correct;
    if (d <= kAcc161RadiusKm) ++within;
  }
  r.accuracy = static_cast<double>(correct) / r.n;
  r.acc161 = static_cast<double>(within) / r.n;
  r.mean_km = total / r.n;
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  r.median_km = (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  r.relative_country_error = relative_country_error(predicted_cities, golds, registry);
  return r;
}

double relative_country_error(const std::vector<int>& predicted_cities,
                              const std::vector<GoldLabel>& golds,
                              const CityRegistry& registry) {
  if (predicted_cities.size() != golds.size())
    throw std::invalid_argument("relative_country_error: length mismatch");
  int wrong_city = 0, wrong_country = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predicted_cities[i] == golds[i].city_idx) continue;
    ++wrong_city;
    if (registry.country_of(predicted_cities[i]) != registry.country_of(golds[i].city_idx))
      ++wrong_country;
  }
  if (wrong_city == 0) return 0.0;
  return static_cast<double>(wrong_country) / wrong_city;
}

}  // namespace hlpnn
