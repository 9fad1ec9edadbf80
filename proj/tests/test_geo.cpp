#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "hlpnn/geo.hpp"
#include "hlpnn/rng.hpp"

using namespace hlpnn;

namespace {

// Independent great-circle oracle via the spherical law of cosines with a
// vector dot product, written differently from the library's haversine.
double oracle_distance(LatLon a, LatLon b) {
  const double d2r = std::acos(-1.0) / 180.0;
  const double ax = std::cos(a.lat * d2r) * std::cos(a.lon * d2r);
  const double ay = std::cos(a.lat * d2r) * std::sin(a.lon * d2r);
  const double az = std::sin(a.lat * d2r);
  const double bx = std::cos(b.lat * d2r) * std::cos(b.lon * d2r);
  const double by = std::cos(b.lat * d2r) * std::sin(b.lon * d2r);
  const double bz = std::sin(b.lat * d2r);
  const double cx = ay * bz - az * by;
  const double cy = az * bx - ax * bz;
  const double cz = ax * by - ay * bx;
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = ax * bx + ay * by + az * bz;
  return 6371.0 * std::atan2(cross, dot);
}

CityRegistry three_city_registry() {
  return CityRegistry({{"c1", "A", 0.0, 0.0},
                       {"c2", "A", 0.0, 1.0},
                       {"c3", "B", 10.0, 10.0}});
}

}  // namespace

TEST_CASE("haversine fixed values") {
  CHECK(haversine({10, 20}, {10, 20}) == 0.0);
  CHECK(haversine({0, 0}, {0, 90}) == doctest::Approx(10007.54).epsilon(0.01 / 10007.54));
  CHECK(haversine({0, 0}, {1, 0}) == doctest::Approx(111.195).epsilon(0.001 / 111.195));
}

TEST_CASE("haversine matches an independent oracle on 10k random pairs") {
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    LatLon a{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    LatLon b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    CHECK(std::abs(haversine(a, b) - oracle_distance(a, b)) < 1e-6);
  }
}

TEST_CASE("haversine properties") {
  Rng rng(5);
  const double pi_r = std::acos(-1.0) * kEarthRadiusKm;
  for (int i = 0; i < 1000; ++i) {
    LatLon a{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    LatLon b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    LatLon c{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    const double ab = haversine(a, b);
    CHECK(ab == haversine(b, a));
    CHECK(haversine(a, a) == 0.0);
    CHECK(ab >= 0.0);
    CHECK(ab <= pi_r + 1e-9);
    CHECK(ab <= haversine(a, c) + haversine(c, b) + 1e-6);
  }
  CHECK_THROWS(haversine({91, 0}, {0, 0}));
  CHECK_THROWS(haversine({0, 0}, {0, 181}));
}

TEST_CASE("registry indexing") {
  CityRegistry reg = three_city_registry();
  CHECK(reg.n_cities() == 3);
  CHECK(reg.n_countries() == 2);
  CHECK(reg.city_index("c2") == 1);
  CHECK(reg.city_index("nope") == -1);
  CHECK(reg.country_of(0) == reg.country_of(1));
  CHECK(reg.country_of(2) != reg.country_of(0));
  CHECK(reg.country_id(reg.country_of(2)) == "B");
  CHECK_THROWS(CityRegistry({{"x", "A", 0, 0}, {"x", "A", 1, 1}}));
}

TEST_CASE("registry tsv round trip") {
  CityRegistry reg = three_city_registry();
  const std::string path = "/tmp/hlpnn_geo_reg.tsv";
  reg.save_tsv(path);
  CityRegistry back = CityRegistry::load_tsv(path);
  CHECK(back.n_cities() == 3);
  CHECK(back.city_index("c3") == 2);
  CHECK(back.city(2).lat == 10.0);
  std::remove(path.c_str());
}

TEST_CASE("bias matrix examples") {
  Tensor b = build_bias(three_city_registry());
  CHECK(b.rows() == 2);
  CHECK(b.cols() == 3);
  CHECK(b.at(0, 0) == 0);
  CHECK(b.at(0, 1) == 0);
  CHECK(b.at(0, 2) == -1);
  CHECK(b.at(1, 0) == -1);
  CHECK(b.at(1, 1) == -1);
  CHECK(b.at(1, 2) == 0);

  // single country -> all zeros
  Tensor one = build_bias(CityRegistry({{"c1", "A", 0, 0}, {"c2", "A", 1, 1}}));
  for (double v : one.data()) CHECK(v == 0.0);
}

TEST_CASE("bias column sums are -(countries - 1)") {
  std::vector<City> cities;
  for (int i = 0; i < 5; ++i)
    cities.push_back({"c" + std::to_string(i), "r" + std::to_string(i % 3),
                      double(i), double(i)});
  Tensor b = build_bias(CityRegistry(std::move(cities)));
  CHECK(b.rows() == 3);
  CHECK(b.cols() == 5);
  for (int j = 0; j < 5; ++j) {
    double sum = 0;
    for (int i = 0; i < 3; ++i) sum += b.at(i, j);
    CHECK(sum == -2.0);
  }
}

TEST_CASE("evaluate on all-correct predictions") {
  CityRegistry reg = three_city_registry();
  std::vector<int> preds{0, 1, 2};
  std::vector<GoldLabel> golds{{0, {0.0, 0.0}}, {1, {0.0, 1.0}}, {2, {10.0, 10.0}}};
  MetricsReport m = evaluate(preds, golds, reg);
  CHECK(m.accuracy == 1.0);
  CHECK(m.acc161 == 1.0);
  CHECK(m.median_km == 0.0);
  CHECK(m.mean_km == 0.0);
  CHECK(m.relative_country_error == 0.0);
  CHECK(m.n == 3);
}

TEST_CASE("acc161 boundary is inclusive and distances aggregate correctly") {
  // One registry city at origin; gold coordinates at distances 0 / ~100 / ~200 km.
  CityRegistry reg({{"c0", "A", 0.0, 0.0}});
  auto lat_for_km = [](double km) { return km / 111.19492664455873; };
  std::vector<int> preds{0, 0, 0};
  std::vector<GoldLabel> golds{
      {0, {0.0, 0.0}}, {0, {lat_for_km(100), 0.0}}, {0, {lat_for_km(200), 0.0}}};
  MetricsReport m = evaluate(preds, golds, reg);
  CHECK(m.acc161 == doctest::Approx(2.0 / 3));
  CHECK(m.mean_km == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(m.median_km == doctest::Approx(100.0).epsilon(1e-6));

  // exactly 161 km counts as a hit
  std::vector<GoldLabel> edge{{0, {lat_for_km(161.0), 0.0}}};
  CHECK(evaluate({0}, edge, reg).acc161 == 1.0);
  std::vector<GoldLabel> past{{0, {lat_for_km(161.5), 0.0}}};
  CHECK(evaluate({0}, past, reg).acc161 == 0.0);
}

TEST_CASE("median averages the middle pair for even n") {
  CityRegistry reg({{"c0", "A", 0.0, 0.0}});
  auto lat_for_km = [](double km) { return km / 111.19492664455873; };
  std::vector<int> preds{0, 0};
  std::vector<GoldLabel> golds{{0, {lat_for_km(10), 0.0}}, {0, {lat_for_km(20), 0.0}}};
  CHECK(evaluate(preds, golds, reg).median_km == doctest::Approx(15.0).epsilon(1e-6));
}

TEST_CASE("relative country error cases") {
  CityRegistry reg = three_city_registry();
  // 4 wrong cities, 1 of them in the wrong country
  std::vector<int> preds{1, 0, 1, 2, 2};
  std::vector<GoldLabel> golds{{0, {0, 0}}, {1, {0, 1}}, {0, {0, 0}},
                               {0, {0, 0}}, {2, {10, 10}}};
  // mistakes: idx0 (c1->c2 same country), idx1 (c2->c1 same), idx2 (same), idx3 (A->B wrong)
  CHECK(relative_country_error(preds, golds, reg) == doctest::Approx(0.25));

  // all correct -> 0
  CHECK(relative_country_error({0, 1, 2}, {{0, {0, 0}}, {1, {0, 1}}, {2, {10, 10}}}, reg) == 0.0);
  // all wrong but same country -> 0
  CHECK(relative_country_error({1, 0}, {{0, {0, 0}}, {1, {0, 1}}}, reg) == 0.0);
}

TEST_CASE("evaluate validates inputs") {
  CityRegistry reg = three_city_registry();
  CHECK_THROWS(evaluate({5}, {{0, {0, 0}}}, reg));
  CHECK_THROWS(evaluate({0, 1}, {{0, {0, 0}}}, reg));
}

TEST_CASE("metrics json serialization") {
  MetricsReport m;
  m.accuracy = 0.5;
  m.n = 4;
  const std::string j = m.to_json();
  CHECK(j.find("\"accuracy\":0.5") != std::string::npos);
  CHECK(j.find("\"acc161\"") != std::string::npos);
  CHECK(j.find("\"median_km\"") != std::string::npos);
  CHECK(j.find("\"mean_km\"") != std::string::npos);
  CHECK(j.find("\"relative_country_error\"") != std::string::npos);
}
