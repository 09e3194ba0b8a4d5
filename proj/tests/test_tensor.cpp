#include <random>

#include "doctest.h"
#include "lf4d/tensor.hpp"
#include "oracles.hpp"

using namespace lf4d;

TEST_CASE("grid rejects non-positive extents and checks bounds") {
  CHECK_THROWS_AS(LightField({1, 0, 3, 4, 4}), std::invalid_argument);
  LightField f({1, 2, 2, 3, 3});
  CHECK(f.size() == 36);
  CHECK_NOTHROW(f.at(0, 1, 1, 2, 2));
  CHECK_THROWS_AS(f.at(0, 2, 0, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(f.at(0, 0, 0, 0, -1), std::out_of_range);
}

TEST_CASE("pack and unpack round-trip") {
  std::mt19937_64 rng(1);
  SUBCASE("single field") {
    const auto f = oracle::random_grid<5>({1, 3, 3, 4, 4}, rng);
    const std::vector<LightField> in{f};
    const auto back = unpack_batch(pack_batch<double>(in));
    REQUIRE(back.size() == 1);
    CHECK(back[0] == f);
  }
  SUBCASE("two fields") {
    const std::vector<LightField> in{oracle::random_grid<5>({1, 3, 3, 4, 4}, rng),
                                     oracle::random_grid<5>({1, 3, 3, 4, 4}, rng)};
    const auto b = pack_batch<double>(in);
    CHECK(b.shape() == Extents<6>{2, 1, 3, 3, 4, 4});
    CHECK(b(1, 0, 2, 1, 3, 0) == in[1](0, 2, 1, 3, 0));
  }
  SUBCASE("mismatched extents") {
    const std::vector<LightField> in{LightField({1, 3, 3, 4, 4}), LightField({1, 5, 3, 4, 4})};
    CHECK_THROWS_AS(pack_batch<double>(in), std::invalid_argument);
  }
  SUBCASE("random extents up to 8") {
    for (int trial = 0; trial < 50; ++trial) {
      const Extents<5> e{oracle::draw(rng, 1, 8), oracle::draw(rng, 1, 8), oracle::draw(rng, 1, 8),
                         oracle::draw(rng, 1, 8), oracle::draw(rng, 1, 8)};
      std::vector<LightField> in;
      const Index n = oracle::draw(rng, 1, 4);
      for (Index k = 0; k < n; ++k) in.push_back(oracle::random_grid<5>(e, rng));
      const auto back = unpack_batch(pack_batch<double>(in));
      REQUIRE(back.size() == in.size());
      for (std::size_t k = 0; k < in.size(); ++k) CHECK(back[k] == in[k]);
    }
  }
}

TEST_CASE("extract_epi") {
  SUBCASE("constant field") {
    LightField f({1, 3, 3, 4, 4}, 0.25);
    const auto epi = extract_epi(f, EpiOrientation::horizontal, 2, 1, 0);
    for (double v : epi.data) CHECK(v == 0.25);
  }
  SUBCASE("x coordinate field gives identical rows 0..3") {
    LightField f({1, 3, 3, 4, 4});
    for (Index s = 0; s < 3; ++s)
      for (Index t = 0; t < 3; ++t)
        for (Index y = 0; y < 4; ++y)
          for (Index x = 0; x < 4; ++x) f(0, s, t, y, x) = static_cast<double>(x);
    for (Index y0 = 0; y0 < 4; ++y0)
      for (Index t0 = 0; t0 < 3; ++t0) {
        const auto epi = extract_epi(f, EpiOrientation::horizontal, y0, t0, 0);
        CHECK(epi.data.shape() == Extents<2>{3, 4});
        for (Index s = 0; s < 3; ++s)
          for (Index x = 0; x < 4; ++x) CHECK(epi.data(s, x) == static_cast<double>(x));
      }
  }
  SUBCASE("shapes and exact copies") {
    std::mt19937_64 rng(3);
    const auto f = oracle::random_grid<5>({2, 3, 5, 4, 6}, rng);
    const auto h = extract_epi(f, EpiOrientation::horizontal, 3, 4, 1);
    CHECK(h.data.shape() == Extents<2>{3, 6});
    CHECK(h.data(2, 5) == f(1, 2, 4, 3, 5));
    const auto v = extract_epi(f, EpiOrientation::vertical, 5, 2, 0);
    CHECK(v.data.shape() == Extents<2>{5, 4});
    CHECK(v.data(4, 3) == f(0, 2, 4, 3, 5));
  }
  SUBCASE("out of range") {
    LightField f({1, 3, 3, 4, 4});
    CHECK_THROWS_AS(extract_epi(f, EpiOrientation::horizontal, 4, 0, 0), std::out_of_range);
    CHECK_THROWS_AS(extract_epi(f, EpiOrientation::vertical, 0, 3, 0), std::out_of_range);
    CHECK_THROWS_AS(extract_epi(f, EpiOrientation::vertical, 0, 0, 1), std::out_of_range);
  }
  SUBCASE("scatter restores the slab") {
    std::mt19937_64 rng(4);
    const auto f = oracle::random_grid<5>({1, 3, 4, 5, 6}, rng);
    LightField g({1, 3, 4, 5, 6});
    for (Index y = 0; y < 5; ++y)
      for (Index t = 0; t < 4; ++t) scatter_epi(g, extract_epi(f, EpiOrientation::horizontal, y, t, 0), y, t, 0);
    CHECK(g == f);
    LightField h({1, 3, 4, 5, 6});
    for (Index x = 0; x < 6; ++x)
      for (Index s = 0; s < 3; ++s) scatter_epi(h, extract_epi(f, EpiOrientation::vertical, x, s, 0), x, s, 0);
    CHECK(h == f);
  }
}

TEST_CASE("EPI-grouped energy equals the direct four-fold sum") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Extents<5> e{1, oracle::draw(rng, 1, 6), oracle::draw(rng, 1, 6), oracle::draw(rng, 1, 8),
                       oracle::draw(rng, 1, 8)};
    const auto a = oracle::random_grid<5>(e, rng), b = oracle::random_grid<5>(e, rng);
    double direct = 0.0, grouped = 0.0;
    for (Index k = 0; k < a.size(); ++k) direct += (a.data()[k] - b.data()[k]) * (a.data()[k] - b.data()[k]);
    for (Index y = 0; y < e[3]; ++y)
      for (Index t = 0; t < e[2]; ++t) {
        const auto ea = extract_epi(a, EpiOrientation::horizontal, y, t, 0);
        const auto eb = extract_epi(b, EpiOrientation::horizontal, y, t, 0);
        for (Index k = 0; k < ea.data.size(); ++k) {
          const double d = ea.data.data()[k] - eb.data.data()[k];
          grouped += d * d;
        }
      }
    CHECK(std::abs(direct - grouped) <= 1e-10 * direct);
  }
}

TEST_CASE("for_each_view") {
  LightField f({1, 5, 5, 2, 2}, 0.5);
  int calls = 0;
  for_each_view(f, [&](Index, Index) { ++calls; });
  CHECK(calls == 25);
  const auto means = for_each_view(f, [&](Index s, Index t) {
    double m = 0;
    for (Index y = 0; y < 2; ++y)
      for (Index x = 0; x < 2; ++x) m += f(0, s, t, y, x) / 4;
    return m;
  });
  for (double m : means) CHECK(m == 0.5);

  std::mt19937_64 rng(6);
  const auto g = oracle::random_grid<5>({2, 3, 4, 5, 3}, rng);
  std::vector<std::pair<Index, Index>> order;
  const auto sums = for_each_view(g, [&](Index s, Index t) {
    order.emplace_back(s, t);
    double acc = 0;
    for (Index c = 0; c < 2; ++c) {
      const auto img = view_image(g, c, s, t);
      for (double v : img) acc += v;
    }
    return acc;
  });
  std::size_t k = 0;
  for (Index s = 0; s < 3; ++s)
    for (Index t = 0; t < 4; ++t, ++k) {
      CHECK(order[k] == std::make_pair(s, t));
      double acc = 0;
      for (Index c = 0; c < 2; ++c)
        for (Index y = 0; y < 5; ++y)
          for (Index x = 0; x < 3; ++x) acc += g(c, s, t, y, x);
      CHECK(sums[k] == doctest::Approx(acc).epsilon(1e-14));
    }
}

TEST_CASE("concat and slice channels") {
  std::mt19937_64 rng(7);
  const auto a = oracle::random_grid<6>({2, 2, 2, 3, 3, 4}, rng);
  const auto b = oracle::random_grid<6>({2, 3, 2, 3, 3, 4}, rng);
  const std::vector<const FeatureTensor*> parts{&a, &b};
  const auto c = concat_channels<double>(parts);
  CHECK(c.shape() == Extents<6>{2, 5, 2, 3, 3, 4});
  CHECK(slice_channels(c, 0, 2) == a);
  CHECK(slice_channels(c, 2, 3) == b);
  CHECK_THROWS(slice_channels(c, 4, 2));
}
