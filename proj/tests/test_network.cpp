#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lf4d/network.hpp"
#include "lf4d/resample.hpp"
#include "oracles.hpp"

using namespace lf4d;

namespace {

ModelConfig tiny(Connection c, Index r_s = 2, Index r_a = 2) {
  ModelConfig m;
  m.n_restoration = 1;
  m.n_refinement = 1;
  m.filters = 3;
  m.angular_kernel = 3;
  m.spatial_kernel = 3;
  m.connection = c;
  m.r_s = r_s;
  m.r_a = r_a;
  m.seed = 5;
  return m;
}

void zero_block(ResidualBlockT<double>& b) {
  b.conv_b.weights.fill(0.0);
  std::fill(b.conv_b.bias.begin(), b.conv_b.bias.end(), 0.0);
  std::fill(b.norm_b.gamma.begin(), b.norm_b.gamma.end(), 0.0);
}

}  // namespace

TEST_CASE("forward output shapes") {
  std::mt19937_64 rng(1);
  SUBCASE("unit scale with zero tail") {
    auto cfg = tiny(Connection::sequential, 1, 1);
    cfg.global_skip = false;
    Model m(cfg);
    m.tail.weights.fill(0.0);
    const auto x = oracle::random_grid<6>({1, 1, 3, 3, 6, 6}, rng);
    const auto y = m.forward(x, NormMode::eval);
    CHECK(y.shape() == x.shape());
    for (double v : y) CHECK(std::isfinite(v));
  }
  SUBCASE("x2 spatial, x2 angular") {
    auto cfg = tiny(Connection::dense);
    cfg.filters = 4;
    Model m(cfg);
    const auto x = oracle::random_grid<6>({1, 1, 3, 3, 32, 32}, rng, 0, 1);
    CHECK(m.infer(x).shape() == Extents<6>{1, 1, 5, 5, 64, 64});
  }
  SUBCASE("eval is deterministic and does not touch running statistics") {
    Model m(tiny(Connection::shared_source));
    const auto x = oracle::random_grid<6>({1, 1, 3, 3, 6, 6}, rng);
    const auto before = m.restoration.blocks[0].norm_a.running_mean;
    CHECK(m.forward(x, NormMode::eval) == m.forward(x, NormMode::eval));
    CHECK(m.restoration.blocks[0].norm_a.running_mean == before);
  }
  SUBCASE("channel mismatch") {
    Model m(tiny(Connection::sequential));
    CHECK_THROWS_AS(m.infer(FeatureTensor({1, 2, 3, 3, 4, 4})), std::invalid_argument);
  }
}

TEST_CASE("connection topologies") {
  std::mt19937_64 rng(2);
  const auto x = oracle::random_grid<6>({1, 1, 3, 3, 5, 5}, rng);
  SUBCASE("zero residual branches leave the source unchanged") {
    for (auto c : {Connection::sequential, Connection::shared_source}) {
      auto cfg = tiny(c);
      cfg.n_restoration = 3;
      Model m(cfg);
      for (auto& b : m.restoration.blocks) zero_block(b);
      ForwardTrace<double> tr;
      m.forward(x, NormMode::train, &tr);
      CHECK(tr.s1 == tr.r0);
    }
  }
  SUBCASE("a single block coincides across topologies") {
    Model seq(tiny(Connection::sequential)), shared(tiny(Connection::shared_source)), dense(tiny(Connection::dense));
    const Index F = 3;
    for (auto* m : {&dense}) {
      for (auto* st : {&m->restoration, &m->refinement}) {
        auto& fuse = st->fusions.back();
        fuse.weights.fill(0.0);
        for (Index j = 0; j < F; ++j) fuse.weights(j, F + j, 0, 0, 0, 0) = 1.0;
      }
    }
    // Share every other parameter.
    auto src = seq.parameters();
    for (auto* m : {&shared, &dense}) {
      auto dst = m->parameters();
      for (auto& d : dst)
        for (auto& s : src)
          if (s.name == d.name) std::copy(s.values.begin(), s.values.end(), d.values.begin());
    }
    const auto a = seq.forward(x, NormMode::train);
    CHECK(shared.forward(x, NormMode::train) == a);
    CHECK(oracle::rel_error(dense.forward(x, NormMode::train), a) < 1e-14);
  }
  SUBCASE("dense fusion widths") {
    auto cfg = tiny(Connection::dense);
    cfg.n_restoration = 3;
    cfg.filters = 4;
    Model m(cfg);
    REQUIRE(m.restoration.fusions.size() == 3);
    CHECK(m.restoration.fusions[0].in_channels() == 2 * 4);
    CHECK(m.restoration.fusions[1].in_channels() == 3 * 4);
    CHECK(m.restoration.fusions[2].in_channels() == 4 * 4);
    for (const auto& f : m.restoration.fusions) {
      CHECK(f.out_channels() == 4);
      CHECK(f.taps() == 1);
    }
  }
}

TEST_CASE("parameter enumeration") {
  for (auto c : {Connection::sequential, Connection::shared_source, Connection::dense}) {
    ModelConfig cfg;  // defaults: 5 + 3 blocks, 64 filters, 3x3 spatial, 5x5 angular
    cfg.connection = c;
    Model m(cfg);
    Index total = 0;
    std::set<std::string> names;
    for (const auto& p : m.parameters()) {
      total += static_cast<Index>(p.values.size());
      CHECK(names.insert(p.name).second);
    }
    CHECK(total == parameter_count(cfg));
    if (c == Connection::sequential) CHECK(total == 18464193);
  }
  Model m(tiny(Connection::dense));
  CHECK(m.state().size() == m.parameters().size() + 8);
}

TEST_CASE("end-to-end gradient matches finite differences") {
  std::mt19937_64 rng(3);
  for (auto c : {Connection::sequential, Connection::shared_source, Connection::dense}) {
    auto cfg = tiny(c);
    Model m(cfg);
    auto x = oracle::random_grid<6>({2, 1, 3, 3, 4, 4}, rng);
    const auto r = oracle::random_grid<6>({2, 1, 5, 5, 8, 8}, rng);
    ForwardTrace<double> tr;
    m.forward(x, NormMode::train, &tr);
    auto grads = m.zeros_like();
    m.backward(tr, r, grads);
    auto f = [&] { return oracle::dot(m.forward(x, NormMode::train), r); };
    auto params = m.parameters();
    auto gp = grads.parameters();
    // Biases feeding batch statistics have zero gradient, so errors are
    // measured against the largest derivative over all tensors.
    oracle::FdStats st;
    for (std::size_t k = 0; k < params.size(); ++k) oracle::fd_accumulate(st, f, params[k].values, gp[k].values, rng, 6);
    CHECK(st.ratio() < 1e-4);
  }
}

TEST_CASE("receptive field") {
  std::mt19937_64 rng(4);
  auto cfg = tiny(Connection::sequential, 2, 1);
  Model m(cfg);
  const Index radius = receptive_radius(cfg);
  CHECK(radius == 1 * (1 + 2 + 1) + (3 + 1) / 2);
  auto x = oracle::random_grid<6>({1, 1, 3, 3, 24, 24}, rng);
  const auto base = m.infer(x);
  x(0, 0, 1, 1, 12, 12) += 1.0;
  const auto moved = m.infer(x);
  for (Index y = 0; y < 48; ++y)
    for (Index xx = 0; xx < 48; ++xx) {
      const bool inside = y / 2 >= 12 - radius && y / 2 <= 12 + radius && xx / 2 >= 12 - radius && xx / 2 <= 12 + radius;
      if (!inside)
        for (Index s = 0; s < 3; ++s)
          for (Index t = 0; t < 3; ++t) CHECK(moved(0, 0, s, t, y, xx) == base(0, 0, s, t, y, xx));
    }
}

TEST_CASE("tiled super-resolution") {
  std::mt19937_64 rng(5);
  auto cfg = tiny(Connection::dense, 2, 2);
  Model m(cfg);
  const auto field = oracle::random_grid<5>({1, 3, 3, 30, 26}, rng, 0, 1);
  const auto full = as_field(m.infer(as_batch(field)));
  CHECK(super_resolve(m, field, {30, 26}) == full);
  CHECK(super_resolve(m, field) == full);
  const auto tiled = super_resolve(m, field, {15, 26});
  CHECK(oracle::rel_error(tiled, full) < 1e-12);
  const auto grid = super_resolve(m, field, {13, 13});
  CHECK(oracle::rel_error(grid, full) < 1e-12);
  CHECK_THROWS_AS(super_resolve(m, field, {4, 4}), std::invalid_argument);

  LightField constant({1, 3, 3, 30, 30}, 0.4);
  const auto cu = super_resolve(m, constant, {15, 15});
  const Index margin = 2 * receptive_radius(cfg) + 2;
  // Constant input: output is periodic with the sub-pixel phase away from borders.
  for (Index y = margin; y < 60 - margin; ++y)
    for (Index x = margin; x < 60 - margin; ++x)
      CHECK(cu(0, 2, 2, y, x) == doctest::Approx(cu(0, 2, 2, 30 + y % 2, 30 + x % 2)).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(6);
  Model m(tiny(Connection::dense));
  const auto x = oracle::random_grid<6>({1, 1, 3, 3, 6, 6}, rng);
  m.forward(x, NormMode::train);
  std::stringstream ss;
  save_checkpoint(ss, m);
  const std::string bytes = ss.str();
  auto back = load_checkpoint<double>(ss);
  CHECK(back.config() == m.config());
  CHECK(back.infer(x) == m.infer(x));
  std::stringstream again;
  save_checkpoint(again, back);
  CHECK(again.str() == bytes);

  std::string broken = bytes;
  broken.replace(broken.find("filters=3"), 9, "filters=4");
  std::stringstream bad(broken);
  CHECK_THROWS(load_checkpoint<double>(bad));
}

TEST_CASE("sgd step") {
  std::vector<double> p{1.0}, g{2.0};
  std::vector<ParamView<double>> pv{{"p", {1}, std::span<double>(p)}};
  std::vector<ParamView<double>> gv{{"p", {1}, std::span<double>(g)}};
  sgd_step<double>(pv, gv, 0.0);
  CHECK(p[0] == 1.0);
  sgd_step<double>(pv, gv, 0.1);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-15));

  // Quadratic bowl 0.5 k p^2: |p_n| = |1 - lr k|^n |p_0|.
  const double k = 3.0, lr = 0.1;
  p[0] = 1.0;
  const int bound = static_cast<int>(std::ceil(std::log(1e-3) / std::log(std::abs(1 - lr * k))));
  for (int i = 0; i < bound; ++i) {
    g[0] = k * p[0];
    sgd_step<double>(pv, gv, lr);
  }
  CHECK(std::abs(p[0]) < 1e-3);

  std::vector<double> q{1.0, 2.0};
  std::vector<ParamView<double>> bad{{"p", {2}, std::span<double>(q)}};
  CHECK_THROWS(sgd_step<double>(pv, bad, 0.1));
}
