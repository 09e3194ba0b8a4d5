#include <random>
#include <sstream>

#include "doctest.h"
#include "lf4d/io.hpp"
#include "lf4d/resample.hpp"
#include "lf4d/train.hpp"
#include "oracles.hpp"

using namespace lf4d;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.model.n_restoration = 1;
  c.model.n_refinement = 1;
  c.model.filters = 4;
  c.model.angular_kernel = 3;
  c.patch_spatial = 12;
  c.patch_angular = 3;
  c.steps = 4;
  c.steps_per_epoch = 2;
  c.learning_rate = 1e-4;
  c.batch_size = 2;
  return c;
}

std::vector<LightField> scenes(int n, Index size = 20) {
  std::vector<LightField> out;
  for (int k = 0; k < n; ++k) out.push_back(render_synthetic(random_scene(100 + k, size, size), 3, 3, size, size).field);
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_train_config(
      "# toy\n"
      "filters = 16\n"
      "connection=dense\n"
      "learning_rate=0.001\n"
      "precision=float32\n"
      "loss_alpha=0.5\n"
      "multi_range=true\n"
      "checkpoint=out/m.ckpt\n");
  CHECK(c.model.filters == 16);
  CHECK(c.model.connection == Connection::dense);
  CHECK(c.learning_rate == 0.001);
  CHECK(c.precision == Precision::float32);
  CHECK(c.loss.alpha == 0.5);
  CHECK(c.multi_range);
  CHECK(c.checkpoint == std::filesystem::path("out/m.ckpt"));
  CHECK_THROWS(parse_train_config("unknown_key=1\n"));
  CHECK_THROWS(parse_train_config("filters\n"));
  CHECK_THROWS(parse_train_config("filters=abc\n"));
  CHECK_THROWS(parse_train_config("learning_rate=-1\n"));
  CHECK_THROWS(parse_train_config("patch_spatial=95\n"));
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(0) == 1e-5);
  CHECK(lr_schedule(9) == 1e-5);
  CHECK(lr_schedule(10) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(lr_schedule(25) == doctest::Approx(1e-7).epsilon(1e-12));
  CHECK_THROWS(lr_schedule(-1));
}

TEST_CASE("split counts") {
  CHECK(split_counts(10, 0.1) == std::pair<std::size_t, std::size_t>{9, 1});
  CHECK(split_counts(12, 0.25) == std::pair<std::size_t, std::size_t>{9, 3});
  CHECK(split_counts(1, 0.5) == std::pair<std::size_t, std::size_t>{1, 0});
  CHECK(split_counts(5, 0.0) == std::pair<std::size_t, std::size_t>{5, 0});
}

TEST_CASE("training") {
  const auto data = scenes(3);
  auto cfg = small_config();
  SUBCASE("deterministic") {
    std::ostringstream la, lb;
    auto a = train<double>(cfg, data, {data[2]}, &la);
    auto b = train<double>(cfg, data, {data[2]}, &lb);
    CHECK(la.str() == lb.str());
    CHECK(a.losses.size() == 4);
    CHECK(a.val_psnr.size() == 2);
    std::stringstream ca, cb;
    save_checkpoint(ca, a.model);
    save_checkpoint(cb, b.model);
    CHECK(ca.str() == cb.str());
  }
  SUBCASE("one step changes the parameters, running statistics too") {
    cfg.steps = 1;
    auto r = train<double>(cfg, data, {});
    Model fresh(cfg.model);
    CHECK_FALSE(r.model.head.weights == fresh.head.weights);
    CHECK_FALSE(r.model.restoration.blocks[0].norm_a.running_mean ==
                fresh.restoration.blocks[0].norm_a.running_mean);
  }
  SUBCASE("loss decreases on a fixed example") {
    cfg.steps = 40;
    cfg.learning_rate = 2e-5;
    cfg.batch_size = 1;
    const std::vector<LightField> one{data[0]};
    cfg.patch_spatial = 20;
    auto r = train<double>(cfg, one, {});
    CHECK(r.losses.back() < r.losses.front());
  }
  SUBCASE("float precision runs") {
    auto r = train<float>(cfg, data, {});
    for (double l : r.losses) CHECK(std::isfinite(l));
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS(train<double>(cfg, {}, {}));
    CHECK_THROWS(train<double>(cfg, {LightField({3, 3, 3, 20, 20})}, {}));
  }
}

TEST_CASE("evaluate") {
  const auto dir = std::filesystem::temp_directory_path() / "lf4d_eval_test";
  std::filesystem::create_directories(dir);
  const auto data = scenes(2, 24);
  write_lf4d(dir / "a.lf4d", data[0]);
  write_lf4d(dir / "b.lf4d", data[1]);
  const auto entries = parse_manifest("a.lf4d\nb.lf4d\n", dir);
  auto cfg = small_config();
  Model m(cfg.model);
  const auto rows = evaluate(m, entries, cfg.degrade_spec());
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].scene == "a");
  CHECK(rows[0].method == "model");
  CHECK(rows[1].method == "bicubic");
  const auto truth = crop_for_degrade(data[0], 2, 1);
  const auto low = degrade(truth, cfg.degrade_spec(), 0);
  const auto base = as_field(upsample_baseline(as_batch(low), 2, 1));
  CHECK(rows[1].psnr_db == mean_psnr(base, truth));
  CHECK(rows[1].ssim == mean_ssim(base, truth));
  CHECK(evaluate(m, entries, cfg.degrade_spec(), {12, 12})[0].psnr_db == doctest::Approx(rows[0].psnr_db).epsilon(1e-12));
  auto bad = cfg.degrade_spec();
  bad.r_s = 3;
  CHECK_THROWS(evaluate(m, entries, bad));
  std::filesystem::remove_all(dir);
}
