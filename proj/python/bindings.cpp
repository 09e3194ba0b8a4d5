#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lf4d/io.hpp"
#include "lf4d/resample.hpp"
#include "lf4d/train.hpp"

namespace py = pybind11;
using namespace lf4d;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <std::size_t R>
Grid<double, R> to_grid(const Array& a) {
  if (a.ndim() != static_cast<py::ssize_t>(R))
    throw std::invalid_argument("expected a " + std::to_string(R) + "-d array, got " + std::to_string(a.ndim()) + "-d");
  Extents<R> e;
  for (std::size_t k = 0; k < R; ++k) e[k] = static_cast<Index>(a.shape(static_cast<py::ssize_t>(k)));
  Grid<double, R> g(e);
  std::copy(a.data(), a.data() + a.size(), g.data());
  return g;
}

template <std::size_t R>
Array to_array(const Grid<double, R>& g) {
  std::vector<py::ssize_t> shape(g.shape().begin(), g.shape().end());
  Array a(shape);
  std::copy(g.data(), g.data() + g.size(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_lf4d, m) {
  m.doc() = "Light-field super-resolution core. Fields are (C, S, T, Y, X) float64 arrays.";

  m.def("read_lf4d", [](const std::filesystem::path& p) { return to_array(read_lf4d(p)); });
  m.def(
      "write_lf4d",
      [](const std::filesystem::path& p, const Array& a, bool single) {
        write_lf4d(p, to_grid<5>(a), single ? DType::float32 : DType::float64);
      },
      py::arg("path"), py::arg("field"), py::arg("float32") = false);

  m.def(
      "conv4d",
      [](const Array& input, const Array& weights, const Array& bias, std::array<Index, 4> padding) {
        Conv4DLayer L;
        L.weights = to_grid<6>(weights);
        const auto b = to_grid<1>(bias);
        L.bias.assign(b.data(), b.data() + b.size());
        L.padding = padding;
        return to_array(conv4d_forward(to_grid<6>(input), L));
      },
      py::arg("input"), py::arg("weights"), py::arg("bias"), py::arg("padding") = std::array<Index, 4>{0, 0, 0, 0},
      "Batched 4D cross-correlation; input (N, C, S, T, Y, X), weights (O, C, ks, kt, ky, kx).");

  m.def(
      "degrade",
      [](const Array& field, Index r_s, Index r_a, double noise_sigma, double blur_sigma, std::uint64_t seed) {
        DegradeSpec d;
        d.r_s = r_s;
        d.r_a = r_a;
        d.noise_sigma = noise_sigma;
        d.sigma = blur_sigma;
        return to_array(degrade(to_grid<5>(field), d, seed));
      },
      py::arg("field"), py::arg("r_s") = 2, py::arg("r_a") = 1, py::arg("noise_sigma") = 0.0,
      py::arg("blur_sigma") = 1.2, py::arg("seed") = 0);

  m.def(
      "bicubic",
      [](const Array& field, Index r_s, Index r_a) {
        return to_array(as_field(upsample_baseline(as_batch(to_grid<5>(field)), r_s, r_a)));
      },
      py::arg("field"), py::arg("r_s") = 2, py::arg("r_a") = 1);

  m.def(
      "synth",
      [](std::uint64_t seed, Index S, Index T, Index Y, Index X, Index channels) {
        const auto r = render_synthetic(random_scene(seed, Y, X, channels), S, T, Y, X);
        return py::make_tuple(to_array(r.field), to_array(r.disparity));
      },
      py::arg("seed"), py::arg("S") = 5, py::arg("T") = 5, py::arg("Y") = 64, py::arg("X") = 64,
      py::arg("channels") = 1, "Random layered scene; returns (field, disparity).");
  m.def("synth_from_spec", [](const std::string& text) {
    const auto spec = parse_scene_spec(text);
    return to_array(render_synthetic(spec.scene, spec.S, spec.T, spec.Y, spec.X).field);
  });

  m.def("psnr", [](const Array& a, const Array& b) { return mean_psnr(to_grid<5>(a), to_grid<5>(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return mean_ssim(to_grid<5>(a), to_grid<5>(b)); });
  m.def("angular_loss", [](const Array& p, const Array& t) { return angular_loss(to_grid<5>(p), to_grid<5>(t)).value; });

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::map<std::string, std::string>& options) {
             ModelConfig cfg;
             for (const auto& [k, v] : options)
               if (!cfg.set(k, v)) throw std::invalid_argument("unknown model option '" + k + "'");
             cfg.validate();
             return Model(cfg);
           }),
           py::arg("options") = std::map<std::string, std::string>{})
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint<double>(p); })
      .def("save", [](Model& self, const std::filesystem::path& p) { save_checkpoint(p, self); })
      .def("config", [](const Model& self) { return self.config().to_map(); })
      .def("parameter_count", [](const Model& self) { return parameter_count(self.config()); })
      .def(
          "super_resolve",
          [](const Model& self, const Array& field, Index tile_h, Index tile_w) {
            const auto in = to_grid<5>(field);
            LightField out;
            {
              py::gil_scoped_release release;
              out = super_resolve(self, in, {tile_h, tile_w});
            }
            return to_array(out);
          },
          py::arg("field"), py::arg("tile_h") = 0, py::arg("tile_w") = 0);

  m.def(
      "train",
      [](const std::string& config_text, const std::filesystem::path& manifest) {
        const auto cfg = parse_train_config(config_text);
        py::gil_scoped_release release;
        return train_from_manifest(cfg, manifest);
      },
      py::arg("config"), py::arg("manifest"), "Trains from key=value config text; returns per-step losses.");
}
