#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "veinqa/classic_metrics.hpp"
#include "veinqa/cli.hpp"
#include "veinqa/errors.hpp"
#include "veinqa/evaluation.hpp"
#include "veinqa/nss.hpp"
#include "veinqa/quality_models.hpp"
#include "veinqa/recognition.hpp"
#include "veinqa/synthgen.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

veinqa::GrayImage to_image(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + a.size());
  return veinqa::GrayImage(w, h, std::move(data));
}

Array to_array(const veinqa::Plane& p) {
  Array out({p.height, p.width});
  std::copy(p.data.begin(), p.data.end(), out.mutable_data());
  return out;
}

veinqa::BinaryTemplate to_template(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D boolean array");
  std::vector<std::uint8_t> bits(a.data(), a.data() + a.size());
  return veinqa::BinaryTemplate(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), std::move(bits));
}

py::array_t<bool> from_template(const veinqa::BinaryTemplate& t) {
  py::array_t<bool> out({t.height(), t.width()});
  auto* dst = out.mutable_data();
  for (std::size_t i = 0; i < t.bits().size(); ++i) dst[i] = t.bits()[i] != 0;
  return out;
}

std::vector<double> to_vector(const veinqa::FeatureVector32& f) {
  const veinqa::Vector32 v = veinqa::to_vector(f);
  return {v.data(), v.data() + v.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vein image quality toolkit";

  static py::exception<veinqa::Error> error(m, "VeinqaError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const veinqa::Error& e) {
      const std::string text = std::string(veinqa::to_string(e.kind())) + ": " + e.what();
      PyErr_SetString(error.ptr(), text.c_str());
    }
  });

  m.def("mscn", [](const Array& img) { return to_array(veinqa::mscn(to_image(img))); },
        py::arg("image"), "MSCN coefficients of a [0,1] image.");

  m.def(
      "fit_aggd",
      [](const Array& samples) {
        const auto p = veinqa::fit_aggd(std::span<const double>(samples.data(), samples.size()));
        py::dict d;
        d["nu"] = p.nu;
        d["sigma2_l"] = p.sigma2_l;
        d["sigma2_r"] = p.sigma2_r;
        d["mu"] = p.mu;
        return d;
      },
      py::arg("samples"));

  m.def("brisque_features", [](const Array& img) { return to_vector(veinqa::brisque_features(to_image(img))); },
        py::arg("image"), "32-dimensional NSS descriptor.");

  m.def(
      "classic_score",
      [](const std::string& metric, const Array& img) {
        return veinqa::classic_score(veinqa::parse_classic_metric(metric), to_image(img)).value;
      },
      py::arg("metric"), py::arg("image"));

  m.def(
      "score_model",
      [](const std::string& path, const Array& img) {
        const auto model = veinqa::load_model(path);
        const auto g = to_image(img);
        if (const auto* n = std::get_if<veinqa::NiqeModel>(&model)) return veinqa::score_niqe(*n, g).value;
        return veinqa::score_brisque(std::get<veinqa::BrisqueModel>(model), g).value;
      },
      py::arg("model_path"), py::arg("image"), "Score with a saved NIQE or BRISQUE model (lower is better).");

  m.def(
      "extract_template",
      [](const Array& img, const std::string& feature) {
        veinqa::FeatureConfig cfg;
        cfg.type = veinqa::parse_feature_type(feature);
        return from_template(veinqa::extract_features(to_image(img), cfg));
      },
      py::arg("image"), py::arg("feature") = "mc");

  m.def(
      "miura_match",
      [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<bool, py::array::c_style | py::array::forcecast>& b, int sx, int sy) {
        return veinqa::miura_match(to_template(a), to_template(b), sx, sy);
      },
      py::arg("probe"), py::arg("gallery"), py::arg("max_shift_x") = 8, py::arg("max_shift_y") = 8);

  m.def(
      "compute_rates",
      [](const std::vector<double>& genuine, const std::vector<double>& impostor) {
        const auto r = veinqa::compute_rates(genuine, impostor);
        py::dict d;
        d["eer"] = r.eer;
        d["eer_threshold"] = r.eer_threshold;
        d["fmr1000"] = r.fmr1000;
        d["zerofmr"] = r.zerofmr;
        return d;
      },
      py::arg("genuine"), py::arg("impostor"));

  m.def(
      "synthesize",
      [](std::uint64_t seed, int width, int height, double blur, double contrast, double noise) {
        veinqa::SynthParams p;
        p.seed = seed;
        p.width = width;
        p.height = height;
        p.blur_sigma = blur;
        p.contrast = contrast;
        p.noise_sigma = noise;
        const auto s = veinqa::generate(p);
        return to_array(s.image.plane());
      },
      py::arg("seed"), py::arg("width") = 128, py::arg("height") = 128, py::arg("blur_sigma") = 0.0,
      py::arg("contrast") = 1.0, py::arg("noise_sigma") = 0.0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        py::gil_scoped_release release;
        return veinqa::run_cli(args);
      },
      py::arg("args"), "Run the veinqa command line with the given arguments; returns the exit code.");
}
