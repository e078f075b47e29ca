// Python bindings: training, compression and the range coder on numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "softvq/codec.hpp"
#include "softvq/entropy_model.hpp"
#include "softvq/error.hpp"
#include "softvq/image_io.hpp"
#include "softvq/model.hpp"
#include "softvq/range_coder.hpp"
#include "softvq/trainer.hpp"

namespace py = pybind11;
using namespace softvq;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// H x W (gray) or H x W x C uint8 array -> Image.
Image to_image(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("image must be H x W or H x W x C");
  Image img;
  img.height = static_cast<int>(a.shape(0));
  img.width = static_cast<int>(a.shape(1));
  img.channels = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  img.pixels.assign(a.data(), a.data() + a.size());
  return img;
}

py::array to_array(const Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels != 1) shape.push_back(img.channels);
  py::array_t<std::uint8_t> out(shape);
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

Dataset to_dataset(const std::vector<U8Array>& images) {
  Dataset d;
  d.source = "python";
  for (const auto& a : images) d.images.push_back(to_image(a));
  return d;
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size()};
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

}  // namespace

PYBIND11_MODULE(_softvq, m) {
  m.doc() = "Soft-to-hard vector quantization image codec";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ModelMismatchError>(m, "ModelMismatchError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<NetConfig>(m, "NetConfig")
      .def(py::init<>())
      .def_readwrite("height", &NetConfig::height)
      .def_readwrite("width", &NetConfig::width)
      .def_readwrite("channels", &NetConfig::channels)
      .def_readwrite("stage_channels", &NetConfig::stage_channels)
      .def_readwrite("downsample_folds", &NetConfig::downsample_folds)
      .def_readwrite("latent_channels", &NetConfig::latent_channels)
      .def_readwrite("num_residual_blocks", &NetConfig::num_residual_blocks)
      .def_readwrite("skip_every", &NetConfig::skip_every)
      .def_property(
          "activation", [](const NetConfig& c) { return to_string(c.activation); },
          [](NetConfig& c, const std::string& s) { c.activation = parse_activation(s); })
      .def("latent_size", &NetConfig::latent_size);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("net", &ModelConfig::net)
      .def_readwrite("k", &ModelConfig::k)
      .def_readwrite("m", &ModelConfig::m)
      .def_readwrite("sigma", &ModelConfig::sigma)
      .def("code_count", &ModelConfig::code_count);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("model", &TrainConfig::model)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("sigma_final", &TrainConfig::sigma_final)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("base_lr", &TrainConfig::base_lr)
      .def_readwrite("entropy_lr_scale", &TrainConfig::entropy_lr_scale)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("entropy_refit_steps", &TrainConfig::entropy_refit_steps)
      .def_readwrite("threads", &TrainConfig::threads);

  py::class_<EpochMetrics>(m, "EpochMetrics")
      .def_readonly("epoch", &EpochMetrics::epoch)
      .def_readonly("loss", &EpochMetrics::loss)
      .def_readonly("distortion", &EpochMetrics::distortion)
      .def_readonly("soft_xent", &EpochMetrics::soft_xent)
      .def_readonly("hard_xent", &EpochMetrics::hard_xent)
      .def_readonly("model_entropy_bits", &EpochMetrics::model_entropy_bits);

  py::class_<Model>(m, "Model")
      .def_readonly("config", &Model::config)
      .def_readonly("metadata", &Model::metadata)
      .def("probabilities", [](const Model& md) { return md.entropy_model().probabilities(); })
      .def("checksum", &model_checksum)
      .def("save", [](const Model& md, const std::string& path) { save_checkpoint(md, path); })
      .def("to_bytes", [](const Model& md) { return to_bytes(serialize_checkpoint(md)); });

  m.def("init_model", &init_model, py::arg("config"), py::arg("seed") = 0);
  m.def("load_model", &load_checkpoint, py::arg("path"));
  m.def("model_from_bytes", [](const py::bytes& b) { return parse_checkpoint(from_bytes(b)); });

  m.def(
      "train",
      [](const std::vector<U8Array>& images, const TrainConfig& cfg) {
        const Dataset data = to_dataset(images);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(data, cfg);
        }
        return py::make_tuple(std::move(r.model), std::move(r.log));
      },
      py::arg("images"), py::arg("config"), "Returns (model, per-epoch metrics).");

  m.def(
      "synthetic_textures",
      [](std::size_t count, int height, int width, int channels, std::uint64_t seed) {
        std::vector<py::array> out;
        for (const auto& img : synthetic_textures(count, height, width, channels, seed).images)
          out.push_back(to_array(img));
        return out;
      },
      py::arg("count"), py::arg("height") = 32, py::arg("width") = 32, py::arg("channels") = 3,
      py::arg("seed") = 0);

  py::class_<Codec>(m, "Codec")
      .def(py::init<Model>())
      .def("compress", [](const Codec& c, const U8Array& a) { return to_bytes(c.compress(to_image(a)).bytes); })
      .def("decompress",
           [](const Codec& c, const py::bytes& b) { return to_array(c.decompress(from_bytes(b)).image); })
      .def("encode_codes", [](const Codec& c, const U8Array& a) { return c.encode_codes(to_image(a)); })
      .def("probabilities", &Codec::probabilities)
      .def(
          "evaluate",
          [](const Codec& c, const std::vector<U8Array>& images) {
            const EvalReport r = evaluate(c, to_dataset(images));
            py::dict d;
            d["bpp"] = r.bpp;
            d["mse"] = r.mse;
            d["hard_xent_bpp"] = r.hard_xent_bpp;
            d["model_entropy_bits"] = r.model_entropy_bits;
            return d;
          },
          "Mean bpp, mse (8-bit units), hard_xent_bpp and model entropy over the images.");

  m.def("quantize_model", [](const std::vector<double>& q) {
    const FrequencyTable table = quantize_model(q);
    return std::vector<std::uint32_t>(table.frequencies().begin(), table.frequencies().end());
  });
  m.def("range_encode", [](const std::vector<std::uint32_t>& symbols, const std::vector<std::uint32_t>& freq) {
    return to_bytes(range_encode(symbols, FrequencyTable::from_frequencies(freq)));
  });
  m.def("range_decode",
        [](const py::bytes& payload, const std::vector<std::uint32_t>& freq, std::size_t count) {
          return range_decode(from_bytes(payload), FrequencyTable::from_frequencies(freq), count);
        });
  m.def("xent_decomposition", [](const std::vector<double>& p, const std::vector<double>& q) {
    const auto d = xent_decomposition(p, q);
    return py::make_tuple(d.cross_entropy, d.kl, d.entropy);
  });
  m.def("crc32", [](const py::bytes& b) { return crc32(from_bytes(b)); });
}
