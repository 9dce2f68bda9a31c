#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ghostrnn/bench.hpp"
#include "ghostrnn/checkpoint.hpp"
#include "ghostrnn/correlation.hpp"
#include "ghostrnn/errors.hpp"
#include "ghostrnn/fista.hpp"
#include "ghostrnn/mnist.hpp"
#include "ghostrnn/trainer.hpp"

namespace py = pybind11;
using namespace ghostrnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> values, std::size_t height, std::size_t width) {
    Array out({height, width});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Array to_array(const ImageTensor& image) { return to_array(image.flat(), image.height(), image.width()); }

ImageTensor to_image(const Array& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    return {h, w, std::vector<double>(a.data(), a.data() + h * w)};
}

std::vector<ImageTensor> to_images(const Array& a) {
    if (a.ndim() != 3) throw InvalidArgument("expected a 3-D array (n, height, width)");
    const auto n = static_cast<std::size_t>(a.shape(0));
    const auto h = static_cast<std::size_t>(a.shape(1));
    const auto w = static_cast<std::size_t>(a.shape(2));
    std::vector<ImageTensor> out;
    for (std::size_t k = 0; k < n; ++k) {
        const double* p = a.data() + k * h * w;
        out.emplace_back(h, w, std::vector<double>(p, p + h * w));
    }
    return out;
}

Array patterns(const SpeckleSequence& s) {
    Array out({s.count(), s.height(), s.width()});
    double* dst = out.mutable_data();
    for (std::size_t i = 0; i < s.count(); ++i) {
        const auto col = s.column(i);
        std::copy(col.data(), col.data() + col.size(), dst + i * s.pixel_count());
    }
    return out;
}

TrainResult train_images(const Array& images, const SpeckleSequence& speckles, std::size_t hidden,
                         std::size_t layers, std::size_t epochs, std::size_t batch, double lr,
                         std::uint64_t seed_init, std::uint64_t seed_shuffle, const std::string& encoding) {
    std::vector<TrainingSample> data;
    for (const auto& img : to_images(images)) data.push_back({measure_sequence(speckles, img), flatten(img)});
    if (data.empty()) throw InvalidArgument("train: no images");
    TrainConfig config;
    config.epochs = epochs;
    config.batch_size = batch;
    config.adam.learning_rate = lr;
    config.shuffle_seed = seed_shuffle;
    config.encoding = parse_input_encoding(encoding);
    const std::size_t pixels = speckles.pixel_count();
    py::gil_scoped_release release;
    return train(data, init_network({pixels + 1, hidden, layers, pixels}, seed_init), config);
}

}  // namespace

PYBIND11_MODULE(_ghostrnn, m) {
    m.doc() = "Ghost imaging reconstruction: correlation, FISTA and a stacked-LSTM regressor";
    m.attr("__version__") = GHOSTRNN_VERSION;

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<SpeckleSequence>(m, "SpeckleSequence")
        .def_property_readonly("count", &SpeckleSequence::count)
        .def_property_readonly("height", &SpeckleSequence::height)
        .def_property_readonly("width", &SpeckleSequence::width)
        .def_property_readonly("seed", &SpeckleSequence::seed)
        .def_property_readonly("distribution", [](const SpeckleSequence& s) { return to_string(s.distribution()); })
        .def("prefix", &SpeckleSequence::prefix, py::arg("n"))
        .def("patterns", &patterns, "Array of shape (count, height, width).")
        .def("__len__", &SpeckleSequence::count);

    py::class_<MeasurementSequence>(m, "MeasurementSequence")
        .def_readonly("speckles", &MeasurementSequence::speckles)
        .def_readonly("buckets", &MeasurementSequence::buckets)
        .def("__len__", &MeasurementSequence::size);

    m.def(
        "generate_speckles",
        [](std::uint64_t seed, std::size_t count, std::size_t height, std::size_t width,
           const std::string& distribution) {
            return generate_speckles(seed, count, height, width, parse_distribution(distribution));
        },
        py::arg("seed"), py::arg("count"), py::arg("height") = 28, py::arg("width") = 28,
        py::arg("distribution") = "binary");
    m.def("sampling_count", &sampling_count, py::arg("rate"), py::arg("pixel_count"));
    m.def(
        "measure", [](const SpeckleSequence& s, const Array& target) { return measure_sequence(s, to_image(target)); },
        py::arg("speckles"), py::arg("target"));

    m.def(
        "correlate",
        [](const MeasurementSequence& ms) {
            const auto raw = correlate(ms);
            return to_array(raw.values, raw.height, raw.width);
        },
        py::arg("measurements"), "Unnormalized correlation image.");
    m.def(
        "reconstruct_gi", [](const MeasurementSequence& ms) { return to_array(reconstruct_gi(ms)); },
        py::arg("measurements"));
    m.def(
        "reconstruct_cs",
        [](const MeasurementSequence& ms, double lambda_scale, int max_iterations, double tolerance) {
            FistaResult r;
            {
                py::gil_scoped_release release;
                r = fista_reconstruct(make_cs_problem(ms, lambda_scale, max_iterations, tolerance));
            }
            return py::make_tuple(to_array(r.image), r.iterations, r.objective);
        },
        py::arg("measurements"), py::arg("lambda_scale") = 0.01, py::arg("max_iterations") = 500,
        py::arg("tolerance") = 1e-6, "Returns (normalized image, iterations, objective).");

    m.def(
        "psnr", [](const Array& a, const Array& b, double peak) { return psnr(to_image(a), to_image(b), peak); },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);

    py::class_<GiRnnModel>(m, "Model")
        .def_property_readonly("hidden_size", [](const GiRnnModel& g) { return g.network.hidden_size(); })
        .def_property_readonly("layers", [](const GiRnnModel& g) { return g.network.layers.size(); })
        .def_property_readonly("sequence_length", [](const GiRnnModel& g) { return g.sequence_length; })
        .def_property_readonly("encoding", [](const GiRnnModel& g) { return to_string(g.preprocessing.encoding); })
        .def("parameter_count", [](const GiRnnModel& g) { return g.network.parameter_count(); })
        .def(
            "predict", [](const GiRnnModel& g, const MeasurementSequence& ms) { return to_array(predict_image(g, ms)); },
            py::arg("measurements"))
        .def(
            "save", [](const GiRnnModel& g, const std::filesystem::path& p) { save_checkpoint(p, g); },
            py::arg("path"));

    m.def(
        "load_model", [](const std::filesystem::path& p) { return load_checkpoint(p).model; }, py::arg("path"));

    m.def(
        "train",
        [](const Array& images, const SpeckleSequence& speckles, std::size_t hidden, std::size_t layers,
           std::size_t epochs, std::size_t batch, double lr, std::uint64_t seed_init,
           std::uint64_t seed_shuffle, const std::string& encoding) {
            auto r = train_images(images, speckles, hidden, layers, epochs, batch, lr, seed_init,
                                  seed_shuffle, encoding);
            std::vector<double> losses;
            for (const auto& e : r.history) losses.push_back(e.mean_loss);
            return py::make_tuple(std::move(r.model), losses);
        },
        py::arg("images"), py::arg("speckles"), py::arg("hidden") = 256, py::arg("layers") = 2,
        py::arg("epochs") = 20, py::arg("batch") = 32, py::arg("lr") = 1e-3, py::arg("seed_init") = 2,
        py::arg("seed_shuffle") = 3, py::arg("encoding") = "modulated",
        "Trains on images (n, h, w) in [0,1]; returns (model, per-epoch mean losses).");

    m.def(
        "load_mnist",
        [](const std::filesystem::path& images, const std::filesystem::path& labels) {
            const auto set = load_mnist_idx(images, labels);
            Array out({set.size(), std::size_t{28}, std::size_t{28}});
            for (std::size_t k = 0; k < set.size(); ++k) {
                std::copy(set.images[k].flat().begin(), set.images[k].flat().end(), out.mutable_data() + k * 784);
            }
            return py::make_tuple(out, set.labels);
        },
        py::arg("images"), py::arg("labels"), "Returns (images (n, 28, 28), labels).");
}
