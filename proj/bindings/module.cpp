// Python bindings for the main operations: the selective scan kernels,
// discretization, full-pipeline fusion with a weights handle, and the
// loss/metric functions.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "s4f/config.hpp"
#include "s4f/image_io.hpp"
#include "s4f/loss.hpp"
#include "s4f/network.hpp"
#include "s4f/ssm.hpp"
#include "s4f/weights_io.hpp"

namespace py = pybind11;

namespace {

using ArrayD = py::array_t<double, py::array::c_style | py::array::forcecast>;

s4f::Tensor tensor_from(const ArrayD& arr) {
    s4f::Shape shape(static_cast<std::size_t>(arr.ndim()));
    for (py::ssize_t i = 0; i < arr.ndim(); ++i)
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.shape(i));
    std::vector<double> values(arr.data(), arr.data() + arr.size());
    return s4f::Tensor(std::move(shape), std::move(values));
}

py::array_t<double> array_from(const s4f::Tensor& t) {
    std::vector<py::ssize_t> shape(t.rank());
    for (std::size_t i = 0; i < t.rank(); ++i)
        shape[i] = static_cast<py::ssize_t>(t.extent(i));
    py::array_t<double> arr(shape);
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

s4f::Tensor optional_tensor(const py::object& obj) {
    if (obj.is_none()) return {};
    return tensor_from(obj.cast<ArrayD>());
}

s4f::DiscretizeMode parse_mode(const std::string& mode) {
    if (mode == "euler") return s4f::DiscretizeMode::euler;
    if (mode == "zoh") return s4f::DiscretizeMode::zoh;
    throw std::invalid_argument("mode must be 'euler' or 'zoh'");
}

}  // namespace

PYBIND11_MODULE(_s4fusion, m) {
    m.doc() = "Selective state space infrared/visible image fusion kernels";

    py::class_<s4f::ModelWeights>(m, "Weights")
        .def_static(
            "init",
            [](const std::string& config_json) {
                return s4f::init_weights(
                    s4f::run_config_from_json(config_json).net);
            },
            py::arg("config_json"))
        .def_static("load", &s4f::load_weights, py::arg("path"))
        .def("save",
             [](const s4f::ModelWeights& w, const std::string& path) {
                 s4f::save_weights(path, w);
             },
             py::arg("path"))
        .def("swap_modalities",
             [](const s4f::ModelWeights& w) { return s4f::swap_modalities(w); })
        .def_property_readonly("config_json", [](const s4f::ModelWeights& w) {
            s4f::RunConfig cfg;
            cfg.net = w.cfg;
            return s4f::run_config_to_json(cfg);
        });

    m.def("default_config_json", [] {
        return s4f::run_config_to_json(s4f::RunConfig{});
    });

    m.def(
        "discretize",
        [](const ArrayD& delta, const ArrayD& a, const ArrayD& b,
           const std::string& mode) {
            const s4f::DiscreteStep step = s4f::discretize(
                tensor_from(delta), tensor_from(a), tensor_from(b), parse_mode(mode));
            return py::make_tuple(array_from(step.a_bar), array_from(step.b_bar));
        },
        py::arg("delta"), py::arg("a"), py::arg("b"), py::arg("mode") = "euler");

    m.def(
        "selective_scan_ref",
        [](const ArrayD& a_bar, const ArrayD& b_bar, const ArrayD& c_seq,
           const ArrayD& x, const py::object& d) {
            return array_from(s4f::selective_scan_ref(
                tensor_from(a_bar), tensor_from(b_bar), tensor_from(c_seq),
                tensor_from(x), optional_tensor(d)));
        },
        py::arg("a_bar"), py::arg("b_bar"), py::arg("c_seq"), py::arg("x"),
        py::arg("d") = py::none());

    m.def(
        "selective_scan_chunked",
        [](const ArrayD& a_bar, const ArrayD& b_bar, const ArrayD& c_seq,
           const ArrayD& x, const py::object& d, std::size_t chunk) {
            return array_from(s4f::selective_scan_chunked(
                tensor_from(a_bar), tensor_from(b_bar), tensor_from(c_seq),
                tensor_from(x), optional_tensor(d), chunk));
        },
        py::arg("a_bar"), py::arg("b_bar"), py::arg("c_seq"), py::arg("x"),
        py::arg("d") = py::none(), py::arg("chunk") = 64);

    m.def(
        "fuse",
        [](const ArrayD& ir, const ArrayD& vis, const s4f::ModelWeights& w) {
            return array_from(s4f::fuse_forward(tensor_from(ir), tensor_from(vis), w));
        },
        py::arg("ir"), py::arg("vis"), py::arg("weights"));

    m.def(
        "quality_metrics",
        [](const ArrayD& img) {
            const s4f::QualityMetrics q = s4f::quality_metrics(tensor_from(img));
            return py::dict(py::arg("sf") = q.sf, py::arg("ag") = q.ag);
        },
        py::arg("img"));

    m.def(
        "perception_loss",
        [](const std::vector<double>& logits) {
            const s4f::PerceptionLoss loss = s4f::perception_loss(logits);
            return py::make_tuple(loss.value, loss.grad);
        },
        py::arg("logits"));

    m.def(
        "ssim",
        [](const ArrayD& a, const ArrayD& b) {
            return s4f::ssim(tensor_from(a), tensor_from(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "gradient_loss",
        [](const ArrayD& fused, const ArrayD& ir, const ArrayD& vis) {
            return s4f::gradient_loss(tensor_from(fused), tensor_from(ir),
                                      tensor_from(vis));
        },
        py::arg("fused"), py::arg("ir"), py::arg("vis"));

    m.def(
        "weighted_fidelity",
        [](const ArrayD& fused, const ArrayD& ir, const ArrayD& vis) {
            const s4f::FidelityResult r = s4f::weighted_fidelity(
                tensor_from(fused), tensor_from(ir), tensor_from(vis));
            return py::dict(py::arg("l1") = r.l1, py::arg("ssim_loss") = r.ssim_loss,
                            py::arg("omega_ir") = r.omega_ir,
                            py::arg("omega_vi") = r.omega_vi);
        },
        py::arg("fused"), py::arg("ir"), py::arg("vis"));

    m.def(
        "sobel_magnitude",
        [](const ArrayD& img) { return array_from(s4f::sobel_magnitude(tensor_from(img))); },
        py::arg("img"));

    m.def(
        "read_image",
        [](const std::string& path) { return array_from(s4f::read_image(path).y); },
        py::arg("path"), "Read a PGM/PPM file and return the [0,1] luminance plane");

    m.def(
        "write_image",
        [](const std::string& path, const ArrayD& y) {
            s4f::write_image(path, tensor_from(y));
        },
        py::arg("path"), py::arg("y"), "Write a [0,1] luminance plane as binary PGM");
}
