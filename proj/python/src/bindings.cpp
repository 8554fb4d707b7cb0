#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dsseg/laema.hpp"
#include "dsseg/metrics.hpp"
#include "dsseg/mixing.hpp"
#include "dsseg/pseudolabel.hpp"
#include "dsseg/selection.hpp"
#include "dsseg/synthdata.hpp"
#include "dsseg/theory.hpp"
#include "dsseg/trainer.hpp"

namespace py = pybind11;
using namespace dsseg;

namespace {

template <class T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <class T>
NdArray<T> to_nd(const Array<T>& a) {
    Shape s(a.shape(), a.shape() + a.ndim());
    return NdArray<T>(std::move(s), std::vector<T>(a.data(), a.data() + a.size()));
}

template <class T>
py::array_t<T> to_numpy(const NdArray<T>& a) {
    py::array_t<T> out(std::vector<py::ssize_t>(a.shape().begin(), a.shape().end()));
    std::copy(a.data(), a.data() + a.size(), out.mutable_data());
    return out;
}

LabelMap to_labels(const Array<std::int32_t>& a, int num_classes) { return LabelMap(to_nd(a), num_classes); }

nlohmann::json parse(const std::string& s) {
    try {
        return nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(e.what());
    }
}

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict record_dict(const MetricsRecord& r) {
    py::list per_class;
    for (const auto& c : r.per_class) {
        per_class.append(py::dict(py::arg("cls") = c.cls, py::arg("dice") = c.dice, py::arg("jaccard") = c.jaccard,
                                  py::arg("hd95_mm") = opt(c.hd95_mm), py::arg("asd_mm") = opt(c.asd_mm)));
    }
    return py::dict(py::arg("dice") = r.dice, py::arg("jaccard") = r.jaccard, py::arg("hd95_mm") = opt(r.hd95_mm),
                    py::arg("asd_mm") = opt(r.asd_mm), py::arg("per_class") = per_class);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core routines of the dsseg toolkit";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("global_weight", &global_weight, py::arg("t"), py::arg("w_max") = 0.01);
    m.def("decay_weight", &decay_weight, py::arg("loss"), py::arg("lam") = 0.3);
    m.def(
        "la_ema_weight",
        [](long long t, double loss, double w_max, double lam, bool loss_aware) {
            return la_ema_weight(t, loss, LAEMAConfig{w_max, lam, loss_aware ? EmaMode::la_ema : EmaMode::standard_ema});
        },
        py::arg("t"), py::arg("loss"), py::arg("w_max") = 0.01, py::arg("lam") = 0.3, py::arg("loss_aware") = true);

    m.def(
        "zero_centered_mask",
        [](const std::vector<std::size_t>& shape, const std::vector<double>& ratios, std::uint64_t seed) {
            return to_numpy(make_zero_centered_mask(shape, ratios, seed).data());
        },
        py::arg("shape"), py::arg("ratios"), py::arg("seed"),
        "Binary mask with a zero block of floor(ratio * extent) voxels per axis at a random position.");
    m.def(
        "mix_images",
        [](const Array<double>& a, const Array<double>& b, const Array<std::uint8_t>& mask) {
            return to_numpy(mix(Volume(to_nd(a)), Volume(to_nd(b)), BinaryMask(to_nd(mask))).data());
        },
        py::arg("a"), py::arg("b"), py::arg("mask"), "Images are (channels, spatial...); mask is spatial.");
    m.def(
        "mix_labels",
        [](const Array<std::int32_t>& a, const Array<std::int32_t>& b, const Array<std::uint8_t>& mask,
           int num_classes) {
            return to_numpy(mix(to_labels(a, num_classes), to_labels(b, num_classes), BinaryMask(to_nd(mask))).data());
        },
        py::arg("a"), py::arg("b"), py::arg("mask"), py::arg("num_classes"));

    m.def(
        "select_student",
        [](const Array<double>& p1, const Array<double>& p2) {
            const auto r = select_student(ProbMap(to_nd(p1)), ProbMap(to_nd(p2)));
            return py::dict(py::arg("chosen") = r.chosen, py::arg("score1") = r.score1, py::arg("score2") = r.score2,
                            py::arg("agreement_fraction") = r.agreement_fraction,
                            py::arg("fallback_used") = r.fallback_used);
        },
        py::arg("p1"), py::arg("p2"), "Probability maps are (classes, spatial...).");

    m.def(
        "largest_component_filter",
        [](const Array<std::int32_t>& labels, int num_classes) {
            return to_numpy(largest_component_filter(to_labels(labels, num_classes)).data());
        },
        py::arg("labels"), py::arg("num_classes"));

    m.def(
        "dice_jaccard",
        [](const Array<std::int32_t>& pred, const Array<std::int32_t>& gt, int cls, int num_classes) {
            const auto r = dice_jaccard(to_labels(pred, num_classes), to_labels(gt, num_classes), cls);
            return py::make_tuple(r.dice, r.jaccard);
        },
        py::arg("pred"), py::arg("gt"), py::arg("cls") = 1, py::arg("num_classes") = 2);
    m.def(
        "evaluate_case",
        [](const Array<std::int32_t>& pred, const Array<std::int32_t>& gt, int num_classes,
           std::vector<double> spacing) {
            if (spacing.empty()) spacing.assign(static_cast<std::size_t>(pred.ndim()), 1.0);
            return record_dict(evaluate_case(to_labels(pred, num_classes), to_labels(gt, num_classes), spacing));
        },
        py::arg("pred"), py::arg("gt"), py::arg("num_classes"), py::arg("spacing") = std::vector<double>{});

    m.def(
        "generate_dataset",
        [](const std::string& spec_json, const std::filesystem::path& out_dir) {
            const auto man = generate_dataset(dataset_spec_from_json(parse(spec_json)), out_dir);
            return py::dict(py::arg("labeled") = man.labeled_ids, py::arg("unlabeled") = man.unlabeled_ids,
                            py::arg("val") = man.val_ids);
        },
        py::arg("spec_json"), py::arg("out_dir"), "Spec is a JSON string; returns the split ids.");

    m.def(
        "evaluate",
        [](const std::filesystem::path& checkpoint, const std::filesystem::path& dataset, const std::string& split) {
            py::list out;
            for (const auto& [id, rec] : evaluate(load_checkpoint(checkpoint), dataset, split)) {
                out.append(py::make_tuple(id, record_dict(rec)));
            }
            return out;
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("split") = "unlabeled");

    m.def(
        "verify_suppression",
        [](const std::string& spec_json) {
            const NoiseModelSpec spec = noise_spec_from_json(parse(spec_json));
            SuppressionReport rep;
            {
                py::gil_scoped_release release;
                rep = check_suppression(simulate_deviation(spec, EmaMode::standard_ema),
                                        simulate_deviation(spec, EmaMode::la_ema));
            }
            std::vector<double> ratio, ratio_se, mean_std, mean_la;
            for (const auto& r : rep.rows) {
                ratio.push_back(r.ratio);
                ratio_se.push_back(r.ratio_se);
                mean_std.push_back(r.mean_std);
                mean_la.push_back(r.mean_la);
            }
            return py::dict(py::arg("all_pass") = rep.all_pass,
                            py::arg("suppression_expected") = rep.suppression_expected, py::arg("ratio") = ratio,
                            py::arg("ratio_se") = ratio_se, py::arg("mean_std") = mean_std,
                            py::arg("mean_la") = mean_la);
        },
        py::arg("spec_json"));
}
