// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "tubeseq/config.hpp"
#include "tubeseq/error.hpp"
#include "tubeseq/eval.hpp"
#include "tubeseq/gradcheck.hpp"
#include "tubeseq/pipeline.hpp"
#include "tubeseq/tubelize.hpp"

namespace py = pybind11;
using namespace tubeseq;

namespace {

using Bytes = std::vector<std::uint8_t>;

py::bytes to_py(const Bytes& b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::array_t<std::uint8_t> grid_to_numpy(const VoxelGrid& g) {
  const auto r = static_cast<py::ssize_t>(g.resolution());
  py::array_t<std::uint8_t> out({r, r, r});
  std::memcpy(out.mutable_data(), g.cells().data(), g.cell_count());
  return out;
}

VoxelGrid grid_from_numpy(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2)) {
    throw InvalidArgument("expected a cubic R x R x R array");
  }
  VoxelGrid g(static_cast<int>(a.shape(0)));
  auto cells = g.mutable_cells();
  const std::uint8_t* src = a.data();
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = src[i] != 0;
  return g;
}

}  // namespace

PYBIND11_MODULE(_tubeseq, m) {
  m.doc() = "Run-length voxel tubes and a sequence-to-sequence shape auto-decoder.";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<VoxelGrid>(m, "VoxelGrid")
      .def(py::init<int>(), py::arg("resolution"))
      .def_property_readonly("resolution", &VoxelGrid::resolution)
      .def("get", &VoxelGrid::get)
      .def("set", &VoxelGrid::set, py::arg("x"), py::arg("y"), py::arg("z"), py::arg("occupied") = true)
      .def("occupied_count", &VoxelGrid::occupied_count)
      .def("to_numpy", &grid_to_numpy)
      .def_static("from_numpy", &grid_from_numpy)
      .def(py::self == py::self)
      .def("__repr__", [](const VoxelGrid& g) {
        return "VoxelGrid(resolution=" + std::to_string(g.resolution()) +
               ", occupied=" + std::to_string(g.occupied_count()) + ")";
      });

  m.def("volumetric_iou", &volumetric_iou);
  m.def("primitive_suites", &primitive_suites);
  m.def("write_voxd", [](const VoxelGrid& g) { return to_py(write_dense(g)); });
  m.def("read_voxd", [](const py::bytes& b) { return read_dense(from_py(b)); });
  m.def("import_binvox", [](const py::bytes& b) { return import_binvox(from_py(b)); });

  py::class_<ShapeSet>(m, "ShapeSet")
      .def_readonly("ids", &ShapeSet::ids)
      .def_readonly("grids", &ShapeSet::grids)
      .def("__len__", [](const ShapeSet& s) { return s.ids.size(); });
  m.def("generate_shapes", &generate_shapes, py::arg("suite"), py::arg("resolution"), py::arg("count"),
        py::arg("seed"));
  m.def("load_shape_dir", &load_shape_dir);
  m.def("write_shape_dir", &write_shape_dir);

  py::class_<Tube>(m, "Tube")
      .def_property_readonly("coord", [](const Tube& t) { return std::make_pair(t.coord.u, t.coord.v); })
      .def_property_readonly("segments", [](const Tube& t) {
        std::vector<std::pair<int, int>> out;
        for (const auto& s : t.segments) out.emplace_back(s.start, s.end);
        return out;
      });

  py::class_<TubelizedShape>(m, "TubelizedShape")
      .def_readonly("resolution", &TubelizedShape::resolution)
      .def_property_readonly("axis", [](const TubelizedShape& t) { return to_string(t.axis); })
      .def_readonly("tubes", &TubelizedShape::tubes)
      .def("at", &TubelizedShape::at, py::return_value_policy::reference_internal)
      .def("segment_counts", [](const TubelizedShape& t) {
        const auto r = static_cast<py::ssize_t>(t.resolution);
        py::array_t<int> out({r, r});
        const auto counts = segment_count_image(t);
        std::memcpy(out.mutable_data(), counts.data(), counts.size() * sizeof(int));
        return out;
      });

  m.def("tubelize", [](const VoxelGrid& g, const std::string& axis) { return tubelize(g, parse_axis(axis)); },
        py::arg("grid"), py::arg("axis") = "Y");
  m.def("detubelize", &detubelize);
  m.def("write_vtz", [](const TubelizedShape& t) { return to_py(write_vtz(t)); });
  m.def("read_vtz", [](const py::bytes& b) { return read_vtz(from_py(b)); });
  m.def("tokens", [](const Tube& t) {
    std::vector<std::string> out;
    for (const Token& tok : to_tokens(t)) out.push_back(to_string(tok));
    return out;
  });
  m.def("token_classes", [](const Tube& t, int resolution) {
    std::vector<int> out;
    for (const Token& tok : to_tokens(t)) out.push_back(token_class(tok, resolution));
    return out;
  });

  py::class_<RunConfig>(m, "RunConfig")
      .def_static("parse", &parse_run_config)
      .def_static("load", &load_run_config)
      .def("__str__", &format_run_config);

  py::class_<TrainingState>(m, "TrainingState")
      .def_property_readonly("latent_ids", [](const TrainingState& s) { return s.latents.ids(); })
      .def_property_readonly("parameter_count", [](const TrainingState& s) { return s.model.params().parameter_count(); })
      .def_property_readonly("checksum", [](const TrainingState& s) { return s.model.params().checksum(); })
      .def("latent", [](const TrainingState& s, const std::string& id) { return resolve_condition(s, id); })
      .def("reconstruct",
           [](const TrainingState& s, const std::string& id_or_path) {
             return s.model.reconstruct_shape(resolve_condition(s, id_or_path)).grid;
           })
      .def("evaluate",
           [](const TrainingState& s, const ShapeSet& shapes) {
             const EvalReport r = evaluate(s.model, latents_for(s, shapes.ids), shapes.grids, shapes.ids);
             return r.mean_iou;
           })
      .def("to_bytes", [](const TrainingState& s) { return to_py(write_checkpoint(s)); })
      .def_static("from_bytes", [](const py::bytes& b) { return read_checkpoint(from_py(b)); });

  py::class_<TrainRun>(m, "TrainRun")
      .def_readonly("state", &TrainRun::state)
      .def_property_readonly("losses",
                             [](const TrainRun& r) {
                               std::vector<double> out;
                               for (const auto& rec : r.log.losses) out.push_back(rec.loss);
                               return out;
                             })
      .def_property_readonly("ious",
                             [](const TrainRun& r) {
                               std::vector<std::pair<int, double>> out;
                               for (const auto& rec : r.log.ious) out.emplace_back(rec.step, rec.mean_iou);
                               return out;
                             })
      .def_property_readonly("metrics", [](const TrainRun& r) { return r.log.to_text(); });

  m.def(
      "train",
      [](const RunConfig& cfg, const ShapeSet& shapes) {
        py::gil_scoped_release release;
        return run_training(cfg, shapes);
      },
      py::arg("config"), py::arg("shapes"));

  m.def("gradcheck", [](int seeds) {
    std::vector<std::pair<std::string, double>> out;
    for (const GradCheckCase& c : gradcheck_suite(seeds)) out.emplace_back(c.name, c.max_rel_error);
    return out;
  }, py::arg("seeds") = 2);
  m.attr("GRADCHECK_TOLERANCE") = kGradCheckTolerance;
}
