#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <span>
#include <vector>

#include "mmscope/attention_stats.hpp"
#include "mmscope/diagnosticity.hpp"
#include "mmscope/errors.hpp"
#include "mmscope/geometry.hpp"
#include "mmscope/numstat.hpp"
#include "mmscope/probekit.hpp"
#include "mmscope/rank_overlap.hpp"
#include "mmscope/scene_text.hpp"

namespace py = pybind11;
using namespace mmscope;

namespace {

BBox box_from_tuple(const std::vector<double>& v) {
  if (v.size() != 4) {
    throw py::value_error("box must have 4 coordinates");
  }
  return {v[0], v[1], v[2], v[3]};
}

RankedList list_from(const std::vector<std::string>& items) {
  RankedList l;
  l.items = items;
  return l;
}

py::dict f1_to_dict(const F1Report& rep) {
  py::dict d;
  d["micro_f1"] = rep.micro_f1;
  d["macro_f1"] = rep.macro_f1;
  d["weighted_f1"] = rep.weighted_f1;
  py::dict per_class;
  for (const auto& [label, m] : rep.per_class) {
    py::dict cm;
    cm["precision"] = m.precision;
    cm["recall"] = m.recall;
    cm["f1"] = m.f1;
    cm["support"] = m.support;
    per_class[py::str(label)] = cm;
  }
  d["per_class"] = per_class;
  return d;
}

ProbeDataset dataset_from(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
    const std::vector<std::string>& y) {
  if (x.ndim() != 2) throw py::value_error("X must be 2-D");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto d = static_cast<std::size_t>(x.shape(1));
  if (y.size() != n) throw py::value_error("len(y) must match X rows");
  ProbeDataset ds;
  const double* data = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    ProbeRow row;
    row.sample_id = "row" + std::to_string(i);
    row.label = y[i];
    row.vec.assign(data + i * d, data + (i + 1) * d);
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace

PYBIND11_MODULE(_mmscope, m) {
  m.doc() = "Core analysis operations: ranked-list overlap, attention "
            "sub-block statistics, PMI diagnosticity, geometry, probing "
            "and shared numerics.";

  py::register_exception<Error>(m, "MmscopeError");

  // rank overlap ------------------------------------------------------
  m.def(
      "rbo",
      [](const std::vector<std::string>& s, const std::vector<std::string>& t,
         double p, std::size_t depth) {
        const RboResult r = rbo(list_from(s), list_from(t), p, depth);
        return py::make_tuple(r.normalized, r.raw);
      },
      py::arg("s"), py::arg("t"), py::arg("p") = 0.9, py::arg("depth") = 3,
      "Truncated rank-biased overlap; returns (normalized, raw).");
  m.def(
      "set_iou",
      [](const std::vector<std::string>& s, const std::vector<std::string>& t,
         std::size_t depth) {
        return set_iou(list_from(s), list_from(t), depth);
      },
      py::arg("s"), py::arg("t"), py::arg("depth"));
  m.def(
      "pearson_r",
      [](const std::vector<double>& xs, const std::vector<double>& ys) {
        const Correlation c = pearson_r(xs, ys);
        return py::make_tuple(c.r, c.df, c.p_value);
      },
      py::arg("xs"), py::arg("ys"), "Returns (r, df, p_value).");

  // geometry ----------------------------------------------------------
  m.def(
      "bbox_iou",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return bbox_iou(box_from_tuple(a), box_from_tuple(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "containment_fraction",
      [](const std::vector<double>& vf, const std::vector<double>& ot) {
        return containment_fraction(box_from_tuple(vf), box_from_tuple(ot));
      },
      py::arg("vf"), py::arg("ot"));
  m.def(
      "assign_labels_to_features",
      [](const std::vector<std::vector<double>>& visual_boxes,
         const std::vector<std::pair<std::string, std::vector<double>>>& tags,
         double iou_threshold, double containment_threshold) {
        std::vector<BBox> boxes;
        for (const auto& b : visual_boxes) boxes.push_back(box_from_tuple(b));
        std::vector<ObjectTag> object_tags;
        for (const auto& [label, b] : tags) {
          object_tags.push_back({label, box_from_tuple(b)});
        }
        const Assignments a = assign_labels_to_features(
            boxes, object_tags, iou_threshold, containment_threshold);
        py::list items;
        for (const TagAssignment& t : a.items) {
          py::dict d;
          d["visual_index"] = t.visual_index;
          d["label"] = t.label;
          d["iou"] = t.iou;
          d["containment"] = t.containment;
          d["rule"] = to_string(t.rule);
          items.append(d);
        }
        return py::make_tuple(items, a.coverage);
      },
      py::arg("visual_boxes"), py::arg("tags"),
      py::arg("iou_threshold") = 0.6, py::arg("containment_threshold") = 0.8,
      "Returns (assignments, coverage).");

  // attention ---------------------------------------------------------
  m.def(
      "max_over_heads",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>&
             tensor,
         int layer) {
        if (tensor.ndim() != 4 || tensor.shape(2) != tensor.shape(3)) {
          throw py::value_error("tensor must be (L, H, S, S)");
        }
        AttentionTensor t;
        t.layers = static_cast<int>(tensor.shape(0));
        t.heads = static_cast<int>(tensor.shape(1));
        t.seq = static_cast<int>(tensor.shape(2));
        t.values.assign(tensor.data(), tensor.data() + tensor.size());
        const AttentionMatrix out = max_over_heads(t, layer);
        py::array_t<double> result({out.seq, out.seq});
        std::copy(out.values.begin(), out.values.end(),
                  result.mutable_data());
        return result;
      },
      py::arg("tensor"), py::arg("layer") = 0,
      "Element-wise max across heads of one layer.");
  m.def(
      "subblock_stats",
      [](const py::array_t<double,
                           py::array::c_style | py::array::forcecast>& matrix,
         const std::vector<std::string>& kinds, const std::string& from,
         const std::string& to, bool include_pad) {
        if (matrix.ndim() != 2 || matrix.shape(0) != matrix.shape(1)) {
          throw py::value_error("matrix must be square");
        }
        const int s = static_cast<int>(matrix.shape(0));
        if (kinds.size() != static_cast<std::size_t>(s)) {
          throw py::value_error("len(kinds) must equal matrix size");
        }
        AttentionMatrix m;
        m.seq = s;
        m.values.assign(matrix.data(), matrix.data() + matrix.size());
        InputLayout layout;
        for (int i = 0; i < s; ++i) {
          const auto kind = token_kind_from(kinds[static_cast<std::size_t>(i)]);
          if (!kind) throw py::value_error("bad token kind");
          layout.tokens.push_back({i, *kind, "", {}, {}});
        }
        const auto from_kind = token_kind_from(from);
        const auto to_kind = token_kind_from(to);
        if (!from_kind || !to_kind) throw py::value_error("bad token kind");
        const SubBlock b =
            subblock(m, layout, *from_kind, *to_kind, include_pad);
        if (b.empty()) {
          return py::make_tuple(0.0, 0.0, static_cast<std::size_t>(0));
        }
        const BlockStats stats = block_stats(b);
        return py::make_tuple(stats.mass, stats.std_dev, stats.n);
      },
      py::arg("matrix"), py::arg("kinds"), py::arg("from_kind") = "VISUAL",
      py::arg("to_kind") = "VISUAL", py::arg("include_pad") = false,
      "Returns (mass, std, n) of the selected sub-block.");

  // diagnosticity -----------------------------------------------------
  m.def(
      "pmi",
      [](const std::vector<
             std::pair<std::string, std::vector<std::string>>>& images,
         long min_joint) {
        std::vector<SampleRecord> records;
        records.reserve(images.size());
        std::size_t i = 0;
        for (const auto& [scene, objects] : images) {
          SampleRecord rec;
          rec.sample_id = "img" + std::to_string(i++);
          rec.scene_type = scene;
          for (const std::string& obj : objects) {
            rec.object_tags.push_back({obj, {0, 0, 1, 1}});
          }
          records.push_back(std::move(rec));
        }
        const PmiTable table = pmi_table(records, min_joint);
        py::list rows;
        for (const auto& [key, e] : table.entries) {
          py::dict d;
          d["scene"] = key.first;
          d["object"] = key.second;
          d["pmi"] = e.pmi;
          d["joint"] = e.joint_count;
          d["scene_count"] = e.scene_count;
          d["object_count"] = e.object_count;
          d["total"] = e.total;
          rows.append(d);
        }
        return rows;
      },
      py::arg("images"), py::arg("min_joint") = 5,
      "Image-level PMI from (scene, [objects]) pairs.");
  m.def("change_rate", &change_rate, py::arg("before"), py::arg("after"));

  // numerics ----------------------------------------------------------
  m.def(
      "gaussian_kde",
      [](const std::vector<double>& samples, const std::vector<double>& grid,
         std::optional<double> bandwidth) {
        return gaussian_kde(samples, grid, bandwidth);
      },
      py::arg("samples"), py::arg("grid"),
      py::arg("bandwidth") = std::nullopt);
  m.def(
      "describe",
      [](const std::vector<double>& samples) {
        const Description d = describe(samples);
        py::dict out;
        out["n"] = d.n;
        out["mean"] = d.mean;
        out["std_population"] = d.std_population;
        out["std_sample"] =
            d.std_sample.has_value() ? py::cast(*d.std_sample) : py::none();
        out["min"] = d.min;
        out["max"] = d.max;
        return out;
      },
      py::arg("samples"));
  m.def(
      "two_sample_z",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const ZTestResult r = two_sample_z(a, b);
        return py::make_tuple(r.z, r.p_two_sided);
      },
      py::arg("a"), py::arg("b"), "Returns (z, p_two_sided).");

  // scene text --------------------------------------------------------
  m.def(
      "extract_scene_label",
      [](const std::string& caption) {
        const auto label =
            extract_scene_label(caption, SceneLexicon::defaults());
        return label.has_value() ? py::cast(*label) : py::object(py::none());
      },
      py::arg("caption"));
  m.def(
      "scene_frequencies",
      [](const std::vector<std::string>& captions) {
        return scene_frequencies(captions, SceneLexicon::defaults());
      },
      py::arg("captions"));

  // probing -----------------------------------------------------------
  m.def(
      "pool_mean",
      [](const std::vector<std::vector<double>>& vectors) {
        return pool_mean(vectors);
      },
      py::arg("vectors"));
  m.def(
      "f1_report",
      [](const std::vector<std::string>& truth,
         const std::vector<std::string>& predicted) {
        return f1_to_dict(compute_f1(truth, predicted));
      },
      py::arg("truth"), py::arg("predicted"));

  py::class_<ForestModel>(m, "RandomForest",
                          "Gini random forest over dense feature rows.")
      .def(py::init([](const py::array_t<
                           double, py::array::c_style | py::array::forcecast>&
                           x,
                       const std::vector<std::string>& y, int n_trees,
                       std::uint64_t seed) {
             return train_forest(dataset_from(x, y), n_trees, seed);
           }),
           py::arg("X"), py::arg("y"), py::arg("n_trees") = 100,
           py::arg("seed") = 0)
      .def_readonly("classes", &ForestModel::classes)
      .def_readonly("n_trees", &ForestModel::n_trees)
      .def(
          "predict",
          [](const ForestModel& model,
             const py::array_t<double, py::array::c_style |
                                           py::array::forcecast>& x) {
            if (x.ndim() != 2) throw py::value_error("X must be 2-D");
            const auto n = static_cast<std::size_t>(x.shape(0));
            const auto d = static_cast<std::size_t>(x.shape(1));
            std::vector<std::string> out;
            out.reserve(n);
            const double* data = x.data();
            for (std::size_t i = 0; i < n; ++i) {
              out.push_back(model.predict(
                  std::span<const double>(data + i * d, d)));
            }
            return out;
          },
          py::arg("X"))
      .def(
          "score",
          [](const ForestModel& model,
             const py::array_t<double, py::array::c_style |
                                           py::array::forcecast>& x,
             const std::vector<std::string>& y) {
            return f1_to_dict(evaluate(model, dataset_from(x, y)));
          },
          py::arg("X"), py::arg("y"), "Micro/macro/weighted F1 report.");

#ifdef MMSCOPE_VERSION
#define MMSCOPE_STR_INNER(x) #x
#define MMSCOPE_STR(x) MMSCOPE_STR_INNER(x)
  m.attr("__version__") = MMSCOPE_STR(MMSCOPE_VERSION);
#else
  m.attr("__version__") = "1.0.0";
#endif
}
