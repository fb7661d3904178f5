// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: geometry, synthetic scene
// generation, top-N filtering, the grounding model, and metrics.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "grounder/checkpoint.hpp"
#include "grounder/geometry.hpp"
#include "grounder/metrics.hpp"
#include "grounder/model.hpp"
#include "grounder/proposal_graph.hpp"
#include "grounder/synth.hpp"
#include "grounder/trainer.hpp"
#include "grounder/version.hpp"

namespace py = pybind11;
using namespace grounder;

namespace {

// Python-facing wrapper around the double-precision model.
class PyModel {
 public:
  PyModel(int d_obj, int d_t, int branch_heads, int branch_layers, int reasoner_heads,
          int reasoner_layers, bool multi_branch, bool pre_norm, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.d_obj = d_obj;
    cfg.d_t = d_t;
    cfg.branch.heads = branch_heads;
    cfg.branch.layers = branch_layers;
    cfg.branch.pre_norm = pre_norm;
    cfg.reasoner.heads = reasoner_heads;
    cfg.reasoner.layers = reasoner_layers;
    cfg.multi_branch = multi_branch;
    model_ = std::make_unique<GroundingModel<double>>(cfg, seed);
  }

  GroundingOutput forward(const ProposalGraph& g) { return model_->infer(g); }

  py::dict loss(const ProposalGraph& g, double lambda_cls, double lambda_giou) {
    LossWeights w;
    w.lambda_cls = lambda_cls;
    w.lambda_giou = lambda_giou;
    ag::Tape<double> tape;
    LossParts parts;
    model_->loss(tape, g, w, &parts);
    py::dict out;
    out["total"] = parts.total;
    out["cls"] = parts.cls;
    out["giou"] = parts.giou;
    out["l1"] = parts.l1;
    out["target_index"] = parts.target_index;
    return out;
  }

  py::dict train(const std::vector<ProposalGraph>& train_graphs,
                 const std::vector<ProposalGraph>& val_graphs, int epochs, int batch_size,
                 double lr, int patience, int train_top_n, std::uint64_t seed) {
    TrainOptions opts;
    opts.opt.lr = lr;
    opts.epochs = epochs;
    opts.batch_size = batch_size;
    opts.patience = patience;
    opts.top_n = train_top_n;
    opts.seed = seed;
    const TrainResult r = train_model(*model_, train_graphs, val_graphs, opts);
    py::dict out;
    out["epochs_run"] = r.epochs.size();
    out["best_epoch"] = r.best_epoch;
    out["best_val_mean_iou"] = r.best_val.mean_iou;
    out["first_batch_loss"] = r.first_batch_loss;
    out["last_batch_loss"] = r.last_batch_loss;
    return out;
  }

  MetricsReport evaluate_split(const std::vector<ProposalGraph>& graphs, int eval_top_n) {
    return evaluate_model(*model_, graphs, eval_top_n);
  }

  double grad_check_max_err(const std::vector<ProposalGraph>& graphs) {
    return grad_check(*model_, graphs, LossWeights{}).max_rel_err;
  }

  void save(const std::string& path) { save_checkpoint(model_->params(), path); }
  void load(const std::string& path) { load_checkpoint(model_->params(), path); }
  std::size_t n_params() const { return model_->params().scalar_count(); }

 private:
  std::unique_ptr<GroundingModel<double>> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Proposal-graph referring-expression grounding engine";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "GrounderError");

  py::class_<BoxCxCyWH>(m, "Box")
      .def(py::init<double, double, double, double>(), py::arg("cx"), py::arg("cy"), py::arg("w"),
           py::arg("h"))
      .def_readwrite("cx", &BoxCxCyWH::cx)
      .def_readwrite("cy", &BoxCxCyWH::cy)
      .def_readwrite("w", &BoxCxCyWH::w)
      .def_readwrite("h", &BoxCxCyWH::h)
      .def("__repr__", [](const BoxCxCyWH& b) {
        return "Box(cx=" + std::to_string(b.cx) + ", cy=" + std::to_string(b.cy) +
               ", w=" + std::to_string(b.w) + ", h=" + std::to_string(b.h) + ")";
      });

  m.def("to_corners", [](const BoxCxCyWH& b) {
    const Corners c = to_corners(b);
    return py::make_tuple(c.x1, c.y1, c.x2, c.y2);
  });
  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def("giou", &giou, py::arg("a"), py::arg("b"));

  py::class_<ProposalNode>(m, "ProposalNode")
      .def_readonly("query", &ProposalNode::query)
      .def_readonly("box", &ProposalNode::box)
      .def_readonly("class_emb", &ProposalNode::class_emb)
      .def_readonly("det_score", &ProposalNode::det_score);

  py::class_<ExpressionRepr>(m, "ExpressionRepr")
      .def_readonly("class_term", &ExpressionRepr::class_term)
      .def_readonly("relation_term", &ExpressionRepr::relation_term)
      .def_readonly("attribute_term", &ExpressionRepr::attribute_term);

  py::class_<ProposalGraph>(m, "ProposalGraph")
      .def_readonly("image_id", &ProposalGraph::image_id)
      .def_readonly("nodes", &ProposalGraph::nodes)
      .def_readonly("gt_box", &ProposalGraph::gt_box)
      .def_readonly("expr", &ProposalGraph::expr)
      .def_property_readonly("n_tokens",
                             [](const ProposalGraph& g) { return g.text.n_tokens; })
      .def("__len__", [](const ProposalGraph& g) { return g.nodes.size(); });

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("num_classes", &SceneConfig::num_classes)
      .def_readwrite("objects_min", &SceneConfig::objects_min)
      .def_readwrite("objects_max", &SceneConfig::objects_max)
      .def_readwrite("d_obj", &SceneConfig::d_obj)
      .def_readwrite("d_t", &SceneConfig::d_t)
      .def_readwrite("noise_sigma", &SceneConfig::noise_sigma)
      .def_readwrite("seed", &SceneConfig::seed)
      .def_readwrite("first_scene_index", &SceneConfig::first_scene_index);

  m.def("generate", [](SceneConfig cfg, int count) { return generate(std::move(cfg), count); },
        py::arg("config"), py::arg("count"));
  m.def("oracle_referred_index", &oracle_referred_index);
  m.def("top_n", &top_n, py::arg("graph"), py::arg("n"));
  m.def("read_graphs",
        [](const std::string& path) { return read_graphs(std::filesystem::path(path)); });
  m.def("write_graphs", [](const std::vector<ProposalGraph>& graphs, const std::string& path,
                           int d_obj, int d_t) { write_graphs(graphs, path, d_obj, d_t); });

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("mean_iou", &MetricsReport::mean_iou)
      .def_readonly("cmu_iou", &MetricsReport::cmu_iou)
      .def_readonly("n_samples", &MetricsReport::n_samples)
      .def("pr", &MetricsReport::pr, py::arg("tau"))
      .def_property_readonly("pr_at", [](const MetricsReport& r) {
        py::dict d;
        for (const auto& [tau, v] : r.pr_at) d[py::float_(tau)] = v;
        return d;
      });

  m.def("evaluate",
        [](const std::vector<std::pair<BoxCxCyWH, BoxCxCyWH>>& pairs) { return evaluate(pairs); },
        py::arg("pred_gt_pairs"));

  py::class_<GroundingOutput>(m, "GroundingOutput")
      .def_readonly("logits", &GroundingOutput::logits)
      .def_readonly("probs", &GroundingOutput::probs)
      .def_readonly("argmax", &GroundingOutput::argmax)
      .def_readonly("o_ref", &GroundingOutput::o_ref)
      .def_readonly("refined_box", &GroundingOutput::refined_box);

  py::class_<PyModel>(m, "Model")
      .def(py::init<int, int, int, int, int, int, bool, bool, std::uint64_t>(),
           py::arg("d_obj") = 64, py::arg("d_t") = 32, py::arg("branch_heads") = 4,
           py::arg("branch_layers") = 3, py::arg("reasoner_heads") = 4,
           py::arg("reasoner_layers") = 3, py::arg("multi_branch") = true,
           py::arg("pre_norm") = false, py::arg("seed") = 0)
      .def("forward", &PyModel::forward, py::arg("graph"))
      .def("loss", &PyModel::loss, py::arg("graph"), py::arg("lambda_cls") = 100.0,
           py::arg("lambda_giou") = 5.0)
      .def("train", &PyModel::train, py::arg("train_graphs"), py::arg("val_graphs"),
           py::arg("epochs") = 5, py::arg("batch_size") = 8, py::arg("lr") = 1e-4,
           py::arg("patience") = 5, py::arg("top_n") = 32, py::arg("seed") = 0)
      .def("evaluate", &PyModel::evaluate_split, py::arg("graphs"), py::arg("top_n") = 32)
      .def("grad_check_max_err", &PyModel::grad_check_max_err, py::arg("graphs"))
      .def("save", &PyModel::save, py::arg("path"))
      .def("load", &PyModel::load, py::arg("path"))
      .def_property_readonly("n_params", &PyModel::n_params);
}
