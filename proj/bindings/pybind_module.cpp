#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "augairl/eval.hpp"
#include "augairl/expert.hpp"
#include "augairl/reward.hpp"
#include "augairl/sim.hpp"
#include "augairl/train.hpp"

namespace py = pybind11;
using namespace augairl;

PYBIND11_MODULE(_augairl, m) {
  m.doc() = "highway lane-change imitation-learning testbed (C++ core)";

  m.attr("OBS_DIM") = kObsDim;
  m.attr("NUM_ACTIONS") = kNumActions;
  m.attr("DT") = kDt;

  py::class_<TrafficConfig>(m, "TrafficConfig")
      .def(py::init<>())
      .def_readwrite("segment_length", &TrafficConfig::segment_length)
      .def_readwrite("init_speed_min", &TrafficConfig::init_speed_min)
      .def_readwrite("init_speed_max", &TrafficConfig::init_speed_max)
      .def_readwrite("desired_speed_min", &TrafficConfig::desired_speed_min)
      .def_readwrite("desired_speed_max", &TrafficConfig::desired_speed_max)
      .def_readwrite("time_gap_min", &TrafficConfig::time_gap_min)
      .def_readwrite("time_gap_max", &TrafficConfig::time_gap_max)
      .def_readwrite("density_multipliers", &TrafficConfig::density_multipliers)
      .def_readwrite("yield_probability", &TrafficConfig::yield_probability);

  py::class_<WorldState>(m, "WorldState")
      .def_readonly("time_step", &WorldState::time_step)
      .def_readonly("terminated", &WorldState::terminated)
      .def_property_readonly("success",
                             [](const WorldState& w) {
                               return w.termination_reason ==
                                      TerminationReason::success;
                             })
      .def_property_readonly("crashed",
                             [](const WorldState& w) {
                               return w.termination_reason ==
                                      TerminationReason::crash;
                             })
      .def_property_readonly("ego_lat",
                             [](const WorldState& w) { return w.ego.lat_pos; })
      .def_property_readonly("ego_lon",
                             [](const WorldState& w) { return w.ego.lon_pos; })
      .def_readonly("ego_target_lane", &WorldState::ego_target_lane)
      .def("observation", &build_observation)
      .def("serialize", &serialize_world);

  m.def("reset", &reset, py::arg("config"), py::arg("seed"));
  m.def(
      "step",
      [](WorldState& w, int action) {
        const StepResult r = step(w, action);
        return py::make_tuple(r.observation, r.outcome.terminated,
                              py::dict(py::arg("success") = r.outcome.events.success,
                                       py::arg("crash") = r.outcome.events.crash,
                                       py::arg("margin_invasion") =
                                           r.outcome.events.margin_invasion,
                                       py::arg("lateral_move") =
                                           r.outcome.events.lateral_move));
      },
      py::arg("world"), py::arg("action"));

  py::class_<ExpertConfig>(m, "ExpertConfig")
      .def(py::init<>())
      .def_readwrite("jerk_threshold", &ExpertConfig::jerk_threshold)
      .def_readwrite("safety_buffer", &ExpertConfig::safety_buffer)
      .def_readwrite("prediction_horizon", &ExpertConfig::prediction_horizon);

  m.def("expert_action", &expert_action, py::arg("world"),
        py::arg("config") = ExpertConfig{});

  py::class_<DemoDataset>(m, "DemoDataset")
      .def_readonly("count", &DemoDataset::count)
      .def_readonly("seed", &DemoDataset::seed)
      .def_readonly("config_hash", &DemoDataset::config_hash);

  m.def("collect_demos", &collect_demos, py::arg("n_episodes"), py::arg("seed"),
        py::arg("config") = TrafficConfig{},
        py::arg("expert_config") = ExpertConfig{});
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_property(
          "algo",
          [](const TrainConfig& c) { return algo_name(c.algo); },
          [](TrainConfig& c, const std::string& n) { c.algo = algo_from_name(n); })
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("horizon", &TrainConfig::horizon)
      .def_readwrite("demo_path", &TrainConfig::demo_path)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("checkpoint_interval", &TrainConfig::checkpoint_interval)
      .def_readwrite("traffic", &TrainConfig::traffic)
      .def_readwrite("shaping_ablation", &TrainConfig::shaping_ablation);

  m.def(
      "train",
      [](const TrainConfig& cfg, const std::string& out_dir) {
        const auto logs = train(cfg, out_dir);
        py::list rows;
        for (const auto& l : logs)
          rows.append(py::dict(
              py::arg("iteration") = l.iteration,
              py::arg("mean_total_reward") = l.mean_total_reward,
              py::arg("success_ratio") = l.success_ratio,
              py::arg("disc_loss") = l.disc_loss, py::arg("kl_after") = l.kl_after,
              py::arg("entropy") = l.entropy));
        return rows;
      },
      py::arg("config"), py::arg("out_dir"));

  m.def(
      "evaluate_checkpoint",
      [](const std::string& path, int episodes, std::uint64_t seed) {
        const CheckpointReport r = run_eval(load_checkpoint(path), episodes, seed);
        return py::dict(py::arg("episodes") = r.episodes,
                        py::arg("reward_mean") = r.reward_mean,
                        py::arg("reward_std") = r.reward_std,
                        py::arg("success_mean") = r.success_mean,
                        py::arg("decision_mean") = r.decision_mean,
                        py::arg("changing_mean") = r.changing_mean);
      },
      py::arg("path"), py::arg("episodes") = 50, py::arg("seed") = 0);

  m.def(
      "evaluate_expert",
      [](int episodes, std::uint64_t seed) {
        const CheckpointReport r = run_eval(expert_policy(), episodes, seed);
        return py::dict(py::arg("episodes") = r.episodes,
                        py::arg("reward_mean") = r.reward_mean,
                        py::arg("success_mean") = r.success_mean,
                        py::arg("decision_mean") = r.decision_mean,
                        py::arg("changing_mean") = r.changing_mean);
      },
      py::arg("episodes") = 50, py::arg("seed") = 0);

  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("tag"),
        py::arg("index"));

  // discriminator / reward surface for quick numeric checks from python
  m.def("generator_reward_scalar",
        [](double f, double bonus, double log_pi) { return f + bonus - log_pi; });
  m.def("semantic_reward",
        [](const SemanticRewardSpec& spec, bool suc, bool col, bool mgn, bool mov) {
          SemanticEventVector ev;
          ev.indicators = Eigen::Vector4d(suc ? 1 : 0, col ? 1 : 0, mgn ? 1 : 0,
                                          mov ? 1 : 0);
          return semantic_reward(ev, spec);
        });
  py::class_<SemanticRewardSpec>(m, "SemanticRewardSpec")
      .def(py::init<>())
      .def_property_readonly(
          "base_values",
          [](const SemanticRewardSpec& s) { return s.base_values; })
      .def_readwrite("weights", &SemanticRewardSpec::weights);
}
