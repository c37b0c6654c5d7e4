#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>

#include "vilas/clock.hpp"
#include "vilas/devices/services.hpp"
#include "vilas/eval/harness.hpp"
#include "vilas/eval/metrics.hpp"
#include "vilas/policyd/server.hpp"
#include "vilas/recorder/episode.hpp"
#include "vilas/sim/kinematics.hpp"
#include "vilas/transport/frame.hpp"

namespace py = pybind11;
using namespace vilas;

// Structured results cross the boundary as JSON text; the Python side
// turns them into dicts.

namespace {

std::string records_rates(const std::vector<std::vector<bool>>& outcomes, const std::vector<bool>& aborted,
                          bool any2) {
  std::vector<eval::TrialRecord> records;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    eval::TrialRecord r;
    r.trial_id = static_cast<int>(i);
    r.attempt_outcomes = outcomes[i];
    r.grasp_count = static_cast<int>(std::count(outcomes[i].begin(), outcomes[i].end(), true));
    r.aborted = i < aborted.size() && aborted[i];
    records.push_back(std::move(r));
  }
  return eval::to_json(eval::success_rates(records, any2)).dump();
}

std::string load_episode_json(const std::string& path, bool check_images) {
  const auto ep = recorder::load_episode(path, check_images);
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : ep.frames) frames.push_back(nlohmann::json::parse(recorder::frame_line(f)));
  return nlohmann::json{{"path", ep.dir.string()}, {"meta", ep.meta}, {"frames", frames}}.dump();
}

std::string verify_corpus_json(const std::string& root) {
  const auto r = recorder::verify_corpus(root);
  return nlohmann::json{{"episodes", r.episodes}, {"frames", r.frames}, {"errors", r.errors}, {"seconds", r.seconds}}
      .dump();
}

std::string run_trial_json(const std::string& policy, std::uint64_t seed, const std::string& protocol, int horizon,
                           int n_objects, int attempts, double latency_mean, double latency_std) {
  eval::EvalConfig cfg;
  cfg.policy = policyd::PolicySpec::parse(policy);
  cfg.base_seed = seed;
  cfg.protocol = broker::parse_protocol(protocol);
  cfg.horizon = horizon;
  cfg.n_objects = n_objects;
  cfg.attempts = attempts;
  cfg.latency = {latency_mean, latency_std, seed};
  std::vector<double> lat;
  const auto rec = eval::run_trial(cfg, 0, &lat);
  auto j = eval::to_json(rec);
  j["latencies_ms"] = lat;
  return j.dump();
}

// Device services and a policy server on the wall clock, all on ephemeral
// local ports.
class Stack {
 public:
  Stack(const std::string& policy, std::uint64_t seed, int n_objects, int horizon, double latency_mean,
        double latency_std)
      : devices_(sim::SimConfig{}, clock_, seed, n_objects, devices::DeviceHost::Ports::ephemeral()) {
    policyd::ServerOptions so;
    so.spec = policyd::PolicySpec::parse(policy);
    so.horizon = horizon;
    so.latency = {latency_mean, latency_std, seed};
    so.seed = seed;
    so.mq_bind = transport::Address{"127.0.0.1", 0};
    so.ws_bind = transport::Address{"127.0.0.1", 0};
    so.world = [this] { return devices_.sim().snapshot(); };
    server_ = std::make_unique<policyd::PolicyServer>(clock_, so);
  }

  std::string arm() const { return devices_.arm_address().str(); }
  std::string gripper() const { return devices_.gripper_address().str(); }
  std::string camera() const { return devices_.camera_address().str(); }
  std::string mq() const { return server_->mq_address()->str(); }
  std::string ws() const { return "ws://" + server_->ws_address()->str(); }
  std::vector<double> injected_ms() const { return server_->injected_ms(); }

  void close() {
    if (server_) server_->stop();
    devices_.stop();
  }

 private:
  RealClock clock_;
  devices::DeviceHost devices_;
  std::unique_ptr<policyd::PolicyServer> server_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "vilas core bindings";

  py::register_exception<Error>(m, "VilasError", PyExc_RuntimeError);

  m.def("encode_frame", [](py::bytes payload) { return py::bytes(transport::encode_frame(std::string(payload))); },
        "4-byte big-endian length prefix followed by the payload");
  m.def("canonical_envelope",
        [](const std::string& text) { return transport::serialize(transport::parse_envelope(text)); },
        "Re-serializes an envelope in the compact sorted-key wire form");

  py::class_<transport::FrameDecoder>(m, "FrameDecoder")
      .def(py::init<>())
      .def("feed", [](transport::FrameDecoder& d, py::bytes b) { d.feed(std::string(b)); })
      .def("next_payload",
           [](transport::FrameDecoder& d) -> py::object {
             if (auto p = d.next_payload()) return py::bytes(*p);
             return py::none();
           })
      .def_property_readonly("buffered", &transport::FrameDecoder::buffered);

  m.def("latency_stats_json",
        [](std::vector<double> samples, int horizon) {
          return eval::to_json(eval::latency_stats(std::move(samples), horizon)).dump();
        },
        py::arg("samples_ms"), py::arg("horizon"));
  m.def("display_round", &eval::display_round);
  m.def("format_ms", &eval::format_ms);
  m.def("multi_success", &eval::multi_success, py::arg("outcomes"), py::arg("any2") = false);
  m.def("success_rates_json", &records_rates, py::arg("outcomes"), py::arg("aborted") = std::vector<bool>{},
        py::arg("any2") = false);

  m.def("forward_kinematics", [](const sim::JointVector& q) {
    const auto p = sim::forward_kinematics(sim::ArmModel{}, q);
    return py::make_tuple(p.position.x, p.position.y, p.position.z, p.yaw);
  });

  m.def("load_episode_json", &load_episode_json, py::arg("path"), py::arg("check_images") = true);
  m.def("verify_corpus_json", &verify_corpus_json, py::arg("root"));
  m.def(
      "export_dataset",
      [](const std::vector<std::string>& episodes, const std::string& out, const std::string& schema,
         bool allow_mixed) {
        std::vector<std::filesystem::path> eps(episodes.begin(), episodes.end());
        const auto r = recorder::export_dataset(eps, out, recorder::parse_schema(schema), allow_mixed);
        std::vector<std::string> outs;
        for (const auto& p : r.outputs) outs.push_back(p.string());
        return outs;
      },
      py::arg("episodes"), py::arg("out"), py::arg("schema") = "table", py::arg("allow_mixed") = false);

  m.def("run_trial_json", &run_trial_json, py::arg("policy") = "oracle", py::arg("seed") = 7,
        py::arg("protocol") = "ws", py::arg("horizon") = 50, py::arg("n_objects") = 10, py::arg("attempts") = 3,
        py::arg("latency_mean") = 0.0, py::arg("latency_std") = 0.0, py::call_guard<py::gil_scoped_release>());

  py::class_<Stack>(m, "Stack")
      .def(py::init<const std::string&, std::uint64_t, int, int, double, double>(), py::arg("policy") = "zeros",
           py::arg("seed") = 0, py::arg("n_objects") = 10, py::arg("horizon") = 50, py::arg("latency_mean") = 0.0,
           py::arg("latency_std") = 0.0)
      .def_property_readonly("arm", &Stack::arm)
      .def_property_readonly("gripper", &Stack::gripper)
      .def_property_readonly("camera", &Stack::camera)
      .def_property_readonly("mq", &Stack::mq)
      .def_property_readonly("ws", &Stack::ws)
      .def("injected_ms", &Stack::injected_ms)
      .def("close", &Stack::close, py::call_guard<py::gil_scoped_release>());
}
