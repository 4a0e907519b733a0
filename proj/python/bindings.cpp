#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mobench/agent.hpp"
#include "mobench/bench_runner.hpp"
#include "mobench/errors.hpp"
#include "mobench/metrics.hpp"
#include "mobench/recorder.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace mobench;
using nlohmann::json;

namespace {

// Plain dicts and lists on the Python side.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::handle& o) { return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>()); }

json view_json(const CompressedView& v) {
  json elems = json::array();
  for (const auto& e : v.elements) {
    json j = {{"index", e.index},
              {"label", e.label},
              {"kind", element_kind_name(e.kind)},
              {"bounds", {e.bounds.left, e.bounds.top, e.bounds.right, e.bounds.bottom}},
              {"focused", e.focused}};
    if (e.checked) j["checked"] = *e.checked;
    elems.push_back(std::move(j));
  }
  return {{"text", v.text_rendering}, {"elements", elems}};
}

py::object compress_xml(const std::string& xml, int width, int height) {
  const RawUiTree tree = parse_hierarchy_xml(xml, width, height);
  return to_py(view_json(compress(tree)));
}

std::string canonical_action(const std::string& raw) { return serialize_action(parse_model_action(raw)); }

py::object gesture(const std::vector<std::tuple<std::string, int, int, std::int64_t>>& events, int tap_radius,
                   int long_press_ms) {
  std::vector<TouchEvent> ev;
  for (const auto& [kind, x, y, t] : events) {
    TouchKind k = kind == "down" ? TouchKind::kDown : kind == "up" ? TouchKind::kUp : TouchKind::kMove;
    if (kind != "down" && kind != "up" && kind != "move")
      throw Error(ErrorKind::kBadArgument, "touch kind must be down, move or up");
    ev.push_back({k, x, y, t});
  }
  const Gesture g = classify_gesture(ev, GestureParams{tap_radius, long_press_ms});
  const char* kind = g.kind == GestureKind::kTap ? "tap" : g.kind == GestureKind::kLongPress ? "long_press" : "swipe";
  json j = {{"kind", kind}, {"duration_ms", g.duration_ms}, {"displacement", g.displacement}};
  j["direction"] = g.kind == GestureKind::kSwipe ? json(direction_name(g.direction)) : json();
  return to_py(j);
}

std::string metrics_report(const py::list& results, const std::string& format) {
  std::vector<EvalResult> rs;
  for (const auto& r : results) rs.push_back(EvalResult::from_json(from_py(r)));
  return report(rs, parse_report_format(format));
}

py::object run(const fs::path& suite_dir, const fs::path& output_dir, const std::string& agent, std::uint64_t seed,
               const std::string& mode, int parallelism, bool resume) {
  SuiteConfig cfg;
  cfg.suite_dir = suite_dir;
  cfg.output_dir = output_dir;
  cfg.episode.mode = parse_mode(mode);
  cfg.device.step_interval = 0;
  cfg.parallelism = parallelism;
  cfg.resume = resume;
  std::unique_ptr<LlmClient> llm;
  if (agent == "oracle") llm = std::make_unique<OracleClient>(load_suite_tasks(cfg));
  else if (agent == "random") llm = std::make_unique<RandomClient>(seed);
  else throw Error(ErrorKind::kConfig, "agent must be oracle or random here");
  SuiteRun r;
  {
    py::gil_scoped_release release;
    r = run_suite(cfg, *llm);
  }
  json results = json::array();
  for (const auto& e : r.results) results.push_back(e.to_json());
  return to_py({{"report", report_json(r.report)}, {"results", results}, {"executed", r.executed}, {"skipped", r.skipped}});
}

std::vector<std::string> validate(const fs::path& suite_dir) {
  std::vector<std::string> out;
  for (const auto& d : validate_suite(suite_dir)) out.push_back(format_diagnostic(d));
  return out;
}

py::object export_session(const fs::path& session_dir, const std::string& mode, const fs::path& out_dir) {
  const ExportResult r = export_training_samples(session_dir, parse_export_mode(mode), out_dir);
  json xml = json::array(), som = json::array();
  for (const auto& s : r.xml) xml.push_back(s.to_json());
  for (const auto& s : r.som) som.push_back(s.to_json());
  return to_py({{"xml", xml}, {"som", som}, {"excluded_steps", r.excluded_steps}, {"rejected", r.rejected}});
}

}  // namespace

PYBIND11_MODULE(_mobench, m) {
  m.doc() = "Android GUI-agent benchmark harness";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "MobenchError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(e.what());
      exc.attr("kind") = std::string(error_kind_name(e.kind()));
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.def("compress_xml", &compress_xml, py::arg("xml"), py::arg("width") = 1080, py::arg("height") = 2400,
        "Parse a uiautomator dump and return the compressed view as a dict.");
  m.def("canonical_action", &canonical_action, py::arg("raw"),
        "Parse the first action call in `raw` and return its canonical form.");
  m.def("classify_gesture", &gesture, py::arg("events"), py::arg("tap_radius") = 24, py::arg("long_press_ms") = 600,
        "events: [(kind, x, y, t_ms), ...] with kind in down/move/up.");
  m.def("report", &metrics_report, py::arg("results"), py::arg("format") = "json",
        "Render SR / Sub-SR / RRR / ROR for a list of result dicts.");
  m.def("run_suite", &run, py::arg("suite_dir"), py::arg("output_dir"), py::arg("agent") = "oracle",
        py::arg("seed") = 0, py::arg("mode") = "xml", py::arg("parallelism") = 1, py::arg("resume") = false,
        "Run a sim suite with a built-in agent (oracle or random).");
  m.def("validate_suite", &validate, py::arg("suite_dir"));
  m.def("export_session", &export_session, py::arg("session_dir"), py::arg("mode") = "both",
        py::arg("out_dir") = fs::path(), "Turn one recorded session into training samples.");
}
