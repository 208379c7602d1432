#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "taps/assets.hpp"
#include "taps/calls.hpp"
#include "taps/corruption.hpp"
#include "taps/metrics.hpp"
#include "taps/prompt.hpp"
#include "taps/schema.hpp"
#include "taps/tagging.hpp"
#include "taps/uncertainty.hpp"
#include "taps/util.hpp"

namespace py = pybind11;
using namespace taps;

namespace {

GenerationTrace make_trace(const std::string& text,
                           const std::vector<std::vector<std::pair<std::string, double>>>& steps,
                           const std::vector<std::pair<std::string, double>>& candidates) {
  GenerationTrace trace;
  trace.text = text;
  for (const auto& topk : steps) {
    if (topk.empty()) throw Error("each step needs at least one (token, logprob) entry");
    TraceStep step;
    for (const auto& [token, logprob] : topk) step.topk.push_back({token, logprob});
    step.chosen = step.topk.front();
    trace.steps.push_back(std::move(step));
  }
  for (const auto& [t, lp] : candidates) trace.candidates.push_back({t, lp});
  return trace;
}

std::set<CorruptionOp> operators_from_names(const std::vector<std::string>& names) {
  std::set<CorruptionOp> ops;
  for (const auto& name : names) {
    if (name == "slot-deletion") {
      ops.insert(CorruptionOp::SlotDeletion);
    } else if (name == "boundary-shift") {
      ops.insert(CorruptionOp::BoundaryShift);
    } else if (name == "name-substitution") {
      ops.insert(CorruptionOp::NameSubstitution);
    } else {
      throw Error("unknown corruption operator: " + name);
    }
  }
  return ops;
}

}  // namespace

PYBIND11_MODULE(_taps, m) {
  m.doc() = "Core operations of the TAPS harness: schema validation, call parsing, "
            "slot-level metrics, structured tagging, corruption, and uncertainty.";

  py::register_exception<Error>(m, "TapsError");

  py::class_<ApiCall>(m, "ApiCall")
      .def(py::init([](std::string function,
                       std::vector<std::pair<std::string, std::string>> arguments) {
             return ApiCall{std::move(function), std::move(arguments)};
           }),
           py::arg("function"),
           py::arg("arguments") = std::vector<std::pair<std::string, std::string>>{})
      .def_readonly("function", &ApiCall::function)
      .def_readonly("arguments", &ApiCall::arguments)
      .def("__eq__", [](const ApiCall& a, const ApiCall& b) { return a == b; })
      .def("__repr__", [](const ApiCall& c) { return render_call(c); });

  py::class_<SlotTriplet>(m, "SlotTriplet")
      .def_readonly("function", &SlotTriplet::function)
      .def_readonly("argument", &SlotTriplet::argument)
      .def_readonly("value", &SlotTriplet::value)
      .def("__repr__", [](const SlotTriplet& t) {
        return "(" + t.function + ", " + t.argument + ", " + t.value + ")";
      });

  py::class_<ApiSchema>(m, "ApiSchema")
      .def_static("bundled_default", &ApiSchema::bundled_default)
      .def_static("from_file", &ApiSchema::from_file, py::arg("path"))
      .def_static("from_json_text",
                  [](const std::string& text) { return ApiSchema::from_json_text(text); },
                  py::arg("text"))
      .def("function_names",
           [](const ApiSchema& s) {
             std::vector<std::string> names;
             for (const auto& fn : s.functions()) names.push_back(fn.name);
             return names;
           })
      .def("slot_names",
           [](const ApiSchema& s, const std::string& function) {
             const FunctionSpec* fn = s.find_function(function);
             if (!fn) throw Error("unknown function: " + function);
             std::vector<std::string> names;
             for (const auto& slot : fn->slots) names.push_back(slot.name);
             return names;
           },
           py::arg("function"))
      .def("digest", &ApiSchema::digest);

  m.def("validate_call",
        [](const ApiSchema& schema, const ApiCall& call) {
          std::vector<std::pair<std::string, std::string>> out;
          for (const auto& v : validate_call(schema, call)) {
            out.emplace_back(std::string(to_string(v.kind)), v.detail);
          }
          return out;
        },
        py::arg("schema"), py::arg("call"),
        "Schema violations of one call as (category, detail) pairs; empty means valid.");

  m.def("parse_calls",
        [](const std::string& text) {
          ParseReport report = parse_calls(text);
          std::vector<std::pair<std::string, std::string>> discarded;
          for (const auto& span : report.discarded_spans) {
            discarded.emplace_back(span.text, span.reason);
          }
          return py::make_tuple(report.calls, discarded);
        },
        py::arg("text"),
        "Extract API calls from model output; returns (calls, discarded_spans).");
  m.def("render_call", &render_call, py::arg("call"));
  m.def("to_triplets", &to_triplets, py::arg("calls"));

  py::class_<InstanceScore>(m, "InstanceScore")
      .def_readonly("exact_match", &InstanceScore::exact_match)
      .def_readonly("precision", &InstanceScore::precision)
      .def_readonly("recall", &InstanceScore::recall)
      .def_readonly("f1", &InstanceScore::f1)
      .def("__repr__", [](const InstanceScore& s) {
        return "InstanceScore(em=" + std::to_string(s.exact_match) +
               ", f1=" + std::to_string(s.f1) + ")";
      });

  m.def("score_instance",
        [](const std::vector<ApiCall>& pred, const std::vector<ApiCall>& gold, bool set_mode) {
          return score_instance(pred, gold, ScoreOptions{set_mode});
        },
        py::arg("pred"), py::arg("gold"), py::arg("set_mode") = false);

  m.def("win_same_loss",
        [](const std::vector<double>& base, const std::vector<double>& fresh, double tol) {
          WinSameLoss r = win_same_loss(base, fresh, tol);
          return py::make_tuple(r.win, r.same, r.loss);
        },
        py::arg("base_f1"), py::arg("new_f1"), py::arg("tolerance") = 0.0);

  m.def("pearson",
        [](const std::vector<double>& xs, const std::vector<double>& ys) {
          PearsonResult r = pearson(xs, ys);
          return py::make_tuple(r.r, r.p);
        },
        py::arg("xs"), py::arg("ys"), "Sample Pearson r with a two-sided p value.");

  py::class_<TokenRange>(m, "TokenRange")
      .def_readonly("begin", &TokenRange::begin)
      .def_readonly("end", &TokenRange::end);
  py::class_<SlotSpan>(m, "SlotSpan")
      .def_readonly("slot", &SlotSpan::slot)
      .def_readonly("range", &SlotSpan::range);
  py::class_<ActionSpan>(m, "ActionSpan")
      .def_readonly("api", &ActionSpan::api)
      .def_readonly("range", &ActionSpan::range)
      .def_readonly("slots", &ActionSpan::slots);
  py::class_<TaggedInstruction>(m, "TaggedInstruction")
      .def_readonly("tokens", &TaggedInstruction::tokens)
      .def_readonly("actions", &TaggedInstruction::actions)
      .def("__eq__",
           [](const TaggedInstruction& a, const TaggedInstruction& b) { return a == b; })
      .def("__repr__", [](const TaggedInstruction& t) { return render_tagged(t); });

  m.def("parse_tagged",
        [](const std::string& text) { return parse_tagged_or_throw(text); },
        py::arg("text"),
        "Parse a tagged instruction; raises TapsError listing the violations when malformed.");
  m.def("tag_violations",
        [](const std::string& text) {
          std::vector<std::pair<std::string, std::string>> out;
          TagParseResult result = parse_tagged(text);
          if (auto* violations = std::get_if<std::vector<TagViolation>>(&result)) {
            for (const auto& v : *violations) {
              out.emplace_back(std::string(to_string(v.kind)), v.detail);
            }
          }
          return out;
        },
        py::arg("text"), "Parse violations of a tagged instruction; empty when it parses.");
  m.def("render_tagged", &render_tagged, py::arg("tagged"));
  m.def("strip_tags", [](const std::string& text) { return strip_tags(text); },
        py::arg("text"));
  m.def("canonicalize_names", &canonicalize_names, py::arg("tagged"), py::arg("schema"));
  m.def("validate_tags",
        [](const TaggedInstruction& t, const ApiSchema& schema) {
          std::vector<std::pair<std::string, std::string>> out;
          for (const auto& v : validate_tags(t, schema)) {
            out.emplace_back(std::string(to_string(v.kind)), v.detail);
          }
          return out;
        },
        py::arg("tagged"), py::arg("schema"));
  m.def("triplets_from_tags", &triplets_from_tags, py::arg("tagged"));
  m.def("calls_from_tags", &calls_from_tags, py::arg("tags"), py::arg("schema"));
  m.def("tagging_metrics",
        [](const std::vector<TaggedInstruction>& pred,
           const std::vector<TaggedInstruction>& gold) {
          TaggingScores s = tagging_metrics(pred, gold);
          return py::make_tuple(s.precision, s.recall, s.f1);
        },
        py::arg("pred"), py::arg("gold"),
        "Macro-averaged token-classification (precision, recall, f1) in percent.");

  m.def("corrupt",
        [](const std::vector<TaggedInstruction>& tags, const ApiSchema& schema, int rate,
           std::uint64_t seed, const std::vector<std::string>& operators,
           std::size_t shift_magnitude) {
          CorruptionConfig cfg;
          cfg.rate = rate;
          cfg.seed = seed;
          if (!operators.empty()) cfg.operators = operators_from_names(operators);
          cfg.shift_magnitude = shift_magnitude;
          CorruptionOutcome outcome = corrupt(tags, schema, cfg);
          py::dict stats;
          stats["units"] = outcome.units;
          stats["selected"] = outcome.selected;
          stats["corrupted"] = outcome.corrupted;
          stats["skipped"] = outcome.skipped;
          stats["deletions"] = outcome.deletions;
          stats["shifts"] = outcome.shifts;
          stats["substitutions"] = outcome.substitutions;
          return py::make_tuple(outcome.tags, stats);
        },
        py::arg("tags"), py::arg("schema"), py::arg("rate"), py::arg("seed") = 0,
        py::arg("operators") = std::vector<std::string>{}, py::arg("shift_magnitude") = 1,
        "Perturb tag spans at the given rate; returns (tags, stats).");

  py::class_<GenerationTrace>(m, "GenerationTrace")
      .def_readonly("text", &GenerationTrace::text);
  m.def("make_trace", &make_trace, py::arg("text"), py::arg("steps"),
        py::arg("candidates") = std::vector<std::pair<std::string, double>>{},
        "Build a trace from per-step top-k (token, logprob) lists sorted descending.");
  m.def("least_confidence",
        [](const GenerationTrace& trace, bool arithmetic) {
          return least_confidence(trace, arithmetic ? ConfidenceAggregation::ArithmeticMean
                                                    : ConfidenceAggregation::GeometricMean);
        },
        py::arg("trace"), py::arg("arithmetic") = false);
  m.def("margin_at_t", &margin_at_t, py::arg("trace"), py::arg("t"));
  m.def("sequence_margin", &sequence_margin, py::arg("trace"));

  m.def("select_threshold",
        [](const std::vector<double>& scores, const std::vector<double>& base_f1,
           const std::vector<double>& regen_f1, const std::vector<double>& grid) {
          ThresholdChoice choice = grid.empty()
                                       ? select_threshold(scores, base_f1, regen_f1)
                                       : select_threshold(scores, base_f1, regen_f1, grid);
          return py::make_tuple(choice.threshold.value, choice.objective);
        },
        py::arg("scores"), py::arg("base_f1"), py::arg("regen_f1"),
        py::arg("grid") = std::vector<double>{},
        "Pick the tool-use threshold maximizing mean F1; returns (tau, objective).");

  m.def("build_prompt",
        [](const std::string& template_id, const ApiSchema& schema,
           const std::map<std::string, py::object>& query,
           const std::vector<std::map<std::string, py::object>>& demos,
           const std::string& model_name, const std::string& split) {
          auto to_vars = [](const std::map<std::string, py::object>& fields) {
            PromptVars vars;
            for (const auto& [name, value] : fields) {
              if (py::isinstance<py::str>(value)) {
                vars[name] = value.cast<std::string>();
              } else {
                vars[name] = value.cast<std::vector<std::string>>();
              }
            }
            return vars;
          };
          DemoSet demo_set;
          for (const auto& demo : demos) demo_set.demos.push_back({to_vars(demo), "labeled"});
          return build_prompt(PromptTemplate::bundled(template_id), schema, to_vars(query),
                              demo_set, RenderContext{model_name, split});
        },
        py::arg("template_id"), py::arg("schema"), py::arg("query"),
        py::arg("demos") = std::vector<std::map<std::string, py::object>>{},
        py::arg("model_name") = "other", py::arg("split") = "test");

  m.def("prompt_template_ids", [] {
    std::vector<std::string> ids;
    for (auto id : assets::prompt_template_ids()) ids.emplace_back(id);
    return ids;
  });
}
