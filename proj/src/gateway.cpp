#include "taps/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "taps/calls.hpp"
#include "taps/metrics.hpp"
#include "taps/util.hpp"

namespace taps {

namespace {

using nlohmann::json;

json generation_to_json(const GenerationParams& g) {
  return json{{"candidate_count", g.candidate_count}, {"temperature", g.temperature},
              {"top_k", g.top_k},                     {"top_p", g.top_p},
              {"sample", g.sample}};
}

GenerationParams generation_from_json(const json& j) {
  GenerationParams g;
  g.candidate_count = j.value("candidate_count", 1);
  g.temperature = j.value("temperature", 0.0);
  g.top_k = j.value("top_k", 0);
  g.top_p = j.value("top_p", 1.0);
  g.sample = j.value("sample", false);
  return g;
}

}  // namespace

ModelConfig ModelConfig::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model config: ") + e.what());
  }
  ModelConfig cfg;
  cfg.kind = j.value("kind", "stub");
  if (cfg.kind != "stub" && cfg.kind != "remote") {
    throw Error("model config kind must be stub or remote, got " + cfg.kind);
  }
  if (j.contains("stub")) {
    const json& s = j.at("stub");
    cfg.stub.confidence = s.value("confidence", 1.0);
    cfg.stub.error_mode = s.value("error_mode", "none");
    cfg.stub.error_rate = s.value("error_rate", 0.0);
    if (s.contains("candidate_gap")) cfg.stub.candidate_gap = s.at("candidate_gap").get<double>();
    if (s.contains("answers")) {
      for (const auto& [key, value] : s.at("answers").items()) {
        cfg.stub.answers[key] = value.get<std::vector<std::string>>();
      }
    }
    if (s.contains("tags")) {
      for (const auto& [key, value] : s.at("tags").items()) {
        cfg.stub.tags[key] = value.get<std::string>();
      }
    }
  }
  if (j.contains("remote")) {
    const json& r = j.at("remote");
    cfg.remote.endpoint = r.value("endpoint", "");
    cfg.remote.model = r.value("model", "");
    cfg.remote.api_key_env = r.value("api_key_env", "TAPS_API_KEY");
  }
  if (j.contains("generation")) cfg.generation = generation_from_json(j.at("generation"));
  cfg.topk_logprobs = j.value("topk_logprobs", 5);
  cfg.timeout_ms = j.value("timeout_ms", 120000);
  if (j.contains("retry")) {
    cfg.retry.max_attempts = j.at("retry").value("max_attempts", 3);
    cfg.retry.backoff_ms = j.at("retry").value("backoff_ms", 250);
  }
  cfg.model_name = j.value("model_name", "other");
  return cfg;
}

std::string ModelConfig::to_json() const {
  json j;
  j["kind"] = kind;
  json s;
  s["confidence"] = stub.confidence;
  s["error_mode"] = stub.error_mode;
  s["error_rate"] = stub.error_rate;
  if (stub.candidate_gap) s["candidate_gap"] = *stub.candidate_gap;
  if (!stub.answers.empty()) s["answers"] = stub.answers;
  if (!stub.tags.empty()) s["tags"] = stub.tags;
  j["stub"] = s;
  if (!remote.endpoint.empty() || kind == "remote") {
    j["remote"] = json{{"endpoint", remote.endpoint},
                       {"model", remote.model},
                       {"api_key_env", remote.api_key_env}};
  }
  j["generation"] = generation_to_json(generation);
  j["topk_logprobs"] = topk_logprobs;
  j["timeout_ms"] = timeout_ms;
  j["retry"] = json{{"max_attempts", retry.max_attempts}, {"backoff_ms", retry.backoff_ms}};
  j["model_name"] = model_name;
  return j.dump(2);
}

std::string trace_to_json(const GenerationTrace& trace) {
  json steps = json::array();
  for (const auto& step : trace.steps) {
    json topk = json::array();
    for (const auto& alt : step.topk) topk.push_back(json::array({alt.token, alt.logprob}));
    steps.push_back(json{{"chosen", json::array({step.chosen.token, step.chosen.logprob})},
                         {"topk", topk}});
  }
  json candidates = json::array();
  for (const auto& c : trace.candidates) {
    candidates.push_back(json::array({c.text, c.sequence_logprob}));
  }
  return json{{"text", trace.text}, {"steps", steps}, {"candidates", candidates}}.dump();
}

GenerationTrace trace_from_json(std::string_view text) {
  json j = json::parse(text);
  GenerationTrace trace;
  trace.text = j.at("text").get<std::string>();
  for (const auto& step_json : j.at("steps")) {
    TraceStep step;
    step.chosen = {step_json.at("chosen").at(0).get<std::string>(),
                   step_json.at("chosen").at(1).get<double>()};
    for (const auto& alt : step_json.at("topk")) {
      step.topk.push_back({alt.at(0).get<std::string>(), alt.at(1).get<double>()});
    }
    trace.steps.push_back(std::move(step));
  }
  for (const auto& c : j.at("candidates")) {
    trace.candidates.push_back({c.at(0).get<std::string>(), c.at(1).get<double>()});
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Stub backend

namespace {

// Fields of the trailing query block of an assembled prompt.
struct QueryBlock {
  std::string utterance;
  std::vector<std::string> instructions;
  std::vector<std::string> tagged;
  bool has_tagged_section = false;
  bool ends_at_tagged_header = false;  // joint-style query
  std::string last_nonempty_line;
};

QueryBlock parse_query_block(const std::string& prompt) {
  QueryBlock q;
  std::vector<std::string> lines = split_lines(prompt);

  std::size_t dialogue_at = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == "Dialogue:") dialogue_at = i;
    if (!trim(lines[i]).empty()) q.last_nonempty_line = trim(lines[i]);
  }
  if (dialogue_at == lines.size()) return q;

  std::size_t i = dialogue_at + 1;
  std::vector<std::string> utterance_lines;
  while (i < lines.size() && !trim(lines[i]).empty() &&
         trim(lines[i]) != "Applicable Standing Instructions:") {
    utterance_lines.push_back(lines[i]);
    ++i;
  }
  q.utterance = join(utterance_lines, "\n");

  auto read_prefixed_list = [&](std::vector<std::string>& out) {
    while (i < lines.size()) {
      std::string line = lines[i];
      if (line.rfind("> ", 0) == 0) {
        out.push_back(line.substr(2));
        ++i;
      } else if (trim(line) == ">") {
        out.push_back("");
        ++i;
      } else {
        break;
      }
    }
  };

  while (i < lines.size()) {
    std::string line = trim(lines[i]);
    if (line == "Applicable Standing Instructions:") {
      ++i;
      read_prefixed_list(q.instructions);
      continue;
    }
    if (line == "Tagged Applicable Standing Instructions:") {
      q.has_tagged_section = true;
      q.ends_at_tagged_header = (i + 1 == lines.size());
      ++i;
      read_prefixed_list(q.tagged);
      continue;
    }
    ++i;
  }
  return q;
}

class StubBackend : public Backend {
 public:
  StubBackend(ModelConfig cfg, const ApiSchema& schema)
      : cfg_(std::move(cfg)), schema_(schema) {
    id_ = "stub:" + sha256_hex(cfg_.to_json()).substr(0, 16);
  }

  std::string id() const override { return id_; }

  Capabilities capabilities() const override {
    return {true, cfg_.generation.candidate_count >= 2};
  }

  GenerationTrace complete(const std::string& prompt) override {
    return synthesize(respond(prompt));
  }

 private:
  std::string respond(const std::string& prompt) const {
    if (prompt.find("sentence tagging model") != std::string::npos) {
      return respond_tagger(prompt);
    }
    QueryBlock q = parse_query_block(prompt);
    if (q.ends_at_tagged_header) return respond_joint(q);
    if (q.has_tagged_section && !q.tagged.empty()) return answer_from_tags(q.tagged);
    return answer_default(q);
  }

  std::string respond_tagger(const std::string& prompt) const {
    QueryBlock q = parse_query_block(prompt);
    const std::string& instruction = q.last_nonempty_line;
    auto it = cfg_.stub.tags.find(instruction);
    if (it != cfg_.stub.tags.end()) return it->second;
    return instruction;  // untagged echo
  }

  std::string respond_joint(const QueryBlock& q) const {
    std::vector<std::string> tagged;
    for (const auto& instruction : q.instructions) {
      auto it = cfg_.stub.tags.find(instruction);
      tagged.push_back(it != cfg_.stub.tags.end() ? it->second : instruction);
    }
    std::string out;
    if (!tagged.empty()) out = "> " + join(tagged, "\n> ");
    out += "\n\nAPI Calls:\n";
    out += answer_from_tags(tagged);
    return out;
  }

  std::string answer_from_tags(const std::vector<std::string>& tagged) const {
    std::vector<TaggedInstruction> parsed;
    for (const auto& line : tagged) {
      TagParseResult result = parse_tagged(line);
      if (auto* t = std::get_if<TaggedInstruction>(&result)) parsed.push_back(std::move(*t));
    }
    return render_calls(calls_from_tags(parsed, schema_));
  }

  std::string answer_default(const QueryBlock& q) const {
    std::vector<ApiCall> calls;
    auto it = cfg_.stub.answers.find(q.utterance);
    if (it != cfg_.stub.answers.end()) {
      for (const auto& text : it->second) {
        ParseReport report = parse_calls(text);
        for (auto& call : report.calls) calls.push_back(std::move(call));
      }
    } else {
      calls = keyword_calls(q);
    }
    maybe_corrupt(q.utterance, calls);
    return render_calls(calls);
  }

  // Keyword fallback: any schema domain mentioned in the utterance or the
  // instructions yields a bare call for that domain.
  std::vector<ApiCall> keyword_calls(const QueryBlock& q) const {
    std::string haystack = to_lower(q.utterance + " " + join(q.instructions, " "));
    std::vector<ApiCall> calls;
    for (const auto& fn : schema_.functions()) {
      if (haystack.find(to_lower(fn.domain())) != std::string::npos) {
        calls.push_back(ApiCall{fn.name, {}});
      }
    }
    return calls;
  }

  void maybe_corrupt(const std::string& utterance, std::vector<ApiCall>& calls) const {
    if (cfg_.stub.error_mode == "none" || cfg_.stub.error_rate <= 0.0 || calls.empty()) return;
    double roll = static_cast<double>(fnv1a64(utterance) % 10000) / 10000.0;
    if (roll >= cfg_.stub.error_rate) return;

    if (cfg_.stub.error_mode == "drop-argument") {
      for (auto& call : calls) {
        if (!call.arguments.empty()) {
          call.arguments.pop_back();
          return;
        }
      }
    } else if (cfg_.stub.error_mode == "rename-slot") {
      for (auto& call : calls) {
        if (call.arguments.empty()) continue;
        const FunctionSpec* fn = schema_.find_function(call.function);
        std::string& name = call.arguments.front().first;
        if (fn) {
          for (const auto& slot : fn->slots) {
            bool used = false;
            for (const auto& [arg, _] : call.arguments) used = used || iequals(arg, slot.name);
            if (!used) {
              name = slot.name;
              return;
            }
          }
        }
        name += "_x";
        return;
      }
    } else if (cfg_.stub.error_mode == "hallucinate-function") {
      calls.push_back(ApiCall{"GetAttractions", {{"city", "?"}}});
    }
  }

  GenerationTrace synthesize(const std::string& text) const {
    GenerationTrace trace;
    trace.text = text;
    double c = std::clamp(cfg_.stub.confidence, 1e-9, 1.0);
    std::vector<std::string> tokens = split_ws(text);
    if (tokens.empty()) tokens.push_back("<empty>");

    int k = std::max(2, cfg_.topk_logprobs);
    double runner_up = std::min(c, (1.0 - c) / 2.0);
    if (runner_up <= 0.0) runner_up = 1e-12;
    for (const auto& token : tokens) {
      TraceStep step;
      step.chosen = {token, std::log(c)};
      step.topk.push_back(step.chosen);
      double p = runner_up;
      for (int alt = 1; alt < k; ++alt) {
        step.topk.push_back({"<alt" + std::to_string(alt) + ">", std::log(p)});
        p /= 2.0;
      }
      trace.steps.push_back(std::move(step));
    }

    if (cfg_.generation.candidate_count >= 2) {
      double q2 = cfg_.stub.candidate_gap ? std::max(1e-12, c - *cfg_.stub.candidate_gap)
                                          : c / 2.0;
      trace.candidates.push_back({text, std::log(c)});
      trace.candidates.push_back({text + " <alt>", std::log(q2)});
    }
    return trace;
  }

  ModelConfig cfg_;
  const ApiSchema& schema_;
  std::string id_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Remote backend (chat-completions protocol with token logprobs)

namespace detail {
GenerationTrace parse_chat_completion(const std::string& body, bool require_logprobs);
}

// Defined in gateway_http.cpp so the HTTP dependency stays in one place.
std::unique_ptr<Backend> make_remote_backend(const ModelConfig& cfg);

std::unique_ptr<Backend> make_backend(const ModelConfig& cfg, const ApiSchema& schema) {
  if (cfg.kind == "stub") return std::make_unique<StubBackend>(cfg, schema);
  if (cfg.kind == "remote") return make_remote_backend(cfg);
  throw Error("unknown backend kind: " + cfg.kind);
}

GenerationTrace detail::parse_chat_completion(const std::string& body, bool require_logprobs) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed backend response: ") + e.what());
  }
  if (!j.contains("choices") || j.at("choices").empty()) {
    throw Error("backend response has no choices: " + body.substr(0, 200));
  }

  GenerationTrace trace;
  bool first = true;
  for (const auto& choice : j.at("choices")) {
    std::string text;
    if (choice.contains("message")) {
      text = choice.at("message").value("content", "");
    } else {
      text = choice.value("text", "");
    }
    double seq_logprob = 0.0;
    bool has_logprobs = choice.contains("logprobs") && !choice.at("logprobs").is_null() &&
                        choice.at("logprobs").contains("content");
    if (has_logprobs) {
      for (const auto& tok : choice.at("logprobs").at("content")) {
        double lp = tok.at("logprob").get<double>();
        seq_logprob += lp;
        if (!first) continue;
        TraceStep step;
        step.chosen = {tok.at("token").get<std::string>(), lp};
        if (tok.contains("top_logprobs")) {
          for (const auto& alt : tok.at("top_logprobs")) {
            step.topk.push_back(
                {alt.at("token").get<std::string>(), alt.at("logprob").get<double>()});
          }
        }
        std::sort(step.topk.begin(), step.topk.end(),
                  [](const TokenAlt& a, const TokenAlt& b) { return a.logprob > b.logprob; });
        bool chosen_present = false;
        for (const auto& alt : step.topk) {
          if (alt.token == step.chosen.token && alt.logprob == step.chosen.logprob) {
            chosen_present = true;
            break;
          }
        }
        if (!chosen_present) {
          step.topk.push_back(step.chosen);
          std::sort(step.topk.begin(), step.topk.end(),
                    [](const TokenAlt& a, const TokenAlt& b) { return a.logprob > b.logprob; });
        }
        trace.steps.push_back(std::move(step));
      }
    }
    if (first) trace.text = text;
    trace.candidates.push_back({text, has_logprobs ? seq_logprob : 0.0});
    first = false;
  }
  if (trace.candidates.size() < 2) trace.candidates.clear();
  std::stable_sort(
      trace.candidates.begin(), trace.candidates.end(),
      [](const SequenceCandidate& a, const SequenceCandidate& b) {
        return a.sequence_logprob > b.sequence_logprob;
      });
  if (require_logprobs && trace.steps.empty()) {
    throw Error("backend returned no token logprobs; uncertainty estimators are unavailable "
                "for this endpoint");
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Cache and gateway

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<GenerationTrace> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::filesystem::path path = std::filesystem::path(dir_) / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  return trace_from_json(read_file(path.string()));
}

void ResponseCache::store(const std::string& key, const GenerationTrace& trace) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::filesystem::path path = std::filesystem::path(dir_) / (key + ".json");
  write_file(path.string(), trace_to_json(trace));
}

Gateway::Gateway(ModelConfig cfg, const ApiSchema& schema, std::optional<std::string> cache_dir)
    : cfg_(std::move(cfg)), backend_(make_backend(cfg_, schema)) {
  if (cache_dir) cache_ = std::make_unique<ResponseCache>(*cache_dir);
  params_digest_ = sha256_hex(generation_to_json(cfg_.generation).dump() + "|" +
                              std::to_string(cfg_.topk_logprobs));
}

GenerationTrace Gateway::complete(const std::string& prompt) {
  if (prompt.empty()) throw Error("complete: empty prompt");
  std::string key;
  if (cache_) {
    key = sha256_hex(backend_->id() + "\x1f" + params_digest_ + "\x1f" + prompt);
    if (auto cached = cache_->lookup(key)) return *cached;
  }
  GenerationTrace trace = backend_->complete(prompt);
  if (cache_) cache_->store(key, trace);
  return trace;
}

// ---------------------------------------------------------------------------
// Tagging through the model

DemoSet default_tagger_demos() {
  DemoSet demos;
  Demo demo;
  demo.fields["instruction"] = std::string("Request Alaska Airlines when booking flights.");
  demo.fields["tagged_instruction"] = std::string(
      "<a:GetFlights> Request <sl:airlines> Alaska Airlines </sl> when booking flights. </a>");
  demo.provenance = "labeled";
  demos.demos.push_back(std::move(demo));
  return demos;
}

namespace {

struct TagAttempt {
  std::optional<TaggedInstruction> tagged;
  std::string problems;
};

TagAttempt try_parse_model_tags(const std::string& raw, const std::string& instruction,
                                const ApiSchema& schema) {
  TagAttempt attempt;
  TagParseResult result = parse_tagged(trim(raw));
  if (auto* violations = std::get_if<std::vector<TagViolation>>(&result)) {
    for (const auto& v : *violations) {
      attempt.problems += std::string(to_string(v.kind)) + ": " + v.detail + "; ";
    }
    return attempt;
  }
  TaggedInstruction tagged = canonicalize_names(std::get<TaggedInstruction>(result), schema);
  if (tagged.tokens != split_ws(instruction)) {
    attempt.problems = std::string(to_string(TagViolationKind::TokenMismatch)) +
                       ": output tokens differ from the original sentence";
    return attempt;
  }
  attempt.tagged = std::move(tagged);
  return attempt;
}

}  // namespace

ModelTags tag_with_model(Gateway& gateway, const std::vector<std::string>& instructions,
                         const ApiSchema& schema, const PromptTemplate& tagger_template,
                         const DemoSet& demos, const RenderContext& ctx) {
  ModelTags out;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    const std::string& instruction = instructions[i];
    PromptVars vars;
    vars["instruction"] = instruction;
    std::string prompt = build_prompt(tagger_template, schema, vars, demos, ctx);

    GenerationTrace trace = gateway.complete(prompt);
    TagAttempt attempt = try_parse_model_tags(trace.text, instruction, schema);
    if (!attempt.tagged) {
      std::string retry_prompt = prompt + "\n" + trim(trace.text) +
                                 "\n\nThe tagged sentence above is invalid (" +
                                 attempt.problems +
                                 "). Rewrite it so every tag is balanced, nested correctly, "
                                 "and the original tokens are unchanged:";
      GenerationTrace retry = gateway.complete(retry_prompt);
      attempt = try_parse_model_tags(retry.text, instruction, schema);
    }
    if (attempt.tagged) {
      out.tags.push_back(std::move(*attempt.tagged));
    } else {
      TaggedInstruction untagged;
      untagged.tokens = split_ws(instruction);
      out.tags.push_back(std::move(untagged));
      out.failures.push_back({i, attempt.problems});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Demonstration bootstrapping

std::string render_dialogue(const Instance& instance) {
  std::vector<std::string> lines;
  for (const auto& turn : instance.dialogue) lines.push_back(turn.speaker + ": " + turn.text);
  return join(lines, "\n");
}

PromptVars instance_prompt_vars(const Instance& instance) {
  PromptVars vars;
  vars["user_utterance"] = render_dialogue(instance);
  vars["applicable_instructions"] = instance.applicable_instructions;
  return vars;
}

Demo demo_from_instance(const Instance& instance, std::string provenance) {
  Demo demo;
  demo.fields = instance_prompt_vars(instance);
  std::vector<std::string> targets;
  for (const auto& call : instance.gold_calls) targets.push_back(render_call(call));
  demo.fields["target_api_calls"] = targets;
  demo.provenance = std::move(provenance);
  return demo;
}

DemoSet bootstrap_demos(const std::vector<Instance>& train, const std::vector<Instance>& val,
                        Gateway& gateway, const ApiSchema& schema,
                        const PromptTemplate& tmpl, const BootstrapParams& params) {
  if (train.empty() || val.empty()) throw Error("bootstrap_demos: empty train or val set");
  if (tmpl.wants_tags()) {
    throw Error("bootstrap_demos: template " + tmpl.id + " needs tagged inputs; bootstrap "
                "demonstrations over untagged templates");
  }
  RenderContext train_ctx{gateway.config().model_name, "train"};

  auto exact_match = [&](const Instance& instance, const DemoSet& demos) {
    std::string prompt =
        build_prompt(tmpl, schema, instance_prompt_vars(instance), demos, train_ctx);
    GenerationTrace trace = gateway.complete(prompt);
    InstanceScore score = score_instance(parse_calls(trace.text).calls, instance.gold_calls);
    return score.exact_match == 1.0;
  };

  std::vector<DemoSet> candidates;
  for (std::size_t c = 0; c < params.num_candidates; ++c) {
    Rng rng(fnv1a64("candidate:" + std::to_string(c), params.seed));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    DemoSet labeled;
    for (std::size_t i = 0; i < order.size() && labeled.demos.size() < params.max_labeled; ++i) {
      labeled.demos.push_back(demo_from_instance(train[order[i]], "labeled"));
    }

    DemoSet candidate;
    for (std::size_t i = 0;
         i < order.size() && candidate.demos.size() < params.max_bootstrapped; ++i) {
      const Instance& instance = train[order[i]];
      if (exact_match(instance, labeled)) {
        candidate.demos.push_back(demo_from_instance(instance, "bootstrapped"));
      }
    }
    for (const auto& demo : labeled.demos) {
      if (candidate.demos.size() >= params.max_bootstrapped + params.max_labeled) break;
      candidate.demos.push_back(demo);
    }
    candidates.push_back(std::move(candidate));
  }

  bool any_nonempty = false;
  for (const auto& c : candidates) any_nonempty = any_nonempty || !c.demos.empty();
  if (!any_nonempty) {
    throw Error("bootstrap_demos: empty candidate pool (no train instance bootstrapped and "
                "max_labeled is 0)");
  }

  std::size_t best_idx = 0;
  double best_em = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::size_t hits = 0;
    for (const auto& instance : val) {
      if (exact_match(instance, candidates[c])) ++hits;
    }
    double em = static_cast<double>(hits) / static_cast<double>(val.size());
    if (em > best_em) {
      best_em = em;
      best_idx = c;
    }
  }
  return candidates[best_idx];
}

}  // namespace taps
