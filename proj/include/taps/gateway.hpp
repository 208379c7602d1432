#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "taps/instance.hpp"
#include "taps/prompt.hpp"
#include "taps/schema.hpp"
#include "taps/tagging.hpp"
#include "taps/trace.hpp"

namespace taps {

struct GenerationParams {
  int candidate_count = 1;
  double temperature = 0.0;
  int top_k = 0;
  double top_p = 1.0;
  bool sample = false;
};

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_ms = 250;
};

struct RemoteConfig {
  std::string endpoint;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "TAPS_API_KEY";
};

// Deterministic rule-based backend. It reconstructs API calls from tagged
// instructions when the prompt carries them, answers from a gold lookup
// table otherwise, and falls back to keyword-matching the utterance against
// the schema. Error modes inject the common failure patterns so pipeline
// behavior under each is testable.
struct StubProfile {
  double confidence = 1.0;  // per-step top-1 probability
  std::map<std::string, std::vector<std::string>> answers;  // dialogue text -> call texts
  std::map<std::string, std::string> tags;                  // instruction -> tagged text
  std::string error_mode = "none";  // none | drop-argument | rename-slot | hallucinate-function
  double error_rate = 0.0;          // share of instances the error mode hits
  std::optional<double> candidate_gap;  // runner-up sequence probability gap
};

struct ModelConfig {
  std::string kind = "stub";  // stub | remote
  StubProfile stub;
  RemoteConfig remote;
  GenerationParams generation;
  int topk_logprobs = 5;
  int timeout_ms = 120000;
  RetryPolicy retry;
  std::string model_name = "other";  // template conditional key ("llama" or "other")

  static ModelConfig from_json_text(std::string_view text);
  std::string to_json() const;
};

struct Capabilities {
  bool logprobs = true;
  bool multi_candidate = true;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual GenerationTrace complete(const std::string& prompt) = 0;
};

std::unique_ptr<Backend> make_backend(const ModelConfig& cfg, const ApiSchema& schema);

// On-disk response cache keyed by (backend id, generation params, prompt).
// Reruns of a cached experiment never touch the backend.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);

  std::optional<GenerationTrace> lookup(const std::string& key) const;
  void store(const std::string& key, const GenerationTrace& trace);

 private:
  std::string dir_;
  mutable std::mutex mutex_;
};

std::string trace_to_json(const GenerationTrace& trace);
GenerationTrace trace_from_json(std::string_view text);

// Uniform model access: completion with caching plus the tagging and
// demo-bootstrapping calls built on top of it.
class Gateway {
 public:
  Gateway(ModelConfig cfg, const ApiSchema& schema,
          std::optional<std::string> cache_dir = std::nullopt);

  GenerationTrace complete(const std::string& prompt);

  const ModelConfig& config() const { return cfg_; }
  Capabilities capabilities() const { return backend_->capabilities(); }
  std::string backend_id() const { return backend_->id(); }

 private:
  ModelConfig cfg_;
  std::unique_ptr<Backend> backend_;
  std::unique_ptr<ResponseCache> cache_;
  std::string params_digest_;
};

struct TaggingFailure {
  std::size_t index;
  std::string message;
};

struct ModelTags {
  std::vector<TaggedInstruction> tags;
  std::vector<TaggingFailure> failures;
};

// Built-in single demonstration for the tagger prompt.
DemoSet default_tagger_demos();

// Tags each instruction with the model; a parse failure gets one corrective
// retry, after which the instruction degrades to its untagged form.
ModelTags tag_with_model(Gateway& gateway, const std::vector<std::string>& instructions,
                         const ApiSchema& schema, const PromptTemplate& tagger_template,
                         const DemoSet& demos, const RenderContext& ctx);

struct BootstrapParams {
  std::size_t max_bootstrapped = 5;
  std::size_t max_labeled = 5;
  std::size_t num_candidates = 10;
  std::uint64_t seed = 0;
};

// Candidate demo sets are built by sampling labeled train demos and
// bootstrapping model-solved ones (kept only on exact match), then the set
// with the best validation EM wins; ties go to the earlier candidate.
DemoSet bootstrap_demos(const std::vector<Instance>& train, const std::vector<Instance>& val,
                        Gateway& gateway, const ApiSchema& schema,
                        const PromptTemplate& tmpl, const BootstrapParams& params);

// Prompt variables for one instance under the generation templates.
PromptVars instance_prompt_vars(const Instance& instance);
Demo demo_from_instance(const Instance& instance, std::string provenance);

}  // namespace taps
