#pragma once

#include <map>
#include <string>
#include <vector>

#include "taps/gateway.hpp"
#include "taps/instance.hpp"
#include "taps/tagging.hpp"

namespace taps::testing {

// Three solved instances with gold tags, built so the faithful stub
// reproduces the gold calls on both the default and the tagged path.
struct FixtureSet {
  std::vector<Instance> instances;
  std::map<std::string, std::vector<std::string>> tagged_texts;  // id -> tagged lines
  std::map<std::string, std::vector<TaggedInstruction>> tags;    // id -> parsed tags
};

FixtureSet pipeline_fixtures(const ApiSchema& schema);

// Stub profile answering every fixture instance with its gold calls and
// tagging every fixture instruction with its gold tags.
StubProfile faithful_profile(const FixtureSet& fixtures, double confidence = 1.0);

ModelConfig faithful_stub_config(const FixtureSet& fixtures, double confidence = 1.0);

// Dedicated corruption-study fixtures: one instruction per instance, one
// action covering the whole sentence, all tokens distinct, gold calls
// derived from the tags. Under this shape every corruption operator weakly
// decreases the instance F1 of the tag-faithful stub, so curves over nested
// corruption sets are monotone.
FixtureSet corruption_fixtures(const ApiSchema& schema, std::size_t count);

std::string write_temp_dataset(const std::vector<Instance>& instances,
                               const std::string& path);

std::string fixture_dataset_json(const std::vector<Instance>& instances);

}  // namespace taps::testing
