#pragma once

#include <string_view>
#include <vector>

namespace taps::assets {

// Bundled assets are embedded at build time from the assets/ directory so
// the library works without an install prefix.
std::string_view default_schema_json();

// Raw template text for one of the bundled prompt template ids
// (baseline, default_v1, default_v2, ext_tag_v1, ext_tag_v2, joint_tag,
// tagger). Throws taps::Error for unknown ids.
std::string_view prompt_template_text(std::string_view id);

std::vector<std::string_view> prompt_template_ids();

}  // namespace taps::assets
