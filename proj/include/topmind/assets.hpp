#pragma once

#include <string_view>

// Data files compiled into the library from assets/ at build time.
namespace topmind::assets {

std::string_view seed_prompts_tsv();
std::string_view label_aliases_tsv();
std::string_view semantic_labeling_prompt();
std::string_view math_level_prompt();
std::string_view programming_level_prompt();

}  // namespace topmind::assets
