#pragma once

#include <string_view>

namespace sva::detail {

// Generated at configure time from assets/prompt_template_cot_v1.txt.
extern const std::string_view kDefaultTemplateText;

}  // namespace sva::detail
