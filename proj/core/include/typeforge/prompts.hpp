// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace typeforge::prompts {

struct Template {
    std::string system;
    std::string user;
};

/// Built-in template by task name. Throws PreconditionFailed for unknown names.
const Template& get(std::string_view name);

std::vector<std::string> names();

struct Rendered {
    std::string system;
    std::string user;
};

Rendered render(std::string_view name, const std::vector<std::pair<std::string, std::string>>& values);

} // namespace typeforge::prompts
