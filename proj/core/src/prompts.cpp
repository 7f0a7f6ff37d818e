// SPDX-License-Identifier: Apache-2.0
#include "typeforge/prompts.hpp"

#include "typeforge/error.hpp"
#include "typeforge/util.hpp"
#include "prompt_assets.hpp"

#include <map>

namespace typeforge::prompts {

namespace {

Template parse(std::string_view raw)
{
    constexpr std::string_view divider = "=== user ===\n";
    const auto at = raw.find(divider);
    if (at == std::string_view::npos) {
        return {"", std::string(raw)};
    }
    Template t;
    t.system = trim(raw.substr(0, at));
    t.user = std::string(raw.substr(at + divider.size()));
    while (!t.user.empty() && t.user.back() == '\n') {
        t.user.pop_back();
    }
    return t;
}

const std::map<std::string, Template, std::less<>>& registry()
{
    static const auto table = [] {
        std::map<std::string, Template, std::less<>> m;
        for (const auto& [name, raw] : detail::kPromptAssets) {
            m.emplace(std::string(name), parse(raw));
        }
        return m;
    }();
    return table;
}

} // namespace

const Template& get(std::string_view name)
{
    const auto& r = registry();
    const auto it = r.find(name);
    if (it == r.end()) {
        throw Error(ErrorCode::PreconditionFailed, "unknown prompt template: " + std::string(name));
    }
    return it->second;
}

std::vector<std::string> names()
{
    std::vector<std::string> out;
    for (const auto& [name, t] : registry()) {
        out.push_back(name);
    }
    return out;
}

Rendered render(std::string_view name, const std::vector<std::pair<std::string, std::string>>& values)
{
    const auto& t = get(name);
    return {render_template(t.system, values), render_template(t.user, values)};
}

} // namespace typeforge::prompts
