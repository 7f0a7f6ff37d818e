// SPDX-License-Identifier: Apache-2.0
#include "typeforge/generated_test.hpp"

namespace typeforge {

std::string_view to_string(TestStatus status) noexcept
{
    switch (status) {
    case TestStatus::Fresh: return "fresh";
    case TestStatus::Passing: return "passing";
    case TestStatus::Failing: return "failing";
    case TestStatus::Repairing: return "repairing";
    case TestStatus::Discarded: return "discarded";
    }
    return "fresh";
}

} // namespace typeforge
