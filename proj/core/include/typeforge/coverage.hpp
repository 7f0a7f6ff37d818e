// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/code_index.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace typeforge {

inline constexpr std::string_view kUncoveredMarker = "# NOT COVERED";

enum class ExecStatus { Pass, Fail, Error, Timeout };

std::string_view to_string(ExecStatus status) noexcept;
ExecStatus exec_status_from(std::string_view text);

using Branch = std::pair<int, int>; ///< (source line, target line); negative targets are exits

struct FileCoverage {
    std::set<int> covered_lines;
    std::set<int> missing_lines;
    std::set<Branch> covered_branches;
    std::set<Branch> missing_branches;

    double statement_pct() const noexcept;
    double branch_pct() const noexcept;
    friend bool operator==(const FileCoverage&, const FileCoverage&) = default;
};

struct ExecutionResult {
    ExecStatus status = ExecStatus::Error;
    std::string error_report;
    std::optional<std::map<std::string, FileCoverage>> coverage;
    double duration_s = 0.0;
    std::string snapshot_id;
};

struct CoverageReport {
    std::map<std::string, FileCoverage> per_file;
    std::string snapshot_id;

    double statement_pct() const noexcept;
    double branch_pct() const noexcept;
    std::size_t covered_statements() const noexcept;
    std::size_t total_statements() const noexcept;

    nlohmann::json to_json() const;
    static CoverageReport from_json(const nlohmann::json& j);
    friend bool operator==(const CoverageReport&, const CoverageReport&) = default;
};

/// Parses the runner's result object. Throws MalformedRunnerOutput.
ExecutionResult parse_runner_output(std::string_view stdout_text);
ExecutionResult execution_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExecutionResult& result);

/// Parses the `files` mapping of the coverage tool's JSON report.
std::map<std::string, FileCoverage> parse_coverage_files(const nlohmann::json& files);
nlohmann::json coverage_files_json(const std::map<std::string, FileCoverage>& files);

CoverageReport report_from(const ExecutionResult& result);

/// Union of covered sets; missing = executable \ covered. Throws SnapshotMismatch when
/// two non-empty snapshot ids differ.
CoverageReport merge_coverage(const std::vector<CoverageReport>& reports);

/// Restricts a report to the given files.
CoverageReport restrict_to(const CoverageReport& report, const std::set<std::string>& files);

/// Uncovered statement lines inside `unit`'s span.
std::set<int> uncovered_lines(const CodeUnit& unit, const CoverageReport& report);

/// Unit source with `kUncoveredMarker` appended to every missing line of its span.
std::string annotate_uncovered(const CodeUnit& unit, const CoverageReport& report);

/// Removes markers added by annotate_uncovered.
std::string strip_markers(std::string_view annotated);

/// Hash over every indexed file's content hash.
std::string snapshot_id(const ProjectIndex& index);

} // namespace typeforge
