// SPDX-License-Identifier: Apache-2.0
#include "typeforge/coverage.hpp"

#include "typeforge/error.hpp"
#include "typeforge/util.hpp"

#include <algorithm>

namespace typeforge {

std::string_view to_string(ExecStatus status) noexcept
{
    switch (status) {
    case ExecStatus::Pass: return "pass";
    case ExecStatus::Fail: return "fail";
    case ExecStatus::Error: return "error";
    case ExecStatus::Timeout: return "timeout";
    }
    return "error";
}

ExecStatus exec_status_from(std::string_view text)
{
    if (text == "pass") {
        return ExecStatus::Pass;
    }
    if (text == "fail") {
        return ExecStatus::Fail;
    }
    if (text == "error") {
        return ExecStatus::Error;
    }
    if (text == "timeout") {
        return ExecStatus::Timeout;
    }
    throw Error(ErrorCode::MalformedRunnerOutput, "unknown status \"" + std::string(text) + "\"");
}

namespace {

double pct(std::size_t covered, std::size_t missing) noexcept
{
    const auto total = covered + missing;
    return total == 0 ? 100.0 : 100.0 * static_cast<double>(covered) / static_cast<double>(total);
}

std::set<Branch> parse_branches(const nlohmann::json& arr)
{
    std::set<Branch> out;
    for (const auto& b : arr) {
        if (!b.is_array() || b.size() != 2) {
            throw Error(ErrorCode::MalformedRunnerOutput, "branch entries must be [line, target] pairs");
        }
        out.emplace(b[0].get<int>(), b[1].get<int>());
    }
    return out;
}

nlohmann::json branches_json(const std::set<Branch>& bs)
{
    auto arr = nlohmann::json::array();
    for (const auto& [a, b] : bs) {
        arr.push_back({a, b});
    }
    return arr;
}

std::vector<std::string> split_keep(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            return out;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string marker_suffix()
{
    return "  " + std::string(kUncoveredMarker);
}

} // namespace

double FileCoverage::statement_pct() const noexcept
{
    return pct(covered_lines.size(), missing_lines.size());
}

double FileCoverage::branch_pct() const noexcept
{
    return pct(covered_branches.size(), missing_branches.size());
}

std::size_t CoverageReport::covered_statements() const noexcept
{
    std::size_t n = 0;
    for (const auto& [f, c] : per_file) {
        n += c.covered_lines.size();
    }
    return n;
}

std::size_t CoverageReport::total_statements() const noexcept
{
    std::size_t n = 0;
    for (const auto& [f, c] : per_file) {
        n += c.covered_lines.size() + c.missing_lines.size();
    }
    return n;
}

double CoverageReport::statement_pct() const noexcept
{
    return pct(covered_statements(), total_statements() - covered_statements());
}

double CoverageReport::branch_pct() const noexcept
{
    std::size_t covered = 0;
    std::size_t missing = 0;
    for (const auto& [f, c] : per_file) {
        covered += c.covered_branches.size();
        missing += c.missing_branches.size();
    }
    return pct(covered, missing);
}

std::map<std::string, FileCoverage> parse_coverage_files(const nlohmann::json& files)
{
    if (!files.is_object()) {
        throw Error(ErrorCode::MalformedRunnerOutput, "coverage.files must be an object");
    }
    std::map<std::string, FileCoverage> out;
    try {
        for (const auto& [path, data] : files.items()) {
            FileCoverage fc;
            for (const auto& l : data.at("executed_lines")) {
                fc.covered_lines.insert(l.get<int>());
            }
            for (const auto& l : data.at("missing_lines")) {
                fc.missing_lines.insert(l.get<int>());
            }
            if (data.contains("executed_branches")) {
                fc.covered_branches = parse_branches(data.at("executed_branches"));
            }
            if (data.contains("missing_branches")) {
                fc.missing_branches = parse_branches(data.at("missing_branches"));
            }
            for (const auto l : fc.covered_lines) {
                fc.missing_lines.erase(l);
            }
            out[path] = std::move(fc);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRunnerOutput, std::string("coverage data: ") + e.what());
    }
    return out;
}

nlohmann::json coverage_files_json(const std::map<std::string, FileCoverage>& files)
{
    auto out = nlohmann::json::object();
    for (const auto& [path, fc] : files) {
        out[path] = {{"executed_lines", fc.covered_lines},
                     {"missing_lines", fc.missing_lines},
                     {"executed_branches", branches_json(fc.covered_branches)},
                     {"missing_branches", branches_json(fc.missing_branches)}};
    }
    return out;
}

nlohmann::json CoverageReport::to_json() const
{
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [path, fc] : per_file) {
        files[path] = {{"executed_lines", fc.covered_lines},
                       {"missing_lines", fc.missing_lines},
                       {"executed_branches", branches_json(fc.covered_branches)},
                       {"missing_branches", branches_json(fc.missing_branches)},
                       {"statement_pct", fc.statement_pct()},
                       {"branch_pct", fc.branch_pct()}};
    }
    return {{"snapshot_id", snapshot_id},
            {"files", files},
            {"statement_pct", statement_pct()},
            {"branch_pct", branch_pct()}};
}

CoverageReport CoverageReport::from_json(const nlohmann::json& j)
{
    CoverageReport r;
    r.snapshot_id = j.value("snapshot_id", std::string());
    r.per_file = parse_coverage_files(j.at("files"));
    return r;
}

ExecutionResult execution_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw Error(ErrorCode::MalformedRunnerOutput, "runner output must be a JSON object");
    }
    ExecutionResult r;
    try {
        r.status = exec_status_from(j.at("status").get<std::string>());
        r.error_report = j.value("error_report", std::string());
        r.duration_s = j.value("duration_s", 0.0);
        if (j.contains("coverage") && !j.at("coverage").is_null()) {
            r.coverage = parse_coverage_files(j.at("coverage").at("files"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRunnerOutput, std::string("runner output: ") + e.what());
    }
    if (r.status == ExecStatus::Pass) {
        r.error_report.clear();
    }
    return r;
}

ExecutionResult parse_runner_output(std::string_view stdout_text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(stdout_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRunnerOutput, std::string("runner stdout is not one JSON object: ") + e.what());
    }
    return execution_from_json(j);
}

nlohmann::json to_json(const ExecutionResult& r)
{
    nlohmann::json j = {{"status", std::string(to_string(r.status))},
                        {"error_report", r.error_report},
                        {"duration_s", r.duration_s}};
    j["coverage"] = r.coverage ? nlohmann::json{{"files", coverage_files_json(*r.coverage)}} : nlohmann::json(nullptr);
    return j;
}

CoverageReport report_from(const ExecutionResult& result)
{
    CoverageReport r;
    r.snapshot_id = result.snapshot_id;
    if (result.coverage) {
        r.per_file = *result.coverage;
    }
    return r;
}

CoverageReport merge_coverage(const std::vector<CoverageReport>& reports)
{
    CoverageReport out;
    std::map<std::string, std::set<int>> executable;
    std::map<std::string, std::set<Branch>> branches;
    for (const auto& r : reports) {
        if (!r.snapshot_id.empty()) {
            if (!out.snapshot_id.empty() && out.snapshot_id != r.snapshot_id) {
                throw Error(ErrorCode::SnapshotMismatch,
                            "coverage from snapshot " + r.snapshot_id + " cannot merge with " + out.snapshot_id);
            }
            out.snapshot_id = r.snapshot_id;
        }
        for (const auto& [path, fc] : r.per_file) {
            auto& dst = out.per_file[path];
            dst.covered_lines.insert(fc.covered_lines.begin(), fc.covered_lines.end());
            dst.covered_branches.insert(fc.covered_branches.begin(), fc.covered_branches.end());
            auto& ex = executable[path];
            ex.insert(fc.covered_lines.begin(), fc.covered_lines.end());
            ex.insert(fc.missing_lines.begin(), fc.missing_lines.end());
            auto& br = branches[path];
            br.insert(fc.covered_branches.begin(), fc.covered_branches.end());
            br.insert(fc.missing_branches.begin(), fc.missing_branches.end());
        }
    }
    for (auto& [path, fc] : out.per_file) {
        std::set_difference(executable[path].begin(), executable[path].end(), fc.covered_lines.begin(),
                            fc.covered_lines.end(), std::inserter(fc.missing_lines, fc.missing_lines.end()));
        std::set_difference(branches[path].begin(), branches[path].end(), fc.covered_branches.begin(),
                            fc.covered_branches.end(),
                            std::inserter(fc.missing_branches, fc.missing_branches.end()));
    }
    return out;
}

CoverageReport restrict_to(const CoverageReport& report, const std::set<std::string>& files)
{
    CoverageReport out;
    out.snapshot_id = report.snapshot_id;
    for (const auto& [path, fc] : report.per_file) {
        if (files.count(path) != 0) {
            out.per_file[path] = fc;
        }
    }
    return out;
}

std::set<int> uncovered_lines(const CodeUnit& unit, const CoverageReport& report)
{
    std::set<int> out;
    const auto it = report.per_file.find(unit.file);
    if (it == report.per_file.end()) {
        return out;
    }
    for (const auto l : it->second.missing_lines) {
        if (l >= unit.span.start_line && l <= unit.span.end_line) {
            out.insert(l);
        }
    }
    return out;
}

std::string annotate_uncovered(const CodeUnit& unit, const CoverageReport& report)
{
    const auto missing = uncovered_lines(unit, report);
    if (missing.empty()) {
        return unit.source;
    }
    auto lines = split_keep(unit.source);
    for (const auto l : missing) {
        const auto idx = static_cast<std::size_t>(l - unit.span.start_line);
        if (idx >= lines.size()) {
            continue;
        }
        auto& line = lines[idx];
        if (!line.empty() && line.back() == '\r') {
            line.insert(line.size() - 1, marker_suffix());
        } else {
            line += marker_suffix();
        }
    }
    return join(lines, "\n");
}

std::string strip_markers(std::string_view annotated)
{
    const auto suffix = marker_suffix();
    auto lines = split_keep(annotated);
    for (auto& line : lines) {
        const bool cr = !line.empty() && line.back() == '\r';
        const auto body_len = line.size() - (cr ? 1 : 0);
        if (body_len >= suffix.size() && line.compare(body_len - suffix.size(), suffix.size(), suffix) == 0) {
            line.erase(body_len - suffix.size(), suffix.size());
        }
    }
    return join(lines, "\n");
}

std::string snapshot_id(const ProjectIndex& index)
{
    std::vector<std::string> parts;
    for (const auto& f : index.files()) {
        parts.push_back(f.path + "\t" + f.content_hash);
    }
    std::sort(parts.begin(), parts.end());
    return sha256_hex(join(parts, "\n")).substr(0, 16);
}

} // namespace typeforge
