// SPDX-License-Identifier: Apache-2.0
#include "typeforge/code_index.hpp"
#include "typeforge/coverage.hpp"
#include "typeforge/error.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace typeforge;
using json = nlohmann::json;

namespace {

FileCoverage fc(std::set<int> covered, std::set<int> missing)
{
    FileCoverage f;
    f.covered_lines = std::move(covered);
    f.missing_lines = std::move(missing);
    return f;
}

} // namespace

TEST(Coverage, Percentages)
{
    auto f = fc({1, 2, 3}, {4});
    EXPECT_DOUBLE_EQ(f.statement_pct(), 75.0);
    f.covered_branches = {{1, 2}};
    f.missing_branches = {{1, 3}};
    EXPECT_DOUBLE_EQ(f.branch_pct(), 50.0);
    EXPECT_DOUBLE_EQ(fc({}, {}).statement_pct(), 100.0);
}

TEST(Coverage, ParsesCoverageToolJson)
{
    const auto files = parse_coverage_files(json::parse(R"({
        "pkg/m.py": {"executed_lines": [1, 2, 5], "missing_lines": [6, 7],
                     "executed_branches": [[2, 5]], "missing_branches": [[2, -1]]}
    })"));
    const auto& f = files.at("pkg/m.py");
    EXPECT_EQ(f.covered_lines, (std::set<int>{1, 2, 5}));
    EXPECT_EQ(f.missing_lines, (std::set<int>{6, 7}));
    EXPECT_EQ(f.missing_branches, (std::set<Branch>{{2, -1}}));
    EXPECT_THROW(parse_coverage_files(json::array()), Error);
}

TEST(Coverage, RunnerOutputRoundTrip)
{
    const auto r = parse_runner_output(R"({"status": "fail", "error_report": "AssertionError: x",
        "duration_s": 0.5, "coverage": {"files": {"m.py": {"executed_lines": [1], "missing_lines": [2]}}}})");
    EXPECT_EQ(r.status, ExecStatus::Fail);
    ASSERT_TRUE(r.coverage.has_value());
    const auto back = execution_from_json(to_json(r));
    EXPECT_EQ(back.status, r.status);
    EXPECT_EQ(back.error_report, r.error_report);
    EXPECT_EQ(*back.coverage, *r.coverage);
}

TEST(Coverage, RunnerOutputErrors)
{
    EXPECT_THROW(parse_runner_output("not json"), Error);
    EXPECT_THROW(parse_runner_output(R"({"status": "weird"})"), Error);
    EXPECT_THROW(parse_runner_output("[]"), Error);
    const auto pass = parse_runner_output(R"({"status": "pass", "error_report": "ignored", "coverage": null})");
    EXPECT_EQ(pass.error_report, "");
    EXPECT_FALSE(pass.coverage.has_value());
}

TEST(Coverage, MergeIsUnion)
{
    CoverageReport a;
    a.per_file["m.py"] = fc({1, 2}, {3, 4});
    CoverageReport b;
    b.per_file["m.py"] = fc({1, 3}, {2, 4});
    const auto m = merge_coverage({a, b});
    EXPECT_EQ(m.per_file.at("m.py").covered_lines, (std::set<int>{1, 2, 3}));
    EXPECT_EQ(m.per_file.at("m.py").missing_lines, (std::set<int>{4}));
    EXPECT_EQ(m.covered_statements(), 3U);
    EXPECT_EQ(m.total_statements(), 4U);
}

TEST(Coverage, MergeRejectsDifferentSnapshots)
{
    CoverageReport a;
    a.snapshot_id = "one";
    CoverageReport b;
    b.snapshot_id = "two";
    EXPECT_THROW(merge_coverage({a, b}), Error);
    CoverageReport blank;
    EXPECT_NO_THROW(merge_coverage({a, blank}));
}

TEST(Coverage, ReportJsonRoundTrip)
{
    CoverageReport a;
    a.snapshot_id = "s";
    a.per_file["m.py"] = fc({1}, {2});
    EXPECT_EQ(CoverageReport::from_json(a.to_json()), a);
    EXPECT_EQ(restrict_to(a, {"other.py"}).per_file.size(), 0U);
}

TEST(Coverage, AnnotateUncoveredMarksSpanLines)
{
    const auto idx = index_sources({{"m.py", "def f(x):\n    if x:\n        return 1\n    return 2\n"}});
    const auto& unit = idx.at("m.f");
    CoverageReport r;
    r.per_file["m.py"] = fc({1, 2, 4}, {3});
    EXPECT_EQ(uncovered_lines(unit, r), std::set<int>{3});
    const auto annotated = annotate_uncovered(unit, r);
    EXPECT_EQ(annotated, "def f(x):\n    if x:\n        return 1  # NOT COVERED\n    return 2");
    EXPECT_EQ(strip_markers(annotated), unit.source);
    CoverageReport none;
    EXPECT_EQ(annotate_uncovered(unit, none), unit.source);
}

TEST(Coverage, SnapshotIdTracksContent)
{
    const auto a = index_sources({{"m.py", "x = 1\n"}});
    const auto b = index_sources({{"m.py", "x = 2\n"}});
    EXPECT_EQ(snapshot_id(a), snapshot_id(index_sources({{"m.py", "x = 1\n"}})));
    EXPECT_NE(snapshot_id(a), snapshot_id(b));
}
