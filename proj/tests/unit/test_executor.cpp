// SPDX-License-Identifier: Apache-2.0
#include "typeforge/error.hpp"
#include "typeforge/executor.hpp"
#include "typeforge/util.hpp"

#include <gtest/gtest.h>

#include <sys/stat.h>

using namespace typeforge;
namespace fs = std::filesystem;

namespace {

class SandboxTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        std::string tmpl = (fs::temp_directory_path() / "tf-exec-XXXXXX").string();
        ASSERT_NE(::mkdtemp(tmpl.data()), nullptr);
        root_ = tmpl;
        fs::create_directories(root_ / "project" / "pkg");
        write_file_atomic(root_ / "project" / "pkg" / "m.py", "def f():\n    return 1\n");
        fs::create_directories(root_ / "project" / ".git");
        write_file_atomic(root_ / "project" / ".git" / "HEAD", "ref");
        fs::create_directories(root_ / "work");
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path script(const std::string& name, const std::string& body)
    {
        const auto p = root_ / name;
        write_file_atomic(p, "#!/bin/sh\n" + body);
        ::chmod(p.c_str(), 0755);
        return p;
    }

    SandboxConfig config(const fs::path& runner)
    {
        SandboxConfig c;
        c.project_root = root_ / "project";
        c.runner_command = {runner.string()};
        c.timeout = std::chrono::milliseconds(1000);
        c.grace = std::chrono::milliseconds(200);
        c.work_root = root_ / "work";
        c.snapshot_id = "snap";
        return c;
    }

    ExecutionRequest request()
    {
        return {"t1", "test_t1.py", "def test_x():\n    assert True\n", {"pkg.m"}};
    }

    fs::path root_;
};

} // namespace

TEST_F(SandboxTest, PassesArgumentsAndRelativizesCoverage)
{
    // $1 test path, $2 project copy, $3 timeout seconds
    const auto runner = script("runner.sh", R"(
test -f "$1" || exit 3
test -f "$2/pkg/m.py" || exit 4
test -d "$2/.git" && exit 5
[ "$3" = "1" ] || exit 6
[ "$TYPEFORGE_TARGET_MODULES" = "pkg.m" ] || exit 7
printf '{"status":"pass","error_report":"","duration_s":0.25,"coverage":{"files":{"%s/pkg/m.py":{"executed_lines":[1,2],"missing_lines":[]}}}}\n' "$2"
)");
    SubprocessExecutor ex(config(runner));
    const auto r = ex.execute(request());
    EXPECT_EQ(r.status, ExecStatus::Pass) << r.error_report;
    ASSERT_TRUE(r.coverage.has_value());
    EXPECT_EQ(r.coverage->count("pkg/m.py"), 1U);
    EXPECT_DOUBLE_EQ(r.duration_s, 0.25);
    EXPECT_EQ(r.snapshot_id, "snap");
    EXPECT_TRUE(fs::is_empty(root_ / "work"));
}

TEST_F(SandboxTest, ReportsFailures)
{
    const auto runner = script("runner.sh", R"(echo '{"status":"fail","error_report":"AssertionError: 1 != 2","coverage":null}')");
    SubprocessExecutor ex(config(runner));
    const auto r = ex.execute(request());
    EXPECT_EQ(r.status, ExecStatus::Fail);
    EXPECT_NE(r.error_report.find("AssertionError"), std::string::npos);
}

TEST_F(SandboxTest, KillsRunnerAfterTimeout)
{
    const auto runner = script("runner.sh", "sleep 30\n");
    SubprocessExecutor ex(config(runner));
    const auto start = std::chrono::steady_clock::now();
    const auto r = ex.execute(request());
    const auto took = std::chrono::steady_clock::now() - start;
    EXPECT_EQ(r.status, ExecStatus::Timeout);
    EXPECT_LT(took, std::chrono::seconds(5));
}

TEST_F(SandboxTest, MalformedOutputIsAnError)
{
    const auto runner = script("runner.sh", "echo garbage; echo oops >&2; exit 1\n");
    SubprocessExecutor ex(config(runner));
    try {
        ex.execute(request());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedRunnerOutput);
        EXPECT_NE(std::string(e.what()).find("oops"), std::string::npos);
    }
}

TEST_F(SandboxTest, KeepWorkdirs)
{
    const auto runner = script("runner.sh", R"(echo '{"status":"pass"}')");
    auto c = config(runner);
    c.keep_workdirs = true;
    SubprocessExecutor ex(c);
    ex.execute(request());
    EXPECT_FALSE(fs::is_empty(root_ / "work"));
}

TEST(ScriptedExecutor, FirstMarkerWins)
{
    ExecutionResult pass;
    pass.status = ExecStatus::Pass;
    ExecutionResult fail;
    fail.status = ExecStatus::Fail;
    ScriptedExecutor ex({{"# case: a", pass}, {"# case", fail}}, "snap");
    EXPECT_EQ(ex.execute({"t", "f.py", "# case: a\n", {}}).status, ExecStatus::Pass);
    EXPECT_EQ(ex.execute({"t", "f.py", "# case: b\n", {}}).status, ExecStatus::Fail);
    EXPECT_EQ(ex.execute({"t", "f.py", "# case: a\n", {}}).snapshot_id, "snap");
    EXPECT_EQ(ex.calls(), 3U);
    EXPECT_EQ(ex.requests().size(), 3U);
    const auto miss = ex.execute({"t", "f.py", "nothing", {}});
    EXPECT_EQ(miss.status, ExecStatus::Error);
    EXPECT_NE(miss.error_report.find("no canned execution"), std::string::npos);
}
