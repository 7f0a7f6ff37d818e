// SPDX-License-Identifier: Apache-2.0
#include "typeforge/call_graph.hpp"
#include "typeforge/code_index.hpp"
#include "typeforge/llm.hpp"
#include "typeforge/summarizer.hpp"
#include "typeforge/util.hpp"

#include <gtest/gtest.h>

#include <mutex>

using namespace typeforge;
namespace fs = std::filesystem;

namespace {

const char* kChain = R"(def leaf(x):
    """Adds one."""
    return x + 1


def middle(y):
    return leaf(y) * 2


def top():
    return middle(3)


class Holder:
    def __init__(self, v):
        self.v = v
)";

struct Recorder {
    std::mutex mu;
    std::vector<std::string> users;
};

std::unique_ptr<llm::LlmClient> client_for(std::vector<llm::ScriptedBackend::Rule> rules, Recorder* rec = nullptr)
{
    auto c = std::make_unique<llm::LlmClient>(std::make_shared<llm::ScriptedBackend>(std::move(rules)));
    if (rec != nullptr) {
        c->set_observer([rec](const llm::ChatRequest& r) {
            std::lock_guard lock(rec->mu);
            rec->users.push_back(r.messages.back().content);
        });
    }
    return c;
}

std::vector<llm::ScriptedBackend::Rule> echo_rules()
{
    return {{{"Task: summarize_behavior", "test.leaf"}, {}, "leaf adds one to x"},
            {{"Task: summarize_behavior", "test.middle"}, {}, "middle doubles leaf"},
            {{"Task: summarize_behavior"}, {}, "generic behavior"},
            {{"Task: summarize_class"}, {}, "holds a value"},
            {{"Task: summarize_semantics"}, {}, "used by its callers"}};
}

} // namespace

TEST(Summarizer, BehaviorFallsBackToDocstring)
{
    const auto idx = index_sources({{"test.py", kChain}});
    auto client_ptr = client_for({});
    auto& client = *client_ptr;
    bool fell_back = false;
    EXPECT_EQ(analyze_behavior(client, idx.at("test.leaf"), {}, {}, &fell_back), "Adds one.");
    EXPECT_TRUE(fell_back);
}

TEST(Summarizer, BehaviorTruncatesToWordLimit)
{
    const auto idx = index_sources({{"test.py", kChain}});
    auto client_ptr = client_for({{{}, {}, "one two three four five"}});
    auto& client = *client_ptr;
    SummarizerOptions o;
    o.max_words = 3;
    EXPECT_EQ(analyze_behavior(client, idx.at("test.leaf"), {}, o), "one two three");
}

TEST(Summarizer, SemanticsWithoutContextReusesBehavior)
{
    const auto idx = index_sources({{"test.py", kChain}});
    auto client_ptr = client_for({{{}, {}, "should not be called"}});
    auto& client = *client_ptr;
    EXPECT_EQ(infer_semantics(client, idx.at("test.top"), "does things", {}, std::nullopt), "does things");
    EXPECT_EQ(client.stats().calls, 0U);
}

TEST(Summarizer, SemanticsUsesDocProxyAtRoots)
{
    const auto idx = index_sources({{"test.py", kChain}});
    Recorder rec;
    auto client_ptr = client_for({{{}, {}, "entry point"}}, &rec);
    auto& client = *client_ptr;
    const auto s = infer_semantics(client, idx.at("test.top"), "does things", {}, DocProxy{"README.md", "A calculator."});
    EXPECT_EQ(s, "entry point");
    ASSERT_EQ(rec.users.size(), 1U);
    EXPECT_NE(rec.users[0].find("A calculator."), std::string::npos);
}

TEST(Summarizer, ProjectBottomUpThenTopDown)
{
    const auto idx = index_sources({{"test.py", kChain}});
    const auto cg = build_call_graph(idx);
    Recorder rec;
    auto client_ptr = client_for(echo_rules(), &rec);
    auto& client = *client_ptr;
    const auto s = summarize_project(client, idx, cg);
    EXPECT_EQ(s.functions.at("test.leaf").behavior, "leaf adds one to x");
    EXPECT_EQ(s.classes.at("test.Holder").behavior, "holds a value");
    // The callee digest reaches its caller's prompt.
    const auto middle_prompt = std::find_if(rec.users.begin(), rec.users.end(), [](const std::string& u) {
        return contains(u, "Task: summarize_behavior") && contains(u, "test.middle");
    });
    ASSERT_NE(middle_prompt, rec.users.end());
    EXPECT_NE(middle_prompt->find("leaf adds one to x"), std::string::npos);

    auto wave_of = [&](const std::string& phase, const std::string& name) {
        for (const auto& t : s.trace) {
            if (t.phase == phase && t.name == name) {
                return t.wave;
            }
        }
        return -1;
    };
    EXPECT_LT(wave_of("behavior", "test.leaf"), wave_of("behavior", "test.middle"));
    EXPECT_LT(wave_of("behavior", "test.middle"), wave_of("behavior", "test.top"));
    EXPECT_LT(wave_of("semantics", "test.top"), wave_of("semantics", "test.middle"));
    EXPECT_FALSE(s.index_summaries().at("test.leaf").empty());
}

TEST(Summarizer, CacheAvoidsRepeatCalls)
{
    const auto idx = index_sources({{"test.py", kChain}});
    const auto cg = build_call_graph(idx);
    DigestCache cache;
    auto first_ptr = client_for(echo_rules());
    auto& first = *first_ptr;
    const auto a = summarize_project(first, idx, cg, {}, &cache);
    auto second_ptr = client_for(echo_rules());
    auto& second = *second_ptr;
    const auto b = summarize_project(second, idx, cg, {}, &cache);
    EXPECT_GT(first.stats().calls, 0U);
    EXPECT_EQ(second.stats().calls, 0U);
    EXPECT_EQ(a.to_json(), b.to_json());

    DigestCache restored;
    restored.merge_json(cache.to_json());
    EXPECT_EQ(restored.size(), cache.size());
}

TEST(Summarizer, ParallelMatchesSerial)
{
    const auto idx = index_sources({{"test.py", kChain}});
    const auto cg = build_call_graph(idx);
    auto c1_ptr = client_for(echo_rules());
    auto& c1 = *c1_ptr;
    auto c2_ptr = client_for(echo_rules());
    auto& c2 = *c2_ptr;
    SummarizerOptions wide;
    wide.parallelism = 4;
    EXPECT_EQ(summarize_project(c1, idx, cg).to_json(), summarize_project(c2, idx, cg, wide).to_json());
}

TEST(Summarizer, FindDocProxyWalksUp)
{
    const auto root = fs::temp_directory_path() / "tf-proxy-test";
    fs::create_directories(root / "pkg" / "sub");
    write_file_atomic(root / "README.md", "Top readme.");
    const auto p = find_doc_proxy(root, "pkg/sub/m.py");
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->path, "README.md");
    EXPECT_EQ(p->text, "Top readme.");
    write_file_atomic(root / "pkg" / "README.rst", "Package readme.");
    EXPECT_EQ(find_doc_proxy(root, "pkg/sub/m.py")->path, "pkg/README.rst");
    fs::remove_all(root);
    EXPECT_FALSE(find_doc_proxy(root, "pkg/m.py").has_value());
}

TEST(Summarizer, CacheKeysDependOnInputs)
{
    EXPECT_NE(DigestCache::key("behavior", "src", {"a"}), DigestCache::key("behavior", "src", {"b"}));
    EXPECT_NE(DigestCache::key("behavior", "src", {}), DigestCache::key("semantics", "src", {}));
    EXPECT_EQ(DigestCache::key("behavior", "src", {"a"}), DigestCache::key("behavior", "src", {"a"}));
}
