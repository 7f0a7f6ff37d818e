// SPDX-License-Identifier: Apache-2.0
#include "typeforge/code_index.hpp"
#include "typeforge/embedding.hpp"
#include "typeforge/error.hpp"
#include "typeforge/knowledge_base.hpp"
#include "typeforge/llm.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace typeforge;
namespace fs = std::filesystem;

namespace {

const char* kLib = R"(class Stack:
    """A LIFO stack of items."""

    def __init__(self):
        self.items = []

    def push(self, item):
        self.items.append(item)


def parse_config(text):
    """Parse a configuration file into a dictionary."""
    return dict(line.split("=") for line in text.splitlines())


def bare(a, b=2):
    return a
)";

std::shared_ptr<HashedEmbedder> hashed()
{
    return std::make_shared<HashedEmbedder>(64);
}

llm::LlmClient scripted(const std::string& reply)
{
    return llm::LlmClient(
        std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptedBackend::Rule>{{{}, {}, reply}}));
}

} // namespace

TEST(Embedding, HashedIsUnitNormAndDeterministic)
{
    HashedEmbedder e(64);
    const auto a = e.embed("push an item onto the stack");
    EXPECT_EQ(a.size(), 64U);
    EXPECT_NEAR(norm(a), 1.0, 1e-12);
    EXPECT_EQ(a, e.embed("push an item onto the stack"));
    EXPECT_THROW(e.embed("   "), Error);
}

TEST(Embedding, HashedSplitsIdentifiers)
{
    const auto terms = HashedEmbedder::terms("pointToNode point_to_node");
    EXPECT_NE(std::find(terms.begin(), terms.end(), "point"), terms.end());
    EXPECT_NE(std::find(terms.begin(), terms.end(), "node"), terms.end());
    EXPECT_NE(std::find(terms.begin(), terms.end(), "point_to_node"), terms.end());
}

TEST(Embedding, CosineBasics)
{
    const Vector a{1, 0};
    const Vector b{0, 1};
    EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
    EXPECT_DOUBLE_EQ(cosine(a, Vector{0, 0}), 0.0);
}

TEST(Mmr, FirstPickIsMostRelevantAndDiversityApplies)
{
    const Vector q{1, 0, 0};
    const Vector near1{1, 0.1, 0};
    const Vector near2{1, 0.11, 0};
    const Vector other{0.6, 0, 0.8};
    const std::vector<const Vector*> c{&near1, &near2, &other};
    EXPECT_EQ(mmr_select(q, c, 1, 0.5), std::vector<std::size_t>{0});
    EXPECT_EQ(mmr_select(q, c, 2, 1.0), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(mmr_select(q, c, 2, 0.3), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(mmr_select(q, c, 10, 0.5).size(), 3U);
    EXPECT_TRUE(mmr_select(q, {}, 3, 0.5).empty());
}

TEST(Mmr, TiesGoToEarlierCandidate)
{
    const Vector q{1, 1};
    const Vector a{1, 0};
    const Vector b{0, 1};
    EXPECT_EQ(mmr_select(q, {&a, &b}, 1, 0.5), std::vector<std::size_t>{0});
    EXPECT_EQ(mmr_select(q, {&b, &a}, 1, 0.5), std::vector<std::size_t>{0});
}

TEST(KnowledgeBase, BuildFallsBackToDocstringThenSignature)
{
    const auto idx = index_sources({{"lib.py", kLib}});
    BuildReport report;
    const auto kb = build_kb(idx, {{"lib.Stack.push", "Adds an item to the top."}}, hashed(), &report);
    std::map<std::string, KBDocument> by_name;
    for (const auto& d : kb.documents()) {
        by_name[d.qualified_name] = d;
    }
    EXPECT_FALSE(by_name.at("lib.Stack.push").summary_fallback);
    EXPECT_EQ(by_name.at("lib.parse_config").summary, "Parse a configuration file into a dictionary.");
    EXPECT_TRUE(by_name.at("lib.parse_config").summary_fallback);
    EXPECT_EQ(by_name.at("lib.bare").summary, idx.at("lib.bare").signature());
    EXPECT_EQ(by_name.at("lib.Stack").doc_kind, DocKind::SubjectClass);
    EXPECT_EQ(report.fallbacks.size(), kb.size() - 1);
}

TEST(KnowledgeBase, InsertRejectsDuplicateIds)
{
    KnowledgeBase kb(hashed());
    KBDocument d;
    d.doc_id = "x";
    d.summary = "something";
    d.source_code = {"m", "f", "def f(): pass", ""};
    EXPECT_TRUE(kb.insert(d));
    EXPECT_FALSE(kb.insert(d));
    EXPECT_EQ(kb.size(), 1U);
    d.doc_id = "y";
    d.embedding = Vector(3, 1.0);
    EXPECT_THROW(kb.insert(d), Error);
}

TEST(KnowledgeBase, RetrieveHonoursFilterAndK)
{
    const auto idx = index_sources({{"lib.py", kLib}});
    const auto kb = build_kb(idx, {}, hashed());
    const auto hits = kb.retrieve("parse a configuration file", 2);
    ASSERT_EQ(hits.size(), 2U);
    EXPECT_EQ(kb.find(hits[0].doc_id)->qualified_name, "lib.parse_config");
    const auto classes = kb.retrieve("stack", 5, 0.5, [](const KBDocument& d) { return d.doc_kind == DocKind::SubjectClass; });
    ASSERT_EQ(classes.size(), 1U);
    EXPECT_EQ(kb.query_count(), 2U);
}

TEST(KnowledgeBase, SaveLoadRoundTrip)
{
    const auto idx = index_sources({{"lib.py", kLib}});
    const auto kb = build_kb(idx, {}, hashed());
    const auto path = fs::temp_directory_path() / "tf-kb-test.jsonl";
    kb.save(path);
    const auto back = KnowledgeBase::load(path, hashed());
    EXPECT_TRUE(back.same_documents(kb));
    EXPECT_THROW(KnowledgeBase::load(path, std::make_shared<HashedEmbedder>(32)), Error);
    fs::remove(path);
    fs::remove(path.string() + ".meta.json");
}

TEST(KnowledgeBase, AddTestCaseOnlyForPassingTests)
{
    KnowledgeBase kb(hashed());
    GeneratedTest t;
    t.test_id = "lib_f_r1";
    t.focal = "lib.f";
    t.module_path = "lib";
    t.source = "def test_f():\n    assert f() == 1\n";
    t.status = TestStatus::Discarded;
    EXPECT_THROW(kb.add_test_case(t), Error);
    t.status = TestStatus::Passing;
    kb.add_test_case(t);
    kb.add_test_case(t);
    ASSERT_EQ(kb.size(), 1U);
    const auto d = kb.documents().front();
    EXPECT_EQ(d.doc_kind, DocKind::TestCase);
    ASSERT_TRUE(d.test_cases.has_value());
    EXPECT_EQ(d.test_cases->source_code, t.source);
}

TEST(Consolidate, SelectsMentionedDocuments)
{
    const auto idx = index_sources({{"lib.py", kLib}});
    const auto kb = build_kb(idx, {}, hashed());
    const auto hits = kb.retrieve("stack push item", 3);
    std::vector<KBDocument> docs;
    for (const auto& h : hits) {
        docs.push_back(*kb.find(h.doc_id));
    }
    auto client = scripted("Use Stack: it lives in module lib.");
    const auto bundle = consolidate(client, "stack", docs, hits);
    ASSERT_FALSE(bundle.selected.empty());
    for (const auto& id : bundle.selected) {
        EXPECT_NE(kb.find(id)->source_code.name.find("Stack"), std::string::npos);
        EXPECT_NE(bundle.provenance.at(id).find("rank"), std::string::npos);
    }
    EXPECT_EQ(bundle.consolidated, "Use Stack: it lives in module lib.");
}

TEST(Consolidate, EmptyInputMakesNoCall)
{
    auto client = scripted("unused");
    const auto bundle = consolidate(client, "q", {});
    EXPECT_TRUE(bundle.selected.empty());
    EXPECT_EQ(client.stats().calls, 0U);
}
