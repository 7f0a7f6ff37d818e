// SPDX-License-Identifier: Apache-2.0
#include "typeforge/call_graph.hpp"
#include "typeforge/code_index.hpp"
#include "typeforge/embedding.hpp"
#include "typeforge/knowledge_base.hpp"
#include "typeforge/llm.hpp"
#include "typeforge/type_resolver.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace typeforge;

namespace {

std::string synthetic_module(int classes, int seed)
{
    std::mt19937 rng(static_cast<unsigned>(seed));
    std::string src;
    for (int c = 0; c < classes; ++c) {
        const auto name = "C" + std::to_string(c);
        src += "class " + name + ":\n    def __init__(self, a, b):\n";
        for (int f = 0; f < 4; ++f) {
            src += "        self.f" + std::to_string(rng() % 12) + " = a\n";
        }
        for (int m = 0; m < 4; ++m) {
            const auto callee = rng() % static_cast<unsigned>(classes);
            src += "\n    def m" + std::to_string(rng() % 12) + "_" + std::to_string(m) + "(self, x):\n";
            src += "        if x:\n            return helper" + std::to_string(callee) + "(x) + self.f1\n";
            src += "        return x\n";
        }
        src += "\n\ndef helper" + std::to_string(c) + "(v):\n    return v * 2\n\n\n";
    }
    return src;
}

void BM_IndexSources(benchmark::State& state)
{
    const auto src = synthetic_module(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index_sources({{"pkg/m.py", src}}));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(src.size()));
}
BENCHMARK(BM_IndexSources)->Arg(10)->Arg(100);

void BM_CallGraph(benchmark::State& state)
{
    const auto idx = index_sources({{"pkg/m.py", synthetic_module(static_cast<int>(state.range(0)), 2)}});
    for (auto _ : state) {
        const auto cg = build_call_graph(idx);
        benchmark::DoNotOptimize(behavior_order(cg));
    }
}
BENCHMARK(BM_CallGraph)->Arg(10)->Arg(100);

void BM_CandidateClasses(benchmark::State& state)
{
    const auto idx = index_sources({{"pkg/m.py", synthetic_module(static_cast<int>(state.range(0)), 3)}});
    ParamFeature f;
    f.field_accesses = {"f1"};
    for (auto _ : state) {
        benchmark::DoNotOptimize(candidate_classes(idx, f));
    }
}
BENCHMARK(BM_CandidateClasses)->Arg(10)->Arg(100);

void BM_Retrieve(benchmark::State& state)
{
    auto embedder = std::make_shared<HashedEmbedder>(256);
    KnowledgeBase kb(embedder);
    std::mt19937 rng(4);
    const std::vector<std::string> words = {"parse", "node", "graph", "token", "file", "import", "edge", "cache",
                                            "config", "loader", "module", "path", "value", "stack", "queue"};
    for (int i = 0; i < state.range(0); ++i) {
        KBDocument d;
        d.doc_id = document_id(DocKind::Function, "m.f" + std::to_string(i), "");
        for (int w = 0; w < 20; ++w) {
            d.summary += words[rng() % words.size()] + " ";
        }
        d.source_code = {"m", "f" + std::to_string(i), "def f(): pass", ""};
        kb.insert(d);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(kb.retrieve("graph node token edge", kDefaultRetrievalK, kDefaultLambda));
    }
}
BENCHMARK(BM_Retrieve)->Arg(100)->Arg(1000)->Arg(10000);

void BM_TokenCount(benchmark::State& state)
{
    const auto src = synthetic_module(50, 5);
    const llm::TokenCounter counter;
    for (auto _ : state) {
        benchmark::DoNotOptimize(counter.count(src));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(src.size()));
}
BENCHMARK(BM_TokenCount);

} // namespace

BENCHMARK_MAIN();
