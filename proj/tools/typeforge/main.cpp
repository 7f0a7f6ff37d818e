// SPDX-License-Identifier: Apache-2.0
#include "typeforge/config.hpp"
#include "typeforge/pipeline.hpp"
#include "typeforge/util.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPipeline = 2;

struct Flags {
    std::string config;
    std::string project;
    std::optional<int> rounds;
    std::string mode;
    bool record = false;
    std::string cassette;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> parallelism;
    std::string out;
    std::string responder;
    std::string executions;
    std::vector<std::string> targets;
    bool quiet = false;
};

json overrides(const Flags& f)
{
    json o = json::object();
    if (!f.project.empty()) {
        o["project_root"] = f.project;
    }
    if (f.rounds) {
        o["rounds"] = *f.rounds;
    }
    if (!f.mode.empty()) {
        o["mode"] = f.mode;
    }
    if (f.record) {
        o["mode"] = "record";
    }
    if (!f.cassette.empty()) {
        o["cassette_path"] = f.cassette;
    }
    if (f.budget) {
        o["llm"]["budget_tokens"] = *f.budget;
    }
    if (!f.responder.empty()) {
        o["llm"]["responder"] = f.responder;
    }
    if (f.parallelism) {
        o["sandbox"]["parallelism"] = *f.parallelism;
    }
    if (!f.executions.empty()) {
        o["sandbox"]["executions"] = f.executions;
    }
    if (!f.out.empty()) {
        o["out_dir"] = f.out;
    }
    if (!f.targets.empty()) {
        o["targets"] = f.targets;
    }
    return o;
}

typeforge::RunConfig load(const Flags& f)
{
    const json file = f.config.empty() ? json::object() : typeforge::read_config_file(f.config);
    auto config = typeforge::resolve_config(file, overrides(f));
    fs::create_directories(config.out_dir);
    const auto echo = config.to_json().dump(2);
    typeforge::write_file_atomic(config.out_dir / "config.json", echo + "\n");
    if (!f.quiet) {
        std::cerr << "resolved config:\n" << echo << "\n";
    }
    return config;
}

void emit(const std::string& text, const std::string& out)
{
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        typeforge::write_file_atomic(out, text);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Coverage-guided unit test generation for Python projects"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "typeforge 0.1.0");

    Flags f;
    auto* cfg = app.add_option_group("configuration", "flags override the config file");
    cfg->add_option("--config", f.config, "TOML (.toml) or JSON (.json) config file");
    cfg->add_option("--project", f.project, "project root to analyse");
    cfg->add_option("--rounds", f.rounds, "maximum generation rounds (>= 1)");
    cfg->add_option("--mode", f.mode, "LLM mode")->check(CLI::IsMember({"live", "replay", "record"}));
    cfg->add_flag("--record", f.record, "same as --mode record");
    cfg->add_option("--cassette", f.cassette, "cassette file for replay or record");
    cfg->add_option("--budget", f.budget, "prompt budget in tokens");
    cfg->add_option("--parallelism", f.parallelism, "concurrent focal functions");
    cfg->add_option("--out", f.out, "output directory (default <project>/.typeforge)");
    cfg->add_option("--responder", f.responder, "scripted responder rules used instead of an HTTP endpoint");
    cfg->add_option("--executions", f.executions, "canned execution results used instead of the sandbox runner");
    cfg->add_option("--target", f.targets, "restrict generation to a function or module (repeatable)");
    cfg->add_flag("-q,--quiet", f.quiet, "do not echo the resolved config");

    auto* index_cmd = app.add_subcommand("index", "index the project and dump it as JSON");
    index_cmd->fallthrough();
    std::string index_out;
    index_cmd->add_option("--dump", index_out, "write the index JSON here (default stdout)");

    auto* graph_cmd = app.add_subcommand("graph", "build the call graph");
    graph_cmd->fallthrough();
    std::string graph_format = "json";
    std::string graph_out;
    graph_cmd->add_option("--format", graph_format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
    graph_cmd->add_option("--dump", graph_out, "output file (default stdout)");

    auto* sum_cmd = app.add_subcommand("summarize", "summarize every function and class");
    sum_cmd->fallthrough();
    std::string sum_out;
    sum_cmd->add_option("--summaries-out", sum_out, "write summaries JSON here (default stdout)");

    auto* resolve_cmd = app.add_subcommand("resolve", "emit argument plans for one function");
    resolve_cmd->fallthrough();
    std::string function;
    resolve_cmd->add_option("--function", function, "qualified name of the focal function")->required();

    auto* gen_cmd = app.add_subcommand("generate", "run the full generation loop");
    gen_cmd->fallthrough();

    auto* report_cmd = app.add_subcommand("report", "print the report of the last generate run");
    report_cmd->fallthrough();
    bool report_json = false;
    report_cmd->add_flag("--json", report_json, "print JSON instead of a table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    typeforge::RunConfig config;
    try {
        config = load(f);
    } catch (const typeforge::Error& e) {
        std::cerr << "typeforge: configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "typeforge: configuration error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        typeforge::Session session(config);
        if (index_cmd->parsed()) {
            emit(session.index().to_json().dump(2) + "\n", index_out);
        } else if (graph_cmd->parsed()) {
            const auto& cg = session.graph();
            emit(graph_format == "dot" ? cg.to_dot() : cg.to_json().dump(2) + "\n", graph_out);
        } else if (sum_cmd->parsed()) {
            emit(session.summaries().to_json().dump(2) + "\n", sum_out);
        } else if (resolve_cmd->parsed()) {
            json plans = json::array();
            for (const auto& p : session.resolve(function)) {
                plans.push_back(typeforge::to_json(p));
            }
            std::cout << json{{"function", function}, {"plans", plans}}.dump(2) << "\n";
        } else if (gen_cmd->parsed()) {
            const auto result = session.generate();
            std::cout << typeforge::report_table(result.report);
            std::cout << "report: " << (config.out_dir / "report.json").string() << "\n";
            std::cout << "tests:  " << config.test_root.string() << "\n";
        } else if (report_cmd->parsed()) {
            const auto path = config.out_dir / "report.json";
            if (!fs::exists(path)) {
                throw typeforge::StageError("report", typeforge::ErrorCode::IoError,
                                            "no report at " + path.string() + "; run generate first");
            }
            const auto report = json::parse(typeforge::read_file(path));
            std::cout << (report_json ? report.dump(2) + "\n" : typeforge::report_table(report));
        }
        session.flush();
    } catch (const typeforge::Error& e) {
        std::cerr << "typeforge: " << e.what() << "\n";
        return e.code() == typeforge::ErrorCode::ConfigError ? kExitConfig : kExitPipeline;
    } catch (const std::exception& e) {
        std::cerr << "typeforge: " << e.what() << "\n";
        return kExitPipeline;
    }
    return kExitOk;
}
