// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/python/syntax.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace typeforge {

enum class UnitKind { Function, Method, Constructor, SubjectClass };

std::string_view to_string(UnitKind kind) noexcept;

struct ParameterSpec {
    std::string name;
    int position = 0;
    std::optional<std::string> annotation;
    std::optional<std::string> default_value;
    bool receiver = false;
    bool variadic = false; // *args or **kwargs
    friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

struct Span {
    int start_line = 0;
    int end_line = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

struct CodeUnit {
    std::string qualified_name; ///< module_path + "." + local_name
    std::string local_name;     ///< dotted name inside its module, e.g. "Outer.method"
    UnitKind kind = UnitKind::Function;
    std::string module_path;
    std::string file; ///< path relative to the project root, '/'-separated
    std::string source;
    std::optional<std::string> docstring;
    Span span;
    std::vector<ParameterSpec> parameters;
    std::set<std::string> defined_fields;
    std::set<std::string> defined_methods;
    std::vector<std::string> decorators;
    std::vector<std::string> bases; ///< subject classes only
    bool is_async = false;
    std::string parent; ///< qualified name of the enclosing unit, empty at module level

    bool is_callable() const noexcept { return kind != UnitKind::SubjectClass; }
    std::string signature() const;
    const ParameterSpec* find_parameter(std::string_view name) const;

    friend bool operator==(const CodeUnit&, const CodeUnit&) = default;
};

struct SourceFile {
    std::string path; ///< relative, '/'-separated
    std::string module_path;
    std::string content_hash;
    bool is_test = false;
    friend bool operator==(const SourceFile&, const SourceFile&) = default;
};

struct Diagnostic {
    std::string file;
    int line = 0;
    std::string message;
    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// A single `import` or `from ... import` binding inside a module.
struct ImportBinding {
    std::string local;  ///< name bound in the importing module
    std::string module; ///< absolute dotted module
    std::string symbol; ///< imported attribute; empty for plain `import module`
    friend bool operator==(const ImportBinding&, const ImportBinding&) = default;
};

struct IndexOptions {
    std::size_t max_file_bytes = 1U << 20;
    std::size_t parallelism = 0; // 0 = hardware concurrency
};

class ProjectIndex {
public:
    ProjectIndex() = default;

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::map<std::string, CodeUnit>& units() const noexcept { return units_; }
    const std::vector<SourceFile>& files() const noexcept { return files_; }
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

    /// Lookup by full qualified name, or by a local name that is unique in the index.
    const CodeUnit* find(std::string_view name) const;
    const CodeUnit& at(std::string_view name) const;

    std::vector<const CodeUnit*> subject_classes() const;
    std::vector<const CodeUnit*> callables() const;

    /// Files mapped to each dotted module path (more than one means ambiguity).
    const std::map<std::string, std::vector<std::string>>& modules() const noexcept { return modules_; }
    const std::vector<ImportBinding>& imports(const std::string& module_path) const;

    /// Parsed module for a relative file path, or nullptr for skipped files.
    const python::Module* module_for_file(const std::string& file) const;
    const SourceFile* file_for_module(const std::string& module_path) const;

    nlohmann::json to_json() const;

    bool operator==(const ProjectIndex& other) const;

private:
    friend ProjectIndex index_project(const std::filesystem::path&, const IndexOptions&);
    friend ProjectIndex index_sources(const std::map<std::string, std::string>&);

    void add_file(const std::string& rel, const std::string& content);

    std::filesystem::path root_;
    std::map<std::string, CodeUnit> units_;
    std::vector<SourceFile> files_;
    std::vector<Diagnostic> diagnostics_;
    std::map<std::string, std::vector<std::string>> modules_;
    std::map<std::string, std::vector<ImportBinding>> imports_;
    std::map<std::string, std::shared_ptr<const python::Module>> parsed_;
};

/// Parses every *.py file under `root`. Throws RootNotFound / PermissionDenied.
ProjectIndex index_project(const std::filesystem::path& root, const IndexOptions& options = {});

/// Builds an index from in-memory files (relative path -> content); used by tests and tools.
ProjectIndex index_sources(const std::map<std::string, std::string>& files);

std::string module_path_for(const std::string& relative_file);

/// `from <module> import <top-level binding>` for `unit`. Throws AmbiguousModule.
std::string resolve_module_path(const CodeUnit& unit, const ProjectIndex& index);

bool is_test_file(const std::string& relative_file);

} // namespace typeforge
