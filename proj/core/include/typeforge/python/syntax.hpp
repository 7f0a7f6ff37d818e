// SPDX-License-Identifier: Apache-2.0
//
// Tokenizer and statement-level parser for the subject language (Python).
// The parser recovers the block structure (logical lines, compound statements
// and their suites) and leaves expressions as token ranges; the analyses in
// code_index, call_graph and type_resolver scan those ranges directly.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace typeforge::python {

enum class TokenKind { Name, Number, String, Op, Newline, Indent, Dedent, EndMarker };

struct Token {
    TokenKind kind;
    std::string text;
    int line = 0;     // 1-based
    int col = 0;      // 0-based byte column
    int end_line = 0; // line of the last character
    std::size_t begin = 0;
    std::size_t end = 0;

    bool is_op(std::string_view op) const noexcept { return kind == TokenKind::Op && text == op; }
    bool is_name(std::string_view name) const noexcept { return kind == TokenKind::Name && text == name; }
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(int line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

std::vector<Token> tokenize(std::string_view source);

bool is_keyword(std::string_view word) noexcept;

/// A simple statement, or the header of a compound statement plus its suite.
struct Statement {
    std::size_t first = 0; ///< first token of the statement or header
    std::size_t last = 0;  ///< one past the last token; headers include the ':'
    int start_line = 0;
    int end_line = 0; ///< last line of the statement including its whole suite
    int header_end_line = 0;
    bool compound = false;
    std::vector<Statement> body;
};

class Module {
public:
    /// Throws SyntaxError when the source is not structurally valid.
    explicit Module(std::string source);

    const std::string& source() const noexcept { return source_; }
    const std::vector<Token>& tokens() const noexcept { return tokens_; }
    const std::vector<Statement>& statements() const noexcept { return statements_; }

    const Token& token(std::size_t i) const { return tokens_.at(i); }

    /// Source text between the start of token `first` and the end of token `last - 1`.
    std::string text(std::size_t first, std::size_t last) const;

    /// Lines [start_line, end_line] (1-based, inclusive) joined with '\n'.
    std::string lines(int start_line, int end_line) const;

    int line_count() const noexcept { return static_cast<int>(line_offsets_.size()); }

    /// Index of the matching closing bracket for the opener at `open`.
    std::size_t matching_close(std::size_t open) const;

private:
    std::string source_;
    std::vector<Token> tokens_;
    std::vector<Statement> statements_;
    std::vector<std::size_t> line_offsets_;
};

/// Splits the token range [first, last) at top-level commas.
std::vector<std::pair<std::size_t, std::size_t>> split_top_level(const std::vector<Token>& tokens,
                                                                 std::size_t first,
                                                                 std::size_t last,
                                                                 std::string_view separator = ",");

/// Content of a string-literal token with prefix and quotes removed (escapes kept verbatim).
std::string string_literal_body(std::string_view literal);

/// Compound `def` / `async def` / `class` statement starting on `start_line`, searched recursively.
const Statement* find_definition(const std::vector<Statement>& stmts, const Module& m, int start_line);

bool is_definition(const Statement& s, const Module& m);

/// Docstring normalization: strip leading blank lines and the common indentation.
std::string clean_docstring(std::string_view raw);

} // namespace typeforge::python
