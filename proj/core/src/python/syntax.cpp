// SPDX-License-Identifier: Apache-2.0
#include "typeforge/python/syntax.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

namespace typeforge::python {
namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async",  "await", "break",
    "class", "continue", "def",   "del",      "elif",     "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",       "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",      "while",  "with",   "yield",
};

constexpr std::array<std::string_view, 25> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=", ">=",
    "==",  "!=",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "@=", "<>",
};

constexpr std::string_view kSingleOps = "+-*/%@&|^~<>()[]{},:;.=!";

bool is_ident_start(unsigned char c) noexcept
{
    return std::isalpha(c) || c == '_' || c >= 0x80;
}

bool is_ident_char(unsigned char c) noexcept
{
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_string_prefix(std::string_view word) noexcept
{
    if (word.size() > 2) {
        return false;
    }
    std::string lower;
    for (char c : word) {
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
           lower == "rb" || lower == "fr" || lower == "rf";
}

char closer_for(char open) noexcept
{
    switch (open) {
    case '(': return ')';
    case '[': return ']';
    case '{': return '}';
    default: return '\0';
    }
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run()
    {
        indents_.push_back(0);
        while (pos_ < src_.size()) {
            if (at_line_start_ && brackets_.empty()) {
                if (handle_indentation()) {
                    continue;
                }
            }
            scan_token();
        }
        if (!brackets_.empty()) {
            throw SyntaxError(bracket_lines_.back(), std::string("'") + brackets_.back() + "' was never closed");
        }
        if (line_has_tokens_) {
            push(TokenKind::Newline, "", pos_, pos_);
        }
        while (indents_.size() > 1) {
            indents_.pop_back();
            push(TokenKind::Dedent, "", pos_, pos_);
        }
        push(TokenKind::EndMarker, "", pos_, pos_);
        return std::move(tokens_);
    }

private:
    // Returns true when the whole line was consumed (blank or comment-only).
    bool handle_indentation()
    {
        std::size_t p = pos_;
        int width = 0;
        while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
            if (src_[p] == '\t') {
                width = (width / 8 + 1) * 8;
            } else if (src_[p] == ' ') {
                ++width;
            } else {
                width = 0;
            }
            ++p;
        }
        if (p >= src_.size()) {
            pos_ = p;
            return true;
        }
        const char c = src_[p];
        if (c == '#' || c == '\n' || c == '\r' || (c == '\\' && p + 1 < src_.size() && src_[p + 1] == '\n')) {
            while (p < src_.size() && src_[p] != '\n') {
                ++p;
            }
            if (p < src_.size()) {
                ++p;
                ++line_;
                line_start_ = p;
            }
            pos_ = p;
            return true;
        }
        at_line_start_ = false;
        if (width > indents_.back()) {
            indents_.push_back(width);
            push(TokenKind::Indent, "", p, p);
        } else {
            while (width < indents_.back()) {
                indents_.pop_back();
                push(TokenKind::Dedent, "", p, p);
            }
            if (width != indents_.back()) {
                throw SyntaxError(line_, "unindent does not match any outer indentation level");
            }
        }
        pos_ = p;
        return false;
    }

    void scan_token()
    {
        const auto c = static_cast<unsigned char>(src_[pos_]);
        if (c == ' ' || c == '\t' || c == '\f') {
            ++pos_;
            return;
        }
        if (c == '\r') {
            ++pos_;
            return;
        }
        if (c == '\n') {
            if (brackets_.empty() && line_has_tokens_) {
                push(TokenKind::Newline, "\n", pos_, pos_ + 1);
                line_has_tokens_ = false;
                at_line_start_ = true;
            }
            ++pos_;
            ++line_;
            line_start_ = pos_;
            if (brackets_.empty()) {
                at_line_start_ = true;
            }
            return;
        }
        if (c == '#') {
            while (pos_ < src_.size() && src_[pos_] != '\n') {
                ++pos_;
            }
            return;
        }
        if (c == '\\') {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && src_[p] == '\r') {
                ++p;
            }
            if (p < src_.size() && src_[p] == '\n') {
                pos_ = p + 1;
                ++line_;
                line_start_ = pos_;
                return;
            }
            throw SyntaxError(line_, "unexpected character after line continuation character");
        }
        if (c == '"' || c == '\'') {
            scan_string(pos_, pos_);
            return;
        }
        if (is_ident_start(c)) {
            std::size_t p = pos_;
            while (p < src_.size() && is_ident_char(static_cast<unsigned char>(src_[p]))) {
                ++p;
            }
            const auto word = src_.substr(pos_, p - pos_);
            if (p < src_.size() && (src_[p] == '"' || src_[p] == '\'') && is_string_prefix(word)) {
                scan_string(pos_, p);
                return;
            }
            push(TokenKind::Name, std::string(word), pos_, p);
            pos_ = p;
            return;
        }
        if (std::isdigit(c) || (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::size_t p = pos_;
            while (p < src_.size()) {
                const auto d = static_cast<unsigned char>(src_[p]);
                if (std::isalnum(d) || d == '_' || d == '.') {
                    ++p;
                } else if ((d == '+' || d == '-') && p > pos_ &&
                           (src_[p - 1] == 'e' || src_[p - 1] == 'E') &&
                           !(src_.substr(pos_, 2) == "0x" || src_.substr(pos_, 2) == "0X")) {
                    ++p;
                } else {
                    break;
                }
            }
            push(TokenKind::Number, std::string(src_.substr(pos_, p - pos_)), pos_, p);
            pos_ = p;
            return;
        }
        for (auto op : kOperators) {
            if (src_.substr(pos_, op.size()) == op) {
                push(TokenKind::Op, std::string(op), pos_, pos_ + op.size());
                pos_ += op.size();
                return;
            }
        }
        if (kSingleOps.find(static_cast<char>(c)) != std::string_view::npos) {
            const char ch = static_cast<char>(c);
            if (ch == '(' || ch == '[' || ch == '{') {
                brackets_.push_back(ch);
                bracket_lines_.push_back(line_);
            } else if (ch == ')' || ch == ']' || ch == '}') {
                if (brackets_.empty()) {
                    throw SyntaxError(line_, std::string("unmatched '") + ch + "'");
                }
                if (closer_for(brackets_.back()) != ch) {
                    throw SyntaxError(line_, std::string("closing parenthesis '") + ch +
                                                 "' does not match opening parenthesis '" +
                                                 brackets_.back() + "'");
                }
                brackets_.pop_back();
                bracket_lines_.pop_back();
            }
            push(TokenKind::Op, std::string(1, ch), pos_, pos_ + 1);
            ++pos_;
            return;
        }
        throw SyntaxError(line_, std::string("invalid character '") + static_cast<char>(c) + "'");
    }

    void scan_string(std::size_t start, std::size_t quote_pos)
    {
        const int start_line = line_;
        const char q = src_[quote_pos];
        const bool triple = src_.substr(quote_pos, 3) == std::string(3, q);
        std::size_t p = quote_pos + (triple ? 3 : 1);
        while (true) {
            if (p >= src_.size()) {
                throw SyntaxError(start_line, triple ? "unterminated triple-quoted string literal"
                                                     : "unterminated string literal");
            }
            const char ch = src_[p];
            if (ch == '\\') {
                if (p + 1 < src_.size() && src_[p + 1] == '\n') {
                    ++line_;
                }
                p += 2;
                continue;
            }
            if (ch == '\n') {
                if (!triple) {
                    throw SyntaxError(start_line, "unterminated string literal");
                }
                ++line_;
                ++p;
                continue;
            }
            if (ch == q) {
                if (!triple) {
                    ++p;
                    break;
                }
                if (src_.substr(p, 3) == std::string(3, q)) {
                    p += 3;
                    break;
                }
            }
            ++p;
        }
        Token tok{TokenKind::String, std::string(src_.substr(start, p - start)), start_line,
                  static_cast<int>(start - line_start_of(start)), line_, start, p};
        tokens_.push_back(std::move(tok));
        line_has_tokens_ = true;
        pos_ = p;
    }

    std::size_t line_start_of(std::size_t offset) const
    {
        const auto nl = src_.rfind('\n', offset == 0 ? 0 : offset - 1);
        if (offset == 0 || nl == std::string_view::npos) {
            return 0;
        }
        return nl + 1;
    }

    void push(TokenKind kind, std::string text, std::size_t begin, std::size_t end)
    {
        Token tok{kind, std::move(text), line_, static_cast<int>(begin - line_start_), line_, begin, end};
        if (kind == TokenKind::Newline || kind == TokenKind::Indent || kind == TokenKind::Dedent ||
            kind == TokenKind::EndMarker) {
            tok.col = 0;
        } else {
            line_has_tokens_ = true;
        }
        tokens_.push_back(std::move(tok));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::size_t line_start_ = 0;
    bool at_line_start_ = true;
    bool line_has_tokens_ = false;
    std::vector<int> indents_;
    std::vector<char> brackets_;
    std::vector<int> bracket_lines_;
    std::vector<Token> tokens_;
};

bool is_compound_keyword(std::string_view w) noexcept
{
    return w == "if" || w == "elif" || w == "else" || w == "for" || w == "while" || w == "try" ||
           w == "except" || w == "finally" || w == "with" || w == "def" || w == "class";
}

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : t_(tokens) {}

    std::vector<Statement> parse_module()
    {
        auto stmts = parse_block(/*nested=*/false);
        if (t_[pos_].kind != TokenKind::EndMarker) {
            throw SyntaxError(t_[pos_].line, "unexpected token '" + t_[pos_].text + "'");
        }
        return stmts;
    }

private:
    std::vector<Statement> parse_block(bool nested)
    {
        std::vector<Statement> out;
        while (true) {
            const auto& tok = t_[pos_];
            if (tok.kind == TokenKind::EndMarker) {
                break;
            }
            if (tok.kind == TokenKind::Dedent) {
                if (!nested) {
                    throw SyntaxError(tok.line, "unexpected dedent");
                }
                break;
            }
            if (tok.kind == TokenKind::Indent) {
                throw SyntaxError(tok.line, "unexpected indent");
            }
            if (tok.kind == TokenKind::Newline) {
                ++pos_;
                continue;
            }
            parse_line(out);
        }
        return out;
    }

    std::size_t line_end(std::size_t from) const
    {
        std::size_t e = from;
        while (t_[e].kind != TokenKind::Newline && t_[e].kind != TokenKind::EndMarker) {
            ++e;
        }
        return e;
    }

    bool starts_compound(std::size_t first, std::size_t end) const
    {
        const auto& tok = t_[first];
        if (tok.kind != TokenKind::Name) {
            return false;
        }
        if (is_compound_keyword(tok.text)) {
            return true;
        }
        if (tok.text == "async" && first + 1 < end &&
            (t_[first + 1].is_name("def") || t_[first + 1].is_name("for") || t_[first + 1].is_name("with"))) {
            return true;
        }
        if ((tok.text == "match" || tok.text == "case") && end > first + 1 && t_[end - 1].is_op(":")) {
            const auto& next = t_[first + 1];
            return !(next.kind == TokenKind::Op &&
                     (next.text == "=" || next.text == "." || next.text == ":" || next.text == ","));
        }
        return false;
    }

    std::size_t header_colon(std::size_t first, std::size_t end) const
    {
        int depth = 0;
        int lambdas = 0;
        for (std::size_t i = first; i < end; ++i) {
            const auto& tok = t_[i];
            if (tok.kind == TokenKind::Op) {
                if (tok.text == "(" || tok.text == "[" || tok.text == "{") {
                    ++depth;
                } else if (tok.text == ")" || tok.text == "]" || tok.text == "}") {
                    --depth;
                } else if (tok.text == ":" && depth == 0) {
                    if (lambdas > 0) {
                        --lambdas;
                    } else {
                        return i;
                    }
                }
            } else if (tok.is_name("lambda") && depth == 0) {
                ++lambdas;
            }
        }
        return end;
    }

    void add_simple(std::vector<Statement>& out, std::size_t first, std::size_t end)
    {
        for (auto [b, e] : split_top_level(t_, first, end, ";")) {
            if (b == e) {
                continue;
            }
            Statement s;
            s.first = b;
            s.last = e;
            s.start_line = t_[b].line;
            s.end_line = t_[e - 1].end_line;
            s.header_end_line = s.end_line;
            check_simple(s);
            out.push_back(std::move(s));
        }
    }

    void check_simple(const Statement& s) const
    {
        const auto& head = t_[s.first];
        if (head.kind == TokenKind::Name && is_compound_keyword(head.text)) {
            throw SyntaxError(head.line, "invalid syntax near '" + head.text + "'");
        }
    }

    void parse_line(std::vector<Statement>& out)
    {
        const std::size_t first = pos_;
        const std::size_t end = line_end(first);
        if (!starts_compound(first, end)) {
            add_simple(out, first, end);
            pos_ = end;
            if (t_[pos_].kind == TokenKind::Newline) {
                ++pos_;
            }
            return;
        }
        const std::size_t colon = header_colon(first, end);
        if (colon == end) {
            throw SyntaxError(t_[first].line, "expected ':'");
        }
        validate_header(first, colon);
        Statement s;
        s.compound = true;
        s.first = first;
        s.last = colon + 1;
        s.start_line = t_[first].line;
        s.header_end_line = t_[colon].end_line;
        s.end_line = s.header_end_line;
        if (colon + 1 < end) {
            add_simple(s.body, colon + 1, end);
            pos_ = end;
            if (t_[pos_].kind == TokenKind::Newline) {
                ++pos_;
            }
        } else {
            pos_ = end;
            if (t_[pos_].kind == TokenKind::Newline) {
                ++pos_;
            }
            if (t_[pos_].kind != TokenKind::Indent) {
                throw SyntaxError(t_[first].line, "expected an indented block after '" + t_[first].text + "'");
            }
            ++pos_;
            s.body = parse_block(/*nested=*/true);
            if (t_[pos_].kind == TokenKind::Dedent) {
                ++pos_;
            }
        }
        if (s.body.empty()) {
            throw SyntaxError(t_[first].line, "expected an indented block");
        }
        s.end_line = std::max(s.end_line, s.body.back().end_line);
        out.push_back(std::move(s));
    }

    void validate_header(std::size_t first, std::size_t colon) const
    {
        std::size_t i = first;
        if (t_[i].is_name("async")) {
            ++i;
        }
        if (t_[i].is_name("def")) {
            if (i + 2 >= colon || t_[i + 1].kind != TokenKind::Name || is_keyword(t_[i + 1].text) ||
                !t_[i + 2].is_op("(")) {
                throw SyntaxError(t_[i].line, "invalid function definition");
            }
        } else if (t_[i].is_name("class")) {
            if (i + 1 >= colon || t_[i + 1].kind != TokenKind::Name || is_keyword(t_[i + 1].text)) {
                throw SyntaxError(t_[i].line, "invalid class definition");
            }
        } else if ((t_[i].is_name("else") || t_[i].is_name("try") || t_[i].is_name("finally")) && i + 1 != colon) {
            throw SyntaxError(t_[i].line, "invalid syntax after '" + t_[i].text + "'");
        } else if ((t_[i].is_name("if") || t_[i].is_name("elif") || t_[i].is_name("while") ||
                    t_[i].is_name("for") || t_[i].is_name("with")) &&
                   i + 1 == colon) {
            throw SyntaxError(t_[i].line, "invalid syntax");
        }
    }

    const std::vector<Token>& t_;
    std::size_t pos_ = 0;
};

} // namespace

bool is_keyword(std::string_view word) noexcept
{
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view source)
{
    return Lexer(source).run();
}

Module::Module(std::string source) : source_(std::move(source))
{
    line_offsets_.push_back(0);
    for (std::size_t i = 0; i < source_.size(); ++i) {
        if (source_[i] == '\n' && i + 1 < source_.size()) {
            line_offsets_.push_back(i + 1);
        }
    }
    tokens_ = tokenize(source_);
    statements_ = Parser(tokens_).parse_module();
}

std::string Module::text(std::size_t first, std::size_t last) const
{
    if (first >= last) {
        return {};
    }
    const auto b = tokens_.at(first).begin;
    const auto e = tokens_.at(last - 1).end;
    return source_.substr(b, e - b);
}

std::string Module::lines(int start_line, int end_line) const
{
    if (start_line < 1 || end_line < start_line || start_line > line_count()) {
        return {};
    }
    const auto b = line_offsets_[static_cast<std::size_t>(start_line - 1)];
    std::size_t e = source_.size();
    if (end_line < line_count()) {
        e = line_offsets_[static_cast<std::size_t>(end_line)] - 1; // drop the '\n'
    } else if (e > b && source_[e - 1] == '\n') {
        --e;
    }
    return source_.substr(b, e - b);
}

std::size_t Module::matching_close(std::size_t open) const
{
    int depth = 0;
    for (std::size_t i = open; i < tokens_.size(); ++i) {
        const auto& tok = tokens_[i];
        if (tok.kind != TokenKind::Op) {
            continue;
        }
        if (tok.text == "(" || tok.text == "[" || tok.text == "{") {
            ++depth;
        } else if (tok.text == ")" || tok.text == "]" || tok.text == "}") {
            if (--depth == 0) {
                return i;
            }
        }
    }
    return tokens_.size();
}

std::vector<std::pair<std::size_t, std::size_t>> split_top_level(const std::vector<Token>& tokens,
                                                                 std::size_t first,
                                                                 std::size_t last,
                                                                 std::string_view separator)
{
    std::vector<std::pair<std::size_t, std::size_t>> parts;
    int depth = 0;
    std::size_t start = first;
    for (std::size_t i = first; i < last; ++i) {
        const auto& tok = tokens[i];
        if (tok.kind != TokenKind::Op) {
            continue;
        }
        if (tok.text == "(" || tok.text == "[" || tok.text == "{") {
            ++depth;
        } else if (tok.text == ")" || tok.text == "]" || tok.text == "}") {
            --depth;
        } else if (depth == 0 && tok.text == separator) {
            parts.emplace_back(start, i);
            start = i + 1;
        }
    }
    if (start < last) {
        parts.emplace_back(start, last);
    }
    return parts;
}

std::string string_literal_body(std::string_view literal)
{
    std::size_t p = 0;
    while (p < literal.size() && literal[p] != '"' && literal[p] != '\'') {
        ++p;
    }
    if (p >= literal.size()) {
        return std::string(literal);
    }
    const char q = literal[p];
    const std::size_t qlen = literal.substr(p, 3) == std::string(3, q) ? 3 : 1;
    if (literal.size() < p + 2 * qlen) {
        return {};
    }
    return std::string(literal.substr(p + qlen, literal.size() - p - 2 * qlen));
}

std::string clean_docstring(std::string_view raw)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (true) {
        const auto nl = raw.find('\n', start);
        lines.emplace_back(raw.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    std::size_t margin = std::string::npos;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& l = lines[i];
        const auto content = l.find_first_not_of(" \t");
        if (content != std::string::npos) {
            margin = std::min(margin, content);
        }
    }
    auto strip_left = [](const std::string& s) {
        const auto c = s.find_first_not_of(" \t");
        return c == std::string::npos ? std::string{} : s.substr(c);
    };
    auto strip_right = [](std::string s) {
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
            s.pop_back();
        }
        return s;
    };
    lines[0] = strip_left(lines[0]);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (margin != std::string::npos && lines[i].size() >= margin) {
            lines[i] = lines[i].substr(margin);
        } else {
            lines[i] = strip_left(lines[i]);
        }
    }
    for (auto& l : lines) {
        l = strip_right(l);
    }
    while (!lines.empty() && lines.front().empty()) {
        lines.erase(lines.begin());
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i != 0) {
            out.push_back('\n');
        }
        out += lines[i];
    }
    return out;
}

const Statement* find_definition(const std::vector<Statement>& stmts, const Module& m, int start_line)
{
    for (const auto& s : stmts) {
        if (!s.compound) {
            continue;
        }
        if (s.start_line == start_line) {
            std::size_t i = s.first;
            if (m.token(i).is_name("async")) {
                ++i;
            }
            if (m.token(i).is_name("def") || m.token(i).is_name("class")) {
                return &s;
            }
        }
        if (s.start_line <= start_line && start_line <= s.end_line) {
            if (const auto* found = find_definition(s.body, m, start_line)) {
                return found;
            }
        }
    }
    return nullptr;
}

bool is_definition(const Statement& s, const Module& m)
{
    if (!s.compound) {
        return false;
    }
    std::size_t i = s.first;
    if (m.token(i).is_name("async")) {
        ++i;
    }
    return m.token(i).is_name("def") || m.token(i).is_name("class");
}

} // namespace typeforge::python
