// SPDX-License-Identifier: Apache-2.0
#include "typeforge/python/syntax.hpp"

#include <gtest/gtest.h>

using namespace typeforge::python;

TEST(Tokenize, IndentDedentAndStrings)
{
    const auto toks = tokenize("def f(x):\n    return 'a' + \"\"\"b\nc\"\"\"\n");
    std::vector<TokenKind> kinds;
    for (const auto& t : toks) {
        kinds.push_back(t.kind);
    }
    EXPECT_EQ(std::count(kinds.begin(), kinds.end(), TokenKind::Indent), 1);
    EXPECT_EQ(std::count(kinds.begin(), kinds.end(), TokenKind::Dedent), 1);
    EXPECT_EQ(kinds.back(), TokenKind::EndMarker);
    const auto triple = std::find_if(toks.begin(), toks.end(),
                                     [](const Token& t) { return t.kind == TokenKind::String && t.line == 2 && t.end_line == 3; });
    EXPECT_NE(triple, toks.end());
}

TEST(Tokenize, BracketsSuppressNewlines)
{
    const auto toks = tokenize("x = f(1,\n      2)\n");
    const auto newlines = std::count_if(toks.begin(), toks.end(), [](const Token& t) { return t.kind == TokenKind::Newline; });
    EXPECT_EQ(newlines, 1);
}

TEST(Module, StatementStructure)
{
    const Module m("import os\n\nclass A:\n    def f(self):\n        if x:\n            pass\n        return 1\n");
    ASSERT_EQ(m.statements().size(), 2U);
    const auto& cls = m.statements()[1];
    EXPECT_TRUE(cls.compound);
    EXPECT_EQ(cls.start_line, 3);
    EXPECT_EQ(cls.end_line, 7);
    ASSERT_EQ(cls.body.size(), 1U);
    EXPECT_EQ(cls.body[0].body.size(), 2U);
    EXPECT_TRUE(is_definition(cls, m));
    EXPECT_EQ(find_definition(m.statements(), m, 4), &cls.body[0]);
    EXPECT_EQ(m.lines(3, 4), "class A:\n    def f(self):");
}

TEST(Module, RejectsUnbalancedIndent)
{
    EXPECT_THROW(Module("def f():\n        x = 1\n    y = 2\n"), SyntaxError);
}

TEST(Module, RejectsUnclosedBracket)
{
    EXPECT_THROW(Module("x = (1,\n"), SyntaxError);
}

TEST(Syntax, SplitTopLevel)
{
    const Module m("f(a, g(b, c), [d, e])\n");
    const auto& toks = m.tokens();
    const auto open = 1U;
    const auto close = m.matching_close(open);
    const auto parts = split_top_level(toks, open + 1, close);
    ASSERT_EQ(parts.size(), 3U);
    EXPECT_EQ(m.text(parts[1].first, parts[1].second), "g(b, c)");
}

TEST(Syntax, StringLiteralBody)
{
    EXPECT_EQ(string_literal_body("'abc'"), "abc");
    EXPECT_EQ(string_literal_body("r\"x\\n\""), "x\\n");
    EXPECT_EQ(string_literal_body("\"\"\"doc\"\"\""), "doc");
}

TEST(Syntax, CleanDocstring)
{
    EXPECT_EQ(clean_docstring("\n    First line.\n\n    More.\n    "), "First line.\n\nMore.");
}

TEST(Syntax, Keywords)
{
    EXPECT_TRUE(is_keyword("lambda"));
    EXPECT_FALSE(is_keyword("print"));
}
