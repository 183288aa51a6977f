#include "layoutrev/layout.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace layoutrev {
namespace {

using testing::element;
using testing::random_doc;

TEST(ParseLayout, SingleElement) {
  LayoutDoc doc = parse_layout_code("CANVAS 360 800\nBUTTON 10 20 100 40");
  EXPECT_EQ(doc.canvas_w, 360);
  EXPECT_EQ(doc.canvas_h, 800);
  ASSERT_EQ(doc.elements.size(), 1u);
  EXPECT_EQ(doc.elements[0], element("BUTTON", 10, 20, 100, 40));
}

TEST(ParseLayout, EmptyLayout) {
  LayoutDoc doc = parse_layout_code("CANVAS 360 800\n");
  EXPECT_TRUE(doc.elements.empty());
  EXPECT_EQ(serialize_layout_code(doc), "CANVAS 360 800\n");
}

TEST(ParseLayout, CommentsBlankLinesAndLabels) {
  const char* text =
      "# header comment\n"
      "\n"
      "  CANVAS   100 200  \n"
      "TEXT 0 0 10 10 \"say \\\"hi\\\" \\\\ bye\"\n"
      "   # indented comment\n"
      "ICON 5 5 1 1 \"\"\n";
  LayoutDoc doc = parse_layout_code(text);
  ASSERT_EQ(doc.elements.size(), 2u);
  EXPECT_EQ(doc.elements[0].label, std::optional<std::string>("say \"hi\" \\ bye"));
  EXPECT_EQ(doc.elements[1].label, std::optional<std::string>(""));
  EXPECT_EQ(serialize_layout_code(doc),
            "CANVAS 100 200\n"
            "TEXT 0 0 10 10 \"say \\\"hi\\\" \\\\ bye\"\n"
            "ICON 5 5 1 1 \"\"\n");
}

TEST(ParseLayout, CrLfLineEndings) {
  LayoutDoc doc = parse_layout_code("CANVAS 10 10\r\nCHIP 1 1 2 2\r\n");
  ASSERT_EQ(doc.elements.size(), 1u);
  EXPECT_EQ(doc.elements[0].cls.name, "CHIP");
}

struct ErrorCase {
  const char* text;
  std::size_t line;
  const char* reason_fragment;
};

class ParseErrors : public ::testing::TestWithParam<ErrorCase> {};

TEST_P(ParseErrors, ReportsLineAndReason) {
  const ErrorCase& c = GetParam();
  try {
    parse_layout_code(c.text);
    FAIL() << "expected ParseError for: " << c.text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), c.line) << e.what();
    EXPECT_NE(e.reason().find(c.reason_fragment), std::string::npos) << e.what();
    EXPECT_EQ(std::string(e.what()).rfind("line " + std::to_string(c.line) + ": ", 0), 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Grammar, ParseErrors,
    ::testing::Values(
        ErrorCase{"", 1, "missing CANVAS"},
        ErrorCase{"# only a comment\n", 1, "missing CANVAS"},
        ErrorCase{"BUTTON 1 1 1 1\n", 1, "missing CANVAS"},
        ErrorCase{"CANVAS 360\n", 1, "CANVAS expects 2 fields"},
        ErrorCase{"CANVAS 0 800\n", 1, "nonpositive canvas"},
        ErrorCase{"CANVAS 99999 800\n", 1, "canvas larger"},
        ErrorCase{"CANVAS 360 800\n\nWIDGET 1 1 1 1\n", 3, "unknown class 'WIDGET'"},
        ErrorCase{"CANVAS 360 800\nBUTTON 1 1.5 1 1\n", 2, "non-integer y"},
        ErrorCase{"CANVAS 360 800\nBUTTON 1 1 1\n", 2, "expects 4 coordinates, got 3"},
        ErrorCase{"CANVAS 360 800\nBUTTON 1 1 1 1 1\n", 2, "expects 4 coordinates, got 5"},
        ErrorCase{"CANVAS 360 800\nBUTTON 1 1 1 1 \"open\n", 2, "unterminated label"},
        ErrorCase{"CANVAS 360 800\nBUTTON 1 1 1 1 \"a\\n\"\n", 2, "bad escape"},
        ErrorCase{"CANVAS 360 800\nBUTTON 1 1 1 1 \"a\" x\n", 2, "trailing text"},
        ErrorCase{"CANVAS 360 800\nCANVAS 360 800\n", 2, "duplicate CANVAS"},
        ErrorCase{"CANVAS 360 800\nBUTTON 99999999999 1 1 1\n", 2, "x out of range"},
        ErrorCase{"CANVAS 360 800\nBUTTON 10 20 -5 40", 2, "nonpositive width"},
        ErrorCase{"CANVAS 360 800\nBUTTON -4 20 5 40", 2, "negative x"},
        ErrorCase{"CANVAS 360 800\nBUTTON 300 20 61 40", 2, "exceeds canvas width"}));

TEST(ParseLayout, RawModeKeepsInvalidGeometry) {
  LayoutDoc doc =
      parse_layout_code("CANVAS 360 800\nBUTTON -4 20 -5 40\n", ClassRegistry::defaults(),
                        ParseMode::kRaw);
  ASSERT_EQ(doc.elements.size(), 1u);
  EXPECT_EQ(doc.elements[0].x, -4);
  EXPECT_EQ(doc.elements[0].w, -5);
}

TEST(ParseLayout, CustomRegistry) {
  ClassRegistry reg;
  reg.add({7, "WIDGET"});
  LayoutDoc doc = parse_layout_code("CANVAS 10 10\nWIDGET 0 0 1 1\n", reg);
  EXPECT_EQ(doc.elements[0].cls.id, 7);
  EXPECT_THROW(parse_layout_code("CANVAS 10 10\nBUTTON 0 0 1 1\n", reg), ParseError);
}

TEST(ClassRegistry, RejectsBadNamesAndDuplicates) {
  ClassRegistry reg;
  EXPECT_THROW(reg.add({0, "button"}), std::invalid_argument);
  EXPECT_THROW(reg.add({0, "1BUTTON"}), std::invalid_argument);
  EXPECT_THROW(reg.add({0, ""}), std::invalid_argument);
  reg.add({0, "A_1"});
  EXPECT_THROW(reg.add({0, "B"}), std::invalid_argument);
  EXPECT_THROW(reg.add({1, "A_1"}), std::invalid_argument);
  EXPECT_EQ(ClassRegistry::defaults().size(), 20u);
}

TEST(Serialize, OrderIsSignificant) {
  LayoutDoc a;
  a.elements = {element("BUTTON", 0, 0, 1, 1), element("TEXT", 0, 0, 1, 1)};
  LayoutDoc b = a;
  std::swap(b.elements[0], b.elements[1]);
  EXPECT_NE(serialize_layout_code(a), serialize_layout_code(b));
  EXPECT_NE(a, b);
}

TEST(Validate, Rules) {
  LayoutDoc ok;
  ok.elements = {element("BUTTON", 0, 0, 360, 800)};
  EXPECT_TRUE(validate_layout(ok).ok());

  LayoutDoc neg;
  neg.elements = {element("BUTTON", -4, 0, 10, 10)};
  auto r = validate_layout(neg);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rule, "negative-coordinate");
  EXPECT_EQ(r.violations[0].element, 0u);

  LayoutDoc over;
  over.elements = {element("BUTTON", 0, 0, 10, 10), element("TEXT", 1, 0, 360, 10)};
  r = validate_layout(over);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rule, "out-of-bounds");
  EXPECT_EQ(r.violations[0].element, 1u);

  LayoutDoc many;
  many.elements = {element("BUTTON", -1, -1, 0, 0)};
  r = validate_layout(many);
  EXPECT_EQ(r.violations.size(), 4u);
}

TEST(Clip, IntersectsAndDrops) {
  LayoutDoc doc;
  doc.canvas_w = 100;
  doc.canvas_h = 50;
  doc.elements = {element("BUTTON", -10, 40, 30, 30), element("TEXT", 100, 0, 5, 5),
                  element("ICON", 10, 10, 0, 5)};
  LayoutDoc c = clip_to_canvas(doc);
  ASSERT_EQ(c.elements.size(), 1u);
  EXPECT_EQ(c.elements[0], element("BUTTON", 0, 40, 20, 10));
  EXPECT_TRUE(validate_layout(c).ok());
}

TEST(Tokens, Count) {
  EXPECT_EQ(token_count(""), 0u);
  EXPECT_EQ(token_count("CANVAS 360 800"), 3u);
  EXPECT_EQ(token_count("  a\t\tb \n c  "), 3u);
  // 3 header tokens plus class and four coordinates.
  EXPECT_EQ(token_count(serialize_layout_code(parse_layout_code("CANVAS 360 800\nBUTTON 10 20 100 40"))),
            8u);
}

TEST(Tokens, TruncateDropsPartialLine) {
  const std::string code = "CANVAS 360 800\nBUTTON 0 0 1 1\nTEXT 0 0 2 2\n";
  EXPECT_EQ(truncate_to_tokens(code, 13), code);
  EXPECT_EQ(truncate_to_tokens(code, 100), code);
  EXPECT_EQ(truncate_to_tokens(code, 12), "CANVAS 360 800\nBUTTON 0 0 1 1\n");
  EXPECT_EQ(truncate_to_tokens(code, 8), "CANVAS 360 800\nBUTTON 0 0 1 1\n");
  EXPECT_EQ(truncate_to_tokens(code, 7), "CANVAS 360 800\n");
  EXPECT_EQ(truncate_to_tokens(code, 2), "");
  EXPECT_EQ(truncate_to_tokens(code, 0), "");
  for (std::size_t k = 0; k <= 14; ++k) EXPECT_LE(token_count(truncate_to_tokens(code, k)), k);
}

TEST(LayoutProperty, RoundTrip10000) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 10000; ++i) {
    LayoutDoc d = random_doc(rng);
    std::string s = serialize_layout_code(d);
    LayoutDoc back = parse_layout_code(s);
    ASSERT_EQ(back, d) << s;
    ASSERT_EQ(serialize_layout_code(back), s);
  }
}

TEST(LayoutProperty, EqualityMatchesCanonicalText) {
  std::mt19937_64 rng(5);
  std::vector<LayoutDoc> docs;
  for (int i = 0; i < 60; ++i) docs.push_back(random_doc(rng, 2));
  docs.push_back(docs[3]);
  for (const auto& a : docs) {
    for (const auto& b : docs) {
      EXPECT_EQ(a == b, serialize_layout_code(a) == serialize_layout_code(b));
    }
  }
}

TEST(LayoutProperty, CanonicalIdempotenceOnMessyInput) {
  const char* text = "#c\n\n CANVAS\t50  60 \n\n BUTTON   1 2 3 4   \"x y\" \n";
  std::string once = serialize_layout_code(parse_layout_code(text));
  EXPECT_EQ(serialize_layout_code(parse_layout_code(once)), once);
}

TEST(LayoutProperty, ArbitraryBytesNeverCrash) {
  std::mt19937_64 rng(99);
  const std::string pieces[] = {"CANVAS", " ", "\n", "BUTTON", "-", "1", "9", "\"", "\\", "#",
                                "TEXT",   "\t", "x", "0",      "\r", "\xff"};
  std::uniform_int_distribution<int> pick(0, 15), len(0, 40);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 20000; ++i) {
    std::string s;
    bool raw_bytes = i % 2 == 0;
    for (int k = len(rng); k > 0; --k) {
      if (raw_bytes) {
        s.push_back(static_cast<char>(byte(rng)));
      } else {
        s += pieces[pick(rng)];
      }
    }
    try {
      LayoutDoc d = parse_layout_code(s, ClassRegistry::defaults(), ParseMode::kRaw);
      (void)validate_layout(d);
    } catch (const ParseError&) {
    }
  }
}

}  // namespace
}  // namespace layoutrev
