#include <gtest/gtest.h>

#include <sstream>

#include "sgs/csv.hpp"
#include "sgs/errors.hpp"

namespace sgs {
namespace {

TEST(Csv, ParsesQuotedFieldsAndCrlf) {
    const auto rows = csv::parse("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "x, y");
    EXPECT_EQ(rows[1][1], "say \"hi\"");
}

TEST(Csv, SkipsBomAndBlankLines) {
    const auto rows = csv::parse("\xEF\xBB\xBFid,fg\n\n1,2\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][0], "id");
}

TEST(Csv, KeepsEmbeddedNewlines) {
    const auto rows = csv::parse("\"line1\nline2\",z");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][0], "line1\nline2");
}

TEST(Csv, UnterminatedQuoteThrows) { EXPECT_THROW(csv::parse("\"abc"), InvalidInput); }

TEST(Csv, EscapeRoundTripsThroughParser) {
    const csv::Row row{"plain", "a,b", "q\"q", "multi\nline", ""};
    std::ostringstream out;
    csv::write_row(out, row);
    EXPECT_EQ(out.str(), "plain,\"a,b\",\"q\"\"q\",\"multi\nline\",\n");
    const auto back = csv::parse(out.str());
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], row);
}

}  // namespace
}  // namespace sgs
