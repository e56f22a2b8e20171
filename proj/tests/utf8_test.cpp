#include <gtest/gtest.h>

#include "uicws/utf8.hpp"

using namespace uicws;

TEST(Utf8, DecodesMixedWidths) {
  const auto s = utf8::decode("a\xC3\xA9\xE4\xBA\xAC\xF0\x9F\x98\x80");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], U'a');
  EXPECT_EQ(s[1], U'é');
  EXPECT_EQ(s[2], U'京');
  EXPECT_EQ(s[3], U'\U0001F600');
}

TEST(Utf8, EncodeInvertsDecode) {
  const std::string text = "南京市长江大桥 x\xF0\x9F\x98\x80";
  EXPECT_EQ(utf8::encode(utf8::decode(text)), text);
  EXPECT_EQ(utf8::encode(U'京'), "京");
}

TEST(Utf8, RejectsMalformedInput) {
  EXPECT_THROW(utf8::decode("\xE4\xBA"), DataError);          // truncated
  EXPECT_THROW(utf8::decode("\xC0\xAF"), DataError);          // overlong
  EXPECT_THROW(utf8::decode("\xED\xA0\x80"), DataError);      // surrogate
  EXPECT_THROW(utf8::decode("\x80"), DataError);              // stray continuation
  EXPECT_THROW(utf8::decode("\xF4\x90\x80\x80"), DataError);  // above U+10FFFF
}

TEST(Utf8, EmptyStringIsEmpty) { EXPECT_TRUE(utf8::decode("").empty()); }
