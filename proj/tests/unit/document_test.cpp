/*
 * Copyright 2026 The Taskmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support/generators.hpp"
#include "taskmesh/document.hpp"
#include "taskmesh/error.hpp"

namespace taskmesh {
namespace {

TEST(Document, CanonicalTextSortsKeysWithoutWhitespace) {
  Document doc = {{"b", 1}, {"a", 2}};
  EXPECT_EQ(canonical_text(doc), R"({"a":2,"b":1})");
}

TEST(Document, NestedMapsSortAtEveryLevel) {
  Document doc = {{"z", {{"y", true}, {"x", nullptr}}}, {"m", {3, "s"}}};
  EXPECT_EQ(canonical_text(doc), R"({"m":[3,"s"],"z":{"x":null,"y":true}})");
}

TEST(Document, KeysSortBytewiseNotByLocale) {
  Document doc = {{"é", 1}, {"z", 2}, {"A", 3}, {"a", 4}};
  // 'A' (0x41) < 'a' (0x61) < 'z' (0x7a) < 0xc3 0xa9.
  EXPECT_EQ(canonical_text(doc), "{\"A\":3,\"a\":4,\"z\":2,\"\xc3\xa9\":1}");
}

TEST(Document, NumbersUseShortestRoundTripForm) {
  EXPECT_EQ(canonical_text(Document(0.1)), "0.1");
  EXPECT_EQ(canonical_text(Document(2.5)), "2.5");
  EXPECT_EQ(canonical_text(Document(-7)), "-7");
  EXPECT_EQ(canonical_text(Document(1e300)), "1e+300");
}

TEST(Document, NonFiniteNumbersAreNotEncodable) {
  EXPECT_THROW(canonical_text(Document(std::nan(""))), NonEncodable);
  EXPECT_THROW(canonical_text(Document{{"x", {1.0, INFINITY}}}), NonEncodable);
}

TEST(Document, InvalidUtf8IsNotEncodable) {
  EXPECT_THROW(canonical_text(Document(std::string("\xff\xfe"))), NonEncodable);
}

TEST(Document, ParseRejectsGarbage) {
  EXPECT_THROW(parse_document("{\"a\":"), MalformedPayload);
  EXPECT_THROW(parse_document("nope"), MalformedPayload);
}

TEST(Document, LooseValuesFallBackToText) {
  EXPECT_EQ(parse_loose_value("3"), Document(3));
  EXPECT_EQ(parse_loose_value("[1,2]"), Document({1, 2}));
  EXPECT_EQ(parse_loose_value("hello"), Document("hello"));
}

TEST(DocumentProperty, CanonicalTextRoundTripsAndIsStable) {
  testing::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    auto doc = testing::random_document(rng, 4);
    auto text = canonical_text(doc);
    auto back = parse_document(text);
    ASSERT_EQ(back, doc) << text;
    ASSERT_EQ(canonical_text(back), text);
  }
}

}  // namespace
}  // namespace taskmesh
