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

#include "taskmesh/document.hpp"

#include <cmath>

#include "taskmesh/error.hpp"

namespace taskmesh {

void check_encodable(const Document& doc) {
  switch (doc.type()) {
    case Document::value_t::number_float:
      if (!std::isfinite(doc.get<double>())) {
        throw NonEncodable("non-finite number");
      }
      return;
    case Document::value_t::array:
      for (const auto& item : doc) check_encodable(item);
      return;
    case Document::value_t::object:
      for (const auto& [key, value] : doc.items()) check_encodable(value);
      return;
    case Document::value_t::binary:
    case Document::value_t::discarded:
      throw NonEncodable("value outside the document model");
    default:
      return;
  }
}

std::string canonical_text(const Document& doc) {
  check_encodable(doc);
  try {
    return doc.dump();
  } catch (const nlohmann::json::type_error& e) {
    throw NonEncodable(e.what());
  }
}

Document parse_document(std::string_view text) {
  try {
    return Document::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw MalformedPayload(e.what());
  }
}

Document parse_loose_value(std::string_view text) {
  auto doc = Document::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) return Document(std::string(text));
  return doc;
}

}  // namespace taskmesh
