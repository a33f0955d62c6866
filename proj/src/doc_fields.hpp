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

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "taskmesh/document.hpp"
#include "taskmesh/error.hpp"

// Strict accessors for decoding message documents. Every failure is a
// MalformedPayload.
namespace taskmesh::fields {

inline void require_object(const Document& doc, std::string_view what) {
  if (!doc.is_object()) {
    throw MalformedPayload(std::string(what) + " is not a map");
  }
}

// The object must hold every required key, may hold optional ones, and
// nothing else.
inline void require_exact(const Document& doc,
                          std::initializer_list<std::string_view> required,
                          std::initializer_list<std::string_view> optional = {}) {
  require_object(doc, "message");
  for (auto key : required) {
    if (!doc.contains(key)) {
      throw MalformedPayload("missing field '" + std::string(key) + "'");
    }
  }
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (auto k : required) known = known || k == key;
    for (auto k : optional) known = known || k == key;
    if (!known) throw MalformedPayload("unexpected field '" + key + "'");
  }
}

inline const Document& at(const Document& doc, std::string_view key) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw MalformedPayload("missing field '" + std::string(key) + "'");
  }
  return *it;
}

inline const std::string& string_at(const Document& doc, std::string_view key) {
  const auto& v = at(doc, key);
  if (!v.is_string()) {
    throw MalformedPayload("field '" + std::string(key) + "' is not a string");
  }
  return v.get_ref<const std::string&>();
}

inline std::uint64_t u64_at(const Document& doc, std::string_view key) {
  const auto& v = at(doc, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw MalformedPayload("field '" + std::string(key) +
                         "' is not a non-negative integer");
}

inline std::int64_t i64_at(const Document& doc, std::string_view key) {
  const auto& v = at(doc, key);
  if (v.is_number_integer() && !v.is_number_unsigned()) {
    return v.get<std::int64_t>();
  }
  if (v.is_number_unsigned() &&
      v.get<std::uint64_t>() <= static_cast<std::uint64_t>(INT64_MAX)) {
    return static_cast<std::int64_t>(v.get<std::uint64_t>());
  }
  throw MalformedPayload("field '" + std::string(key) + "' is not an integer");
}

inline bool bool_at(const Document& doc, std::string_view key) {
  const auto& v = at(doc, key);
  if (!v.is_boolean()) {
    throw MalformedPayload("field '" + std::string(key) + "' is not a bool");
  }
  return v.get<bool>();
}

}  // namespace taskmesh::fields
