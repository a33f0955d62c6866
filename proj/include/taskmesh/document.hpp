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

#include <string>
#include <string_view>

#include <json.hpp>

namespace taskmesh {

// Task inputs, outputs and message bodies: null/bool/number/string/list/map.
// The default nlohmann object type is an ordered std::map, so map keys
// already iterate in ascending bytewise order.
using Document = nlohmann::json;

// Deterministic text form: sorted keys, no whitespace, shortest round-trip
// numbers. Throws NonEncodable for NaN/infinity or strings that are not
// valid UTF-8.
std::string canonical_text(const Document& doc);

// Throws NonEncodable when the document falls outside the model.
void check_encodable(const Document& doc);

// Parses canonical (or any JSON) text. Throws MalformedPayload.
Document parse_document(std::string_view text);

// `key=value` style command-line values: a document if the text parses as
// one, otherwise the raw text as a string.
Document parse_loose_value(std::string_view text);

}  // namespace taskmesh
