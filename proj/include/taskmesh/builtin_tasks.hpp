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

#include "taskmesh/runtime.hpp"

namespace taskmesh {

// Tree workflow values are combined modulo this prime.
inline constexpr std::int64_t kTreeModulus = 1000003;

// Every entrypoint the CLI binary can serve:
//   echo{x}            returns x
//   add{a,b}           a + b
//   square{x}          x * x
//   mapper{x}          calls square{x}
//   joiner{a,b}        calls add{a,b}
//   diamond{x,y}       mapper(x) and mapper(y) side by side, then joiner
//   tree{op,value,children}
//                      spawns one tree per child and folds the results
//                      into value with op (add, mul, sub) mod kTreeModulus;
//                      op "fail" fails with code "tree-failed"
//   fail{message}      raises, so the parent sees "task-failed"
//   say{lines}         logs each line to out, returns the count
//   cat{path}          workspace file as text
//   write{path,text}   writes text to a workspace file
//   bench-read{paths,window}
//                      reads workspace files, returns access times in ns
//   sleep{ms}          sleeps, returns null
//   notebook{host}     hosts a placeholder HTTP page, logs its URL, and
//                      stays up until the parent goes away
TaskRegistry builtin_registry();

}  // namespace taskmesh
