/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include "lara/program.hpp"
#include "lara/table.hpp"

#include <string>

namespace lara::test {

inline std::string dataPath(const std::string& rel) { return std::string(LARA_TEST_DATA_DIR) + "/" + rel; }

inline Database fig1() { return loadDatabase(dataPath("fig1")); }

inline Key ik(long v) { return Key::integer(v); }
inline Key tk(const std::string& v) { return Key::text(v); }

inline AssocTable table(const std::string& text) { return parseTable(text); }

inline std::string expected(const std::string& name) { return loadTable(dataPath("expected/" + name)).serialize(); }

}  // namespace lara::test
