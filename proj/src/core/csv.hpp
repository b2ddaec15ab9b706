/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <string>
#include <vector>

#include "core/distributions.hpp"

namespace eim {

/// Header row `prefix0,prefix1,...` followed by one row per matrix row, 17
/// significant digits.
void write_matrix_csv(const std::string& path, const Matrix& m, const std::string& prefix = "x");
/// Reads a numeric CSV with one header row.
Matrix read_matrix_csv(const std::string& path);

std::string format_double(double v);

}  // namespace eim
