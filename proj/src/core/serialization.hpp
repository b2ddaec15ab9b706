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

#include <optional>
#include <string>

#include <json.hpp>

#include "core/moe.hpp"
#include "core/ratio_estimator.hpp"

namespace eim {

using Json = nlohmann::json;

/// Format version written into every model document.
inline constexpr int kFormatVersion = 1;

Json to_json(const Gmm& model);
Json to_json(const MixtureOfExperts& model);
Json to_json(const RatioEstimator& estimator);

/// The "type" field of a model document.
std::string document_type(const Json& doc);

Gmm gmm_from_json(const Json& doc);
MixtureOfExperts moe_from_json(const Json& doc);
/// `features` must match the feature map name stored in the document.
RatioEstimator ratio_from_json(const Json& doc, std::optional<FeatureMap> features = std::nullopt);

/// Pretty JSON text with a trailing newline; doubles use the shortest
/// representation that parses back to the same bits.
std::string dump(const Json& doc);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace eim
