#pragma once

#include <string>
#include <string_view>

#include "r2s/agreement.hpp"
#include "r2s/augment.hpp"
#include "r2s/det_eval.hpp"
#include "r2s/map_eval.hpp"

namespace r2s {

// JSON (de)serialization of the config types. Parsing starts from the
// defaults, so a document only needs the fields it overrides. Unknown keys
// are rejected with ParseError.

DetEvalConfig parse_det_config(std::string_view json_text);
MapEvalConfig parse_map_config(std::string_view json_text);
/// Accepts top-level agreement fields plus optional "det" and "map" objects.
AgreementConfig parse_agreement_config(std::string_view json_text);
AugmentConfig parse_augment_config(std::string_view json_text);

std::string to_json(const DetEvalConfig& config);
std::string to_json(const MapEvalConfig& config);
std::string to_json(const AgreementConfig& config);
std::string to_json(const AugmentConfig& config);

}  // namespace r2s
