#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace arcweaver {

// Validates a document against the JSON-schema subset used by agent response
// schemas and the published API schema: type (string or list), properties,
// required, additionalProperties (bool), items, enum, const, minLength,
// maxLength, minItems, maxItems, minimum, maximum, $ref to "#/$defs/<name>".
//
// Returns human-readable errors prefixed with a JSON pointer, empty when the
// document conforms. Unknown keywords are ignored.
std::vector<std::string> validate_schema(const nlohmann::json& schema,
                                         const nlohmann::json& document);

}  // namespace arcweaver
