#pragma once

// Insertion-ordered JSON so every file the tool writes is byte-stable.
#include <json.hpp>

namespace decitool {
using Json = nlohmann::ordered_json;
}
