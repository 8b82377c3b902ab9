#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vtw/sim.hpp"

namespace vtw {

// UTF-8 `key = value` config documents: one pair per line, `#` starts a
// comment, blank lines ignored. Keys mirror SessionSpec fields; see
// docs/FORMATS.md for the full key list.

// Ordered key/value pairs as they appear in the document.
std::vector<std::pair<std::string, std::string>> parse_kv(std::string_view text);

// Throws InvalidSpec on unknown keys, malformed values or violated invariants.
SessionSpec parse_session_spec(std::string_view text);

// Canonical echo of a spec, parseable by parse_session_spec.
std::string session_spec_to_config(const SessionSpec& spec);

}  // namespace vtw
