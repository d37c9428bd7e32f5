#pragma once

#include <string>
#include <string_view>

namespace glyphalign {

/// Decodes UTF-8 into unicode scalar values. Throws ValidationError on
/// malformed input (truncated sequences, overlong encodings, surrogates).
std::u32string utf8_decode(std::string_view utf8);

std::string utf8_encode(std::u32string_view codepoints);
std::string utf8_encode(char32_t codepoint);

/// Canonical composition (NFC). Input and output are UTF-8.
std::string normalize_nfc(std::string_view utf8);

/// Uppercase hex form of a codepoint, zero-padded to 4 digits ("0041").
std::string codepoint_hex(char32_t codepoint);

} // namespace glyphalign
