#include "glyphalign/unicode.hpp"

#include "glyphalign/errors.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <cstdio>

namespace glyphalign {

std::string codepoint_hex(char32_t cp) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04X", static_cast<unsigned>(cp));
    return buf;
}

std::string UnsupportedCodepointError::to_hex(char32_t cp) { return codepoint_hex(cp); }

std::u32string utf8_decode(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    size_t i = 0;
    const auto fail = [&] { throw ValidationError("malformed UTF-8 at byte " + std::to_string(i)); };
    while (i < utf8.size()) {
        const auto b0 = static_cast<unsigned char>(utf8[i]);
        char32_t cp = 0;
        size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            fail();
        }
        if (i + len > utf8.size()) fail();
        for (size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(utf8[i + k]);
            if ((b & 0xC0) != 0x80) fail();
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMinForLen[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMinForLen[len]) fail();           // overlong
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail();
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
    return out;
}

std::string utf8_encode(std::u32string_view codepoints) {
    std::string out;
    out.reserve(codepoints.size());
    for (char32_t cp : codepoints) out += utf8_encode(cp);
    return out;
}

std::string normalize_nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    const icu::UnicodeString input =
        icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    const icu::UnicodeString normalized = nfc->normalize(input, status);
    if (U_FAILURE(status)) throw Error("NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

} // namespace glyphalign
