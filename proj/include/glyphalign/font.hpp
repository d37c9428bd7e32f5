#pragma once

#include "glyphalign/geometry.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace glyphalign {

/// Tight-ink alpha bitmap: `alpha` is width*height coverage values in [0,255].
/// `left` is the ink offset from the pen origin; `top` is the ink offset from
/// the line's top edge (y grows downward).
struct GlyphBitmap {
    int width = 0;
    int height = 0;
    int left = 0;
    int top = 0;
    std::vector<std::uint8_t> alpha;

    bool empty() const { return width == 0 || height == 0; }
    std::uint8_t at(int x, int y) const { return alpha[static_cast<size_t>(y) * width + x]; }
};

struct LineRender {
    GlyphBitmap bitmap;
    double advance_px = 0.0; ///< pen advance over the whole line
    double baseline_px = 0.0; ///< baseline offset from the line's top edge
};

/// Loads TrueType (glyf-outline) fonts and rasterizes text lines with an
/// anti-aliased non-zero-winding scanline fill. Covers the sfnt tables needed
/// for that job: cmap (formats 4/12), head, maxp, hhea, hmtx, loca, glyf,
/// including composite glyphs. CFF-outline OpenType files are rejected.
class FontFace : public WidthPolicy {
public:
    static std::shared_ptr<const FontFace> load(const std::string& path);

    ~FontFace() override;
    FontFace(const FontFace&) = delete;
    FontFace& operator=(const FontFace&) = delete;

    const std::string& path() const { return path_; }
    int units_per_em() const;

    bool has_glyph(char32_t cp) const override;
    bool covers(const std::u32string& text) const;

    /// Scale factor mapping font units to pixels so that ascent−descent spans
    /// `pixel_height` pixels.
    double scale_for_height(double pixel_height) const;
    double ascent_px(double pixel_height) const;

    double advance_px_at(const std::u32string& text, double pixel_height) const;
    /// WidthPolicy contract: advance at the 64 px condition-strip height.
    double advance_px(const std::u32string& text) const override;

    /// Rasterizes one line at the given height. The bitmap is trimmed to the
    /// ink extents (re-rendering the same text reproduces them exactly).
    /// Throws GlyphMissingError for codepoints absent from the font.
    LineRender render_line(const std::u32string& text, double pixel_height) const;

private:
    FontFace();
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string path_;
};

} // namespace glyphalign
