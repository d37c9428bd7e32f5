#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glyphalign {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Condition strips are 64 px high; logographic glyph cells are 64x64 px.
inline constexpr int kStripHeight = 64;

/// Integer pixel rectangle, top-left origin, half-open [x1,x2) x [y1,y2).
struct PixelRect {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    bool valid() const { return x1 >= 0 && y1 >= 0 && x2 > x1 && y2 > y1; }
    bool contains(const PixelRect& other) const {
        return other.x1 >= x1 && other.y1 >= y1 && other.x2 <= x2 && other.y2 <= y2;
    }
    bool intersects(const PixelRect& other) const {
        return x1 < other.x2 && other.x1 < x2 && y1 < other.y2 && other.y1 < y2;
    }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Layout policy class of a writing system. Alphabetic scripts render as one
/// connected strip per text run; logographic scripts get one 64x64 cell per
/// character.
enum class ScriptKind { Alphabetic, Logographic };

struct ScriptClass {
    ScriptKind kind = ScriptKind::Alphabetic;
    std::string name = "latin";
    friend bool operator==(const ScriptClass&, const ScriptClass&) = default;
};

/// One text fragment and its rectangle within the condition canvas.
struct ConditionCell {
    std::string text;
    PixelRect rect;
};

/// Pixel geometry of the condition image for a single text run: a 64 px high
/// canvas holding either one full-width strip (alphabetic) or a row of 64x64
/// cells (logographic).
struct ConditionLayout {
    ScriptClass script;
    int canvas_width = 0;
    static constexpr int canvas_height = kStripHeight;
    std::vector<ConditionCell> cells;
};

/// Token grid over a pixel canvas: latent_factor pixels per token side.
/// Continuous token coordinates address token top-left corners.
struct TokenGrid {
    int latent_factor = 16;
    int rows = 0;
    int cols = 0;
    Vec2 origin{0.0, 0.0}; // pixel that maps to token (0,0)

    static TokenGrid from_pixels(int width_px, int height_px, int latent_factor = 16);
    friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

Vec2 pixel_to_token(Vec2 pixel, const TokenGrid& grid);

/// Supplies shaped string advance widths (at 64 px strip height) and glyph
/// availability. FontFace implements this against a real font; tests use
/// FixedAdvanceWidths.
class WidthPolicy {
public:
    virtual ~WidthPolicy() = default;
    virtual double advance_px(const std::u32string& text) const = 0;
    virtual bool has_glyph(char32_t) const { return true; }
};

class FixedAdvanceWidths : public WidthPolicy {
public:
    explicit FixedAdvanceWidths(double total_advance_px) : advance_(total_advance_px) {}
    double advance_px(const std::u32string&) const override { return advance_; }

private:
    double advance_;
};

/// Lays out the condition image for one same-script text run.
///
/// Logographic: one 64x64 cell per code point, canvas width 64 * char_count.
/// Alphabetic: a single cell spanning the canvas, width = the policy's advance
/// rounded up to the next latent_factor multiple.
///
/// Throws EmptyTextError, UnsupportedCodepointError.
ConditionLayout build_condition_layout(std::string_view text_utf8, const ScriptClass& script,
                                       const WidthPolicy& widths, int latent_factor = 16);

/// Splits text into maximal same-script runs, ordered as in the input.
using ScriptClassifier = std::function<ScriptClass(char32_t)>;
std::vector<std::pair<std::string, ScriptClass>> split_script_runs(std::string_view text_utf8,
                                                                   const ScriptClassifier& classify);

/// Default classifier: CJK ideographs, kana, hangul and fullwidth forms map to
/// {Logographic, "cjk"}; everything else to {Alphabetic, "latin"}.
ScriptClass classify_codepoint(char32_t cp);

std::string to_json(const ConditionLayout& layout);
ConditionLayout condition_layout_from_json(const std::string& json_text);

} // namespace glyphalign
