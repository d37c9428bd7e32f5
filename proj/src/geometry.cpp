#include "glyphalign/geometry.hpp"

#include "glyphalign/errors.hpp"
#include "glyphalign/unicode.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace glyphalign {

using ordered_json = nlohmann::ordered_json;

TokenGrid TokenGrid::from_pixels(int width_px, int height_px, int latent_factor) {
    if (latent_factor < 1) throw ValidationError("latent_factor must be >= 1");
    if (width_px < 1 || height_px < 1) throw ValidationError("canvas must be non-degenerate");
    TokenGrid grid;
    grid.latent_factor = latent_factor;
    grid.rows = (height_px + latent_factor - 1) / latent_factor;
    grid.cols = (width_px + latent_factor - 1) / latent_factor;
    return grid;
}

Vec2 pixel_to_token(Vec2 pixel, const TokenGrid& grid) {
    const double f = static_cast<double>(grid.latent_factor);
    return {(pixel.x - grid.origin.x) / f, (pixel.y - grid.origin.y) / f};
}

ConditionLayout build_condition_layout(std::string_view text_utf8, const ScriptClass& script,
                                       const WidthPolicy& widths, int latent_factor) {
    if (latent_factor < 1) throw ValidationError("latent_factor must be >= 1");
    const std::u32string text = utf8_decode(text_utf8);
    if (text.empty()) throw EmptyTextError();
    for (char32_t cp : text) {
        if (!widths.has_glyph(cp)) throw UnsupportedCodepointError(cp);
    }

    ConditionLayout layout;
    layout.script = script;
    if (script.kind == ScriptKind::Logographic) {
        layout.canvas_width = kStripHeight * static_cast<int>(text.size());
        layout.cells.reserve(text.size());
        int x = 0;
        for (char32_t cp : text) {
            layout.cells.push_back({utf8_encode(cp), {x, 0, x + kStripHeight, kStripHeight}});
            x += kStripHeight;
        }
    } else {
        const double advance = widths.advance_px(text);
        if (!(advance >= 0.0) || !std::isfinite(advance))
            throw ValidationError("width policy returned a non-finite or negative advance");
        const int units = std::max<int>(1, static_cast<int>(std::ceil(advance / latent_factor)));
        layout.canvas_width = units * latent_factor;
        layout.cells.push_back({utf8_encode(text), {0, 0, layout.canvas_width, kStripHeight}});
    }
    return layout;
}

ScriptClass classify_codepoint(char32_t cp) {
    const bool logographic =
        (cp >= 0x2E80 && cp <= 0x303F) ||   // CJK radicals, punctuation
        (cp >= 0x3040 && cp <= 0x30FF) ||   // hiragana, katakana
        (cp >= 0x3130 && cp <= 0x318F) ||   // hangul compatibility jamo
        (cp >= 0x3400 && cp <= 0x4DBF) ||   // CJK extension A
        (cp >= 0x4E00 && cp <= 0x9FFF) ||   // CJK unified ideographs
        (cp >= 0xAC00 && cp <= 0xD7AF) ||   // hangul syllables
        (cp >= 0xF900 && cp <= 0xFAFF) ||   // CJK compatibility ideographs
        (cp >= 0xFF00 && cp <= 0xFF60) ||   // fullwidth forms
        (cp >= 0x20000 && cp <= 0x2FA1F);   // CJK extensions B..F
    if (logographic) return {ScriptKind::Logographic, "cjk"};
    return {ScriptKind::Alphabetic, "latin"};
}

std::vector<std::pair<std::string, ScriptClass>> split_script_runs(std::string_view text_utf8,
                                                                  const ScriptClassifier& classify) {
    const std::u32string text = utf8_decode(text_utf8);
    std::vector<std::pair<std::string, ScriptClass>> runs;
    std::u32string current;
    ScriptClass current_class;
    for (char32_t cp : text) {
        const ScriptClass cls = classify(cp);
        if (!current.empty() && cls != current_class) {
            runs.emplace_back(utf8_encode(current), current_class);
            current.clear();
        }
        current_class = cls;
        current.push_back(cp);
    }
    if (!current.empty()) runs.emplace_back(utf8_encode(current), current_class);
    return runs;
}

std::string to_json(const ConditionLayout& layout) {
    ordered_json j;
    j["script"] = layout.script.name;
    j["height"] = ConditionLayout::canvas_height;
    j["width"] = layout.canvas_width;
    j["cells"] = ordered_json::array();
    for (const auto& cell : layout.cells) {
        j["cells"].push_back({{"text", cell.text},
                              {"x1", cell.rect.x1},
                              {"y1", cell.rect.y1},
                              {"x2", cell.rect.x2},
                              {"y2", cell.rect.y2}});
    }
    return j.dump();
}

ConditionLayout condition_layout_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    ConditionLayout layout;
    layout.script.name = j.at("script").get<std::string>();
    layout.canvas_width = j.at("width").get<int>();
    if (j.at("height").get<int>() != ConditionLayout::canvas_height)
        throw ValidationError("condition layout height must be 64");
    for (const auto& c : j.at("cells")) {
        layout.cells.push_back({c.at("text").get<std::string>(),
                                {c.at("x1").get<int>(), c.at("y1").get<int>(),
                                 c.at("x2").get<int>(), c.at("y2").get<int>()}});
    }
    // The schema does not carry the script kind; recover it from the cell
    // geometry (64x64 cells tiling the canvas => logographic).
    bool tiles = !layout.cells.empty() &&
                 static_cast<int>(layout.cells.size()) * kStripHeight == layout.canvas_width;
    for (size_t i = 0; tiles && i < layout.cells.size(); ++i) {
        const PixelRect& r = layout.cells[i].rect;
        tiles = r == PixelRect{static_cast<int>(i) * kStripHeight, 0,
                               (static_cast<int>(i) + 1) * kStripHeight, kStripHeight};
    }
    layout.script.kind = tiles ? ScriptKind::Logographic : ScriptKind::Alphabetic;
    return layout;
}

} // namespace glyphalign
