#include "glyphalign/datagen.hpp"

#include "glyphalign/errors.hpp"
#include "glyphalign/unicode.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <thread>

namespace glyphalign {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Seeding and random numbers
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl64(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t state = master ^ (0x9E3779B97F4A7C15ull * (index + 1));
    splitmix64(state);
    return splitmix64(state);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

Rng::result_type Rng::operator()() {
    const std::uint64_t result = rotl64(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

double Rng::uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

double Rng::log_uniform(double lo, double hi) {
    if (!(lo > 0.0) || hi < lo) throw ValidationError("log_uniform needs 0 < lo <= hi");
    return std::exp(uniform(std::log(lo), std::log(hi)));
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ValidationError("uniform_int needs lo <= hi");
    const std::uint64_t range = std::uint64_t(hi) - std::uint64_t(lo) + 1;
    if (range == 0) return std::int64_t((*this)()); // full 64-bit span
    const std::uint64_t zone = (~std::uint64_t(0) / range) * range;
    std::uint64_t v;
    do {
        v = (*this)();
    } while (v >= zone);
    return lo + std::int64_t(v % range);
}

std::size_t Rng::weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ValidationError("weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw ValidationError("weights must not all be zero");
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return weights.size() - 1;
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

Rgb8Image Rgb8Image::solid(int width, int height, Rgb8 color) {
    if (width < 1 || height < 1) throw ValidationError("image dimensions must be positive");
    Rgb8Image img;
    img.width = width;
    img.height = height;
    img.pixels.resize(size_t(width) * height * 3);
    for (size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = color.r;
        img.pixels[i + 1] = color.g;
        img.pixels[i + 2] = color.b;
    }
    return img;
}

Rgb8 Rgb8Image::at(int x, int y) const {
    const size_t i = (size_t(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Rgb8Image::set(int x, int y, Rgb8 color) {
    const size_t i = (size_t(y) * width + x) * 3;
    pixels[i] = color.r;
    pixels[i + 1] = color.g;
    pixels[i + 2] = color.b;
}

void Rgb8Image::blend_ink(const GlyphBitmap& ink, int x, int y, Rgb8 color) {
    for (int iy = 0; iy < ink.height; ++iy) {
        const int py = y + iy;
        if (py < 0 || py >= height) continue;
        for (int ix = 0; ix < ink.width; ++ix) {
            const int px = x + ix;
            if (px < 0 || px >= width) continue;
            const int a = ink.at(ix, iy);
            if (a == 0) continue;
            const Rgb8 bg = at(px, py);
            const auto mix = [a](int fg, int back) {
                return std::uint8_t((fg * a + back * (255 - a) + 127) / 255);
            };
            set(px, py, {mix(color.r, bg.r), mix(color.g, bg.g), mix(color.b, bg.b)});
        }
    }
}

double Rgb8Image::mean_luminance(const PixelRect& rect) const {
    const int x1 = std::max(rect.x1, 0), y1 = std::max(rect.y1, 0);
    const int x2 = std::min(rect.x2, width), y2 = std::min(rect.y2, height);
    if (x2 <= x1 || y2 <= y1) return 255.0;
    double sum = 0.0;
    for (int y = y1; y < y2; ++y)
        for (int x = x1; x < x2; ++x) {
            const Rgb8 p = at(x, y);
            sum += 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
        }
    return sum / (double(x2 - x1) * double(y2 - y1));
}

Rgb8Image load_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot read image: " + path);
    Rgb8Image img;
    img.width = bgr.cols;
    img.height = bgr.rows;
    img.pixels.resize(size_t(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            const size_t i = (size_t(y) * img.width + x) * 3;
            img.pixels[i] = row[x][2];
            img.pixels[i + 1] = row[x][1];
            img.pixels[i + 2] = row[x][0];
        }
    }
    return img;
}

void save_png(const Rgb8Image& image, const std::string& path) {
    if (image.empty()) throw ValidationError("refusing to save an empty image");
    cv::Mat bgr(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            const Rgb8 p = image.at(x, y);
            row[x] = cv::Vec3b(p.b, p.g, p.r);
        }
    }
    if (!cv::imwrite(path, bgr, {cv::IMWRITE_PNG_COMPRESSION, 6}))
        throw IoError("cannot write image: " + path);
}

// ---------------------------------------------------------------------------
// Script specifications
// ---------------------------------------------------------------------------

std::u32string latin_charset() {
    std::u32string out;
    for (char32_t cp = 0x21; cp <= 0x7E; ++cp) out.push_back(cp); // 94 visible ASCII
    out += U"àâçèéêîôûü"; // àâçèéêîôûü
    return out;
}

std::u32string resolve_charset(const std::string& text_or_builtin) {
    if (text_or_builtin == "latin-104") return latin_charset();
    return utf8_decode(text_or_builtin);
}

void ScriptSpec::validate() const {
    if (name.empty()) throw ValidationError("script name must not be empty");
    if (character_set.empty()) throw ValidationError("character set must not be empty");
    std::set<char32_t> seen;
    for (char32_t cp : character_set)
        if (!seen.insert(cp).second)
            throw ValidationError("character set has duplicate U+" + codepoint_hex(cp));
    if (font_paths.empty()) throw ValidationError("script needs at least one target font");
    if (condition_font_path.empty()) throw ValidationError("script needs a condition font");
    if (samples_goal < 0) throw ValidationError("samples goal must be non-negative");
}

LoadedScript LoadedScript::load(const ScriptSpec& spec) {
    spec.validate();
    LoadedScript script;
    script.spec = spec;
    for (const std::string& path : spec.font_paths) script.fonts.push_back(FontFace::load(path));
    script.condition_font = FontFace::load(spec.condition_font_path);
    for (char32_t cp : spec.character_set)
        if (!script.condition_font->has_glyph(cp))
            throw ValidationError("condition font " + spec.condition_font_path +
                                  " lacks a glyph for U+" + codepoint_hex(cp));
    return script;
}

// ---------------------------------------------------------------------------
// Sample synthesis
// ---------------------------------------------------------------------------

void BoxPolicy::validate() const {
    for (double w : box_count_weights)
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ValidationError("box count weights must be finite and non-negative");
    if (box_count_weights.size() > 16) throw ValidationError("too many box count weights");
    if (!(min_text_height_px >= 4.0) || !(max_text_height_px >= min_text_height_px))
        throw ValidationError("text height bounds must satisfy 4 <= min <= max");
    if (length_min < 0 || length_max < 0 || length_min > 64 || length_max > 64 ||
        (length_min == 0) != (length_max == 0) || length_min > length_max)
        throw ValidationError("text length bounds must be 0 (defaulted) or 1..64 with min <= max");
    if (max_retries < 1) throw ValidationError("max_retries must be at least 1");
    if (margin_px < 0) throw ValidationError("margin must be non-negative");
}

void default_lengths(ScriptKind kind, int& length_min, int& length_max) {
    if (kind == ScriptKind::Logographic) {
        length_min = 4; // uniform 4..10, mean 7 chars per box
        length_max = 10;
    } else {
        length_min = 9; // uniform 9..20, mean 14.5 chars per box
        length_max = 20;
    }
}

std::string sample_text(const ScriptSpec& spec, Rng& rng, int length_min, int length_max) {
    if (length_min < 1 || length_max > 64 || length_min > length_max)
        throw ValidationError("text length range must lie within [1, 64]");
    const auto length = rng.uniform_int(length_min, length_max);
    std::u32string text;
    text.reserve(size_t(length));
    const auto n = std::int64_t(spec.character_set.size());
    for (std::int64_t i = 0; i < length; ++i)
        text.push_back(spec.character_set[size_t(rng.uniform_int(0, n - 1))]);
    return utf8_encode(text);
}

namespace {

std::string make_prompt(size_t box_count) {
    std::string prompt = box_count == 1 ? "an image containing the text"
                                        : "an image containing the texts";
    for (size_t i = 0; i < box_count; ++i) {
        prompt += i == 0 ? " " : ", ";
        prompt += "<sks" + std::to_string(i + 1) + ">";
    }
    return prompt;
}

/// Draws one box's strip into the condition image at its cond_x offset.
void draw_condition_strip(Rgb8Image& condition, const ConditionLayout& layout,
                          const FontFace& font, int cond_x) {
    const Rgb8 black{0, 0, 0};
    if (layout.script.kind == ScriptKind::Logographic) {
        for (const ConditionCell& cell : layout.cells) {
            const LineRender r = font.render_line(utf8_decode(cell.text), double(kStripHeight));
            if (r.bitmap.empty()) continue;
            const int x = cond_x + cell.rect.x1 + (kStripHeight - r.bitmap.width) / 2;
            condition.blend_ink(r.bitmap, x, r.bitmap.top, black);
        }
    } else {
        const LineRender r =
            font.render_line(utf8_decode(layout.cells.front().text), double(kStripHeight));
        if (!r.bitmap.empty())
            condition.blend_ink(r.bitmap, cond_x + r.bitmap.left, r.bitmap.top, black);
    }
}

} // namespace

SynthesizedSample synthesize_sample(const LoadedScript& script, const Rgb8Image& background,
                                    std::uint64_t seed, const BoxPolicy& policy,
                                    int latent_factor) {
    policy.validate();
    double weight_total = 0.0;
    for (double w : policy.box_count_weights) weight_total += w;
    if (policy.box_count_weights.empty() || !(weight_total > 0.0))
        throw PlacementFailureError("box policy requests zero boxes");

    const int W = background.width, H = background.height;
    const int margin = policy.margin_px;
    if (W < 2 * margin + int(policy.min_text_height_px) || H < 2 * margin + int(policy.min_text_height_px))
        throw ValidationError("background too small for the minimum text size");

    Rng rng(seed);
    const auto box_count = rng.weighted_index(policy.box_count_weights) + 1;

    int length_min = policy.length_min, length_max = policy.length_max;
    if (length_min == 0) default_lengths(script.spec.kind, length_min, length_max);

    SynthesizedSample out;
    out.image = background;
    out.record.seed = seed;

    std::vector<PixelRect> placed;
    for (size_t b = 0; b < box_count; ++b) {
        const std::string text = sample_text(script.spec, rng, length_min, length_max);
        const std::u32string text32 = utf8_decode(text);

        std::vector<int> usable;
        for (size_t f = 0; f < script.fonts.size(); ++f)
            if (script.fonts[f]->covers(text32)) usable.push_back(int(f));
        if (usable.empty())
            throw GlyphMissingError("no target font covers the sampled text \"" + text + "\"");
        const int font_id = usable[size_t(rng.uniform_int(0, std::int64_t(usable.size()) - 1))];
        const FontFace& font = *script.fonts[size_t(font_id)];

        double height = rng.log_uniform(policy.min_text_height_px, policy.max_text_height_px);
        LineRender render = font.render_line(text32, height);

        bool accepted = false;
        PixelRect rect;
        for (int attempt = 0; attempt < policy.max_retries && !accepted; ++attempt) {
            const int bw = render.bitmap.width, bh = render.bitmap.height;
            if (bw == 0 || bh == 0) break; // blank render cannot produce a box
            if (bw > W - 2 * margin || bh > H - 2 * margin) {
                height *= 0.8; // too large for the canvas: shrink and re-render
                if (height < 4.0) break;
                render = font.render_line(text32, height);
                continue;
            }
            const int x = int(rng.uniform_int(margin, W - margin - bw));
            const int y = int(rng.uniform_int(margin, H - margin - bh));
            rect = {x, y, x + bw, y + bh};
            const PixelRect inflated{x - margin, y - margin, x + bw + margin, y + bh + margin};
            accepted = std::none_of(placed.begin(), placed.end(), [&](const PixelRect& other) {
                return inflated.intersects(other);
            });
        }
        if (!accepted)
            throw PlacementFailureError("box " + std::to_string(b + 1) + " of " +
                                        std::to_string(box_count) + ": no free position within " +
                                        std::to_string(policy.max_retries) + " attempts");
        placed.push_back(rect);

        // pick an ink color contrasting with the local background
        const bool dark = out.image.mean_luminance(rect) > 127.0;
        const auto channel = [&rng, dark] {
            return std::uint8_t(dark ? rng.uniform_int(0, 80) : rng.uniform_int(175, 255));
        };
        const Rgb8 color{channel(), channel(), channel()};
        out.image.blend_ink(render.bitmap, rect.x1, rect.y1, color);

        BoxRecord box;
        box.rect = rect;
        box.text = text;
        box.font_id = font_id;
        box.height_px = height;
        out.record.boxes.push_back(std::move(box));
    }

    // condition strips, concatenated horizontally in box order
    int total_width = 0;
    std::vector<ConditionLayout> layouts;
    layouts.reserve(out.record.boxes.size());
    for (BoxRecord& box : out.record.boxes) {
        layouts.push_back(build_condition_layout(box.text, script.spec.script_class(),
                                                 *script.condition_font, latent_factor));
        box.cond_x = total_width;
        box.cond_width = layouts.back().canvas_width;
        total_width += layouts.back().canvas_width;
    }
    out.condition = Rgb8Image::solid(total_width, kStripHeight, {255, 255, 255});
    for (size_t b = 0; b < layouts.size(); ++b)
        draw_condition_strip(out.condition, layouts[b], *script.condition_font,
                             out.record.boxes[b].cond_x);

    out.record.prompt = make_prompt(out.record.boxes.size());
    return out;
}

// ---------------------------------------------------------------------------
// Records and manifest JSON
// ---------------------------------------------------------------------------

std::string to_json(const SampleRecord& record) {
    ordered_json j;
    j["image"] = record.image_ref;
    j["condition"] = record.condition_ref;
    j["seed"] = record.seed;
    j["prompt"] = record.prompt;
    j["boxes"] = ordered_json::array();
    for (const BoxRecord& box : record.boxes) {
        ordered_json jb;
        jb["text"] = box.text;
        jb["x1"] = box.rect.x1;
        jb["y1"] = box.rect.y1;
        jb["x2"] = box.rect.x2;
        jb["y2"] = box.rect.y2;
        jb["font"] = box.font_id;
        jb["height"] = box.height_px;
        jb["cond_x"] = box.cond_x;
        jb["cond_w"] = box.cond_width;
        j["boxes"].push_back(std::move(jb));
    }
    return j.dump();
}

SampleRecord sample_record_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    SampleRecord record;
    record.image_ref = j.at("image").get<std::string>();
    record.condition_ref = j.at("condition").get<std::string>();
    record.seed = j.at("seed").get<std::uint64_t>();
    record.prompt = j.at("prompt").get<std::string>();
    for (const auto& jb : j.at("boxes")) {
        BoxRecord box;
        box.text = jb.at("text").get<std::string>();
        box.rect = {jb.at("x1").get<int>(), jb.at("y1").get<int>(), jb.at("x2").get<int>(),
                    jb.at("y2").get<int>()};
        box.font_id = jb.at("font").get<int>();
        box.height_px = jb.at("height").get<double>();
        box.cond_x = jb.value("cond_x", 0);
        box.cond_width = jb.value("cond_w", 0);
        record.boxes.push_back(std::move(box));
    }
    return record;
}

std::string to_json(const DatasetManifest& manifest) {
    ordered_json j;
    j["seed"] = manifest.seed;
    j["total_generated"] = manifest.total_generated;
    j["total_failed"] = manifest.total_failed;
    j["scripts"] = ordered_json::object();
    for (const auto& [name, counts] : manifest.per_script) {
        ordered_json js;
        js["requested"] = counts.requested;
        js["generated"] = counts.generated;
        js["failed"] = counts.failed;
        js["boxes"] = counts.boxes;
        js["characters"] = counts.characters;
        js["mean_boxes_per_image"] =
            counts.generated > 0 ? double(counts.boxes) / double(counts.generated) : 0.0;
        js["covered_characters"] = std::int64_t(counts.character_coverage.size());
        js["character_coverage"] = ordered_json::object();
        for (const auto& [ch, n] : counts.character_coverage) js["character_coverage"][ch] = n;
        js["font_usage"] = ordered_json::object();
        for (const auto& [font, n] : counts.font_usage) js["font_usage"][font] = n;
        j["scripts"][name] = std::move(js);
    }
    j["failures"] = manifest.failure_messages;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Dataset builds
// ---------------------------------------------------------------------------

DatasetConfig DatasetConfig::from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    DatasetConfig cfg;
    try {
        cfg.seed = j.value("seed", std::uint64_t(0));
        cfg.out_dir = j.value("out", "");
        cfg.background_dir = j.value("background_dir", "");
        if (j.contains("image")) {
            cfg.image_width = j["image"].value("width", 512);
            cfg.image_height = j["image"].value("height", 512);
        }
        cfg.jobs = j.value("jobs", 0);
        cfg.fail_threshold = j.value("fail_threshold", 0.05);
        cfg.latent_factor = j.value("latent_factor", 16);
        if (j.contains("policy")) {
            const auto& jp = j["policy"];
            if (jp.contains("box_count_weights"))
                cfg.policy.box_count_weights = jp["box_count_weights"].get<std::vector<double>>();
            if (jp.contains("text_height_px")) {
                cfg.policy.min_text_height_px = jp["text_height_px"].at(0).get<double>();
                cfg.policy.max_text_height_px = jp["text_height_px"].at(1).get<double>();
            }
            if (jp.contains("length")) {
                cfg.policy.length_min = jp["length"].at(0).get<int>();
                cfg.policy.length_max = jp["length"].at(1).get<int>();
            }
            cfg.policy.max_retries = jp.value("max_retries", cfg.policy.max_retries);
            cfg.policy.margin_px = jp.value("margin_px", cfg.policy.margin_px);
        }
        if (!j.contains("scripts") || !j["scripts"].is_array() || j["scripts"].empty())
            throw ConfigError("config needs a non-empty \"scripts\" array");
        for (const auto& js : j["scripts"]) {
            ScriptSpec spec;
            spec.name = js.at("name").get<std::string>();
            const std::string kind = js.value("kind", "alphabetic");
            if (kind == "alphabetic")
                spec.kind = ScriptKind::Alphabetic;
            else if (kind == "logographic")
                spec.kind = ScriptKind::Logographic;
            else
                throw ConfigError("unknown script kind \"" + kind + "\"");
            spec.character_set = resolve_charset(js.at("charset").get<std::string>());
            spec.font_paths = js.at("fonts").get<std::vector<std::string>>();
            spec.condition_font_path = js.at("condition_font").get<std::string>();
            spec.samples_goal = js.at("samples").get<std::int64_t>();
            cfg.specs.push_back(std::move(spec));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

namespace {

std::string sample_stem(const std::string& script_name, std::int64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
    return script_name + "_" + buf;
}

Rgb8Image flat_background(int width, int height, std::uint64_t seed) {
    Rng rng(seed);
    const auto channel = [&rng] { return std::uint8_t(rng.uniform_int(190, 245)); };
    return Rgb8Image::solid(width, height, {channel(), channel(), channel()});
}

struct Task {
    std::size_t script_idx;
    std::int64_t per_script_idx;
    std::uint64_t global_idx;
};

struct Outcome {
    std::optional<SampleRecord> record;
    std::string error;
};

} // namespace

DatasetManifest build_dataset(const DatasetConfig& config) {
    if (config.specs.empty()) throw ConfigError("at least one script spec is required");
    if (config.out_dir.empty()) throw ConfigError("output directory is required");
    config.policy.validate();

    std::vector<LoadedScript> scripts;
    scripts.reserve(config.specs.size());
    for (const ScriptSpec& spec : config.specs) {
        for (const std::string& font : spec.font_paths)
            if (!fs::exists(font)) throw ConfigError("font file not found: " + font);
        if (!fs::exists(spec.condition_font_path))
            throw ConfigError("font file not found: " + spec.condition_font_path);
        scripts.push_back(LoadedScript::load(spec));
    }

    std::vector<Rgb8Image> backgrounds;
    if (!config.background_dir.empty()) {
        if (!fs::is_directory(config.background_dir))
            throw ConfigError("background directory not found: " + config.background_dir);
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(config.background_dir)) {
            const std::string ext = entry.path().extension().string();
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
                files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw ConfigError("no .png/.jpg images in " + config.background_dir);
        for (const std::string& file : files) backgrounds.push_back(load_image(file));
    }

    std::error_code ec;
    fs::create_directories(fs::path(config.out_dir) / "images", ec);
    fs::create_directories(fs::path(config.out_dir) / "conditions", ec);
    if (ec) throw IoError("cannot create output directories under " + config.out_dir);

    std::vector<Task> tasks;
    std::uint64_t global = 0;
    for (std::size_t s = 0; s < scripts.size(); ++s)
        for (std::int64_t i = 0; i < scripts[s].spec.samples_goal; ++i)
            tasks.push_back({s, i, global++});

    std::vector<Outcome> outcomes(tasks.size());
    std::atomic<std::size_t> next{0};

    const auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            const Task& task = tasks[t];
            const LoadedScript& script = scripts[task.script_idx];
            const std::uint64_t seed = derive_seed(config.seed, task.global_idx);
            try {
                // the background draw uses its own stream so sample draws stay
                // aligned whether backgrounds come from files or are synthetic
                const std::uint64_t bg_seed = derive_seed(seed, 0x6267u); // "bg"
                Rgb8Image flat;
                const Rgb8Image* background;
                if (backgrounds.empty()) {
                    flat = flat_background(config.image_width, config.image_height, bg_seed);
                    background = &flat;
                } else {
                    Rng bg_rng(bg_seed);
                    background = &backgrounds[size_t(
                        bg_rng.uniform_int(0, std::int64_t(backgrounds.size()) - 1))];
                }
                SynthesizedSample sample = synthesize_sample(script, *background, seed,
                                                             config.policy, config.latent_factor);
                const std::string stem = sample_stem(script.spec.name, task.per_script_idx);
                sample.record.image_ref = "images/" + stem + ".png";
                sample.record.condition_ref = "conditions/" + stem + ".png";
                save_png(sample.image, (fs::path(config.out_dir) / sample.record.image_ref).string());
                save_png(sample.condition,
                         (fs::path(config.out_dir) / sample.record.condition_ref).string());
                outcomes[t].record = std::move(sample.record);
            } catch (const std::exception& e) {
                outcomes[t].error = std::string(e.what());
            }
        }
    };

    int jobs = config.jobs > 0 ? config.jobs : int(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    jobs = std::min<int>(jobs, std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    for (int i = 1; i < jobs; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();

    DatasetManifest manifest;
    manifest.seed = config.seed;
    for (const LoadedScript& script : scripts)
        manifest.per_script[script.spec.name].requested = script.spec.samples_goal;

    std::ofstream annotations(fs::path(config.out_dir) / "annotations.jsonl",
                              std::ios::binary | std::ios::trunc);
    if (!annotations) throw IoError("cannot write annotations.jsonl");
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const LoadedScript& script = scripts[tasks[t].script_idx];
        ScriptCounts& counts = manifest.per_script[script.spec.name];
        if (!outcomes[t].record) {
            counts.failed += 1;
            manifest.total_failed += 1;
            if (manifest.failure_messages.size() < 20)
                manifest.failure_messages.push_back(sample_stem(script.spec.name,
                                                                tasks[t].per_script_idx) +
                                                    ": " + outcomes[t].error);
            continue;
        }
        const SampleRecord& record = *outcomes[t].record;
        annotations << to_json(record) << '\n';
        counts.generated += 1;
        manifest.total_generated += 1;
        counts.boxes += std::int64_t(record.boxes.size());
        for (const BoxRecord& box : record.boxes) {
            const std::u32string text = utf8_decode(box.text);
            counts.characters += std::int64_t(text.size());
            for (char32_t cp : text) counts.character_coverage[utf8_encode(cp)] += 1;
            counts.font_usage[script.spec.font_paths[size_t(box.font_id)]] += 1;
        }
    }
    annotations.close();

    std::ofstream mf(fs::path(config.out_dir) / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!mf) throw IoError("cannot write manifest.json");
    mf << to_json(manifest) << '\n';
    return manifest;
}

} // namespace glyphalign
