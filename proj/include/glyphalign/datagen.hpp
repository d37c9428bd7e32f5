#pragma once

#include "glyphalign/font.hpp"
#include "glyphalign/geometry.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace glyphalign {

// ---------------------------------------------------------------------------
// Seeding and portable random numbers
// ---------------------------------------------------------------------------

/// Derives the per-sample seed from the master seed so that generation is
/// reproducible and independent of worker scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// xoshiro256** — fixed output sequence on every platform, unlike the
/// standard library distributions.
class Rng {
public:
    using result_type = std::uint64_t;
    explicit Rng(std::uint64_t seed);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }
    result_type operator()();

    double uniform();                               ///< [0, 1)
    double uniform(double lo, double hi);           ///< [lo, hi)
    double log_uniform(double lo, double hi);       ///< log-uniform on [lo, hi)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi); ///< inclusive, unbiased
    /// Index draw from unnormalized non-negative weights.
    std::size_t weighted_index(const std::vector<double>& weights);

private:
    std::uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

struct Rgb8 {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct Rgb8Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; ///< row-major RGB triples

    static Rgb8Image solid(int width, int height, Rgb8 color);
    bool empty() const { return width == 0 || height == 0; }
    Rgb8 at(int x, int y) const;
    void set(int x, int y, Rgb8 color);
    /// Alpha-blends an ink bitmap (its tight box placed at x,y) in `color`.
    void blend_ink(const GlyphBitmap& ink, int x, int y, Rgb8 color);
    double mean_luminance(const PixelRect& rect) const;
};

Rgb8Image load_image(const std::string& path); ///< throws IoError
void save_png(const Rgb8Image& image, const std::string& path); ///< throws IoError

// ---------------------------------------------------------------------------
// Script specifications
// ---------------------------------------------------------------------------

struct ScriptSpec {
    std::string name;
    ScriptKind kind = ScriptKind::Alphabetic;
    std::u32string character_set; ///< ordered, duplicates rejected
    std::vector<std::string> font_paths;
    std::string condition_font_path;
    std::int64_t samples_goal = 0;

    void validate() const; ///< throws ValidationError
    ScriptClass script_class() const { return {kind, name}; }
};

/// The 104-character set used for latin-script runs: the 94 visible ASCII
/// characters plus 10 accented letters.
std::u32string latin_charset();

/// Resolves "latin-104" (and literal character strings) to a charset.
std::u32string resolve_charset(const std::string& text_or_builtin);

/// A spec with its fonts opened and coverage checked: the condition font must
/// cover the full character set.
struct LoadedScript {
    ScriptSpec spec;
    std::vector<std::shared_ptr<const FontFace>> fonts;
    std::shared_ptr<const FontFace> condition_font;

    static LoadedScript load(const ScriptSpec& spec);
};

// ---------------------------------------------------------------------------
// Sample synthesis
// ---------------------------------------------------------------------------

struct BoxPolicy {
    /// Unnormalized probabilities of 1, 2, ... boxes per image. The default
    /// has mean 1.7 boxes.
    std::vector<double> box_count_weights{0.45, 0.40, 0.15};
    double min_text_height_px = 24.0;
    double max_text_height_px = 96.0;
    int length_min = 0; ///< 0 = derive from script kind
    int length_max = 0;
    int max_retries = 50;
    int margin_px = 4; ///< image-edge and inter-box clearance

    void validate() const;
};

/// Text length bounds matching the benchmark statistics: logographic boxes
/// average about 7 characters, alphabetic about 14.
void default_lengths(ScriptKind kind, int& length_min, int& length_max);

std::string sample_text(const ScriptSpec& spec, Rng& rng, int length_min, int length_max);

struct BoxRecord {
    PixelRect rect; ///< tight ink bounds in the target image
    std::string text;
    int font_id = 0; ///< index into spec.font_paths
    double height_px = 0.0; ///< nominal (ascent−descent) render height
    int cond_x = 0; ///< x offset of this box's strip in the condition image
    int cond_width = 0;
};

struct SampleRecord {
    std::string image_ref;
    std::string condition_ref;
    std::vector<BoxRecord> boxes;
    std::string prompt; ///< one <sksN> placeholder per box
    std::uint64_t seed = 0;
};

struct SynthesizedSample {
    SampleRecord record;
    Rgb8Image image;
    Rgb8Image condition;
};

/// Renders sampled texts in random fonts/sizes at non-overlapping positions
/// on a copy of `background`, and the same texts in the condition font as one
/// concatenated 64 px strip. Fully determined by (script, background, seed,
/// policy). Throws PlacementFailureError when boxes cannot be placed within
/// the retry budget.
SynthesizedSample synthesize_sample(const LoadedScript& script, const Rgb8Image& background,
                                    std::uint64_t seed, const BoxPolicy& policy,
                                    int latent_factor = 16);

// ---------------------------------------------------------------------------
// Dataset builds
// ---------------------------------------------------------------------------

struct DatasetConfig {
    std::vector<ScriptSpec> specs;
    std::string out_dir;
    std::string background_dir; ///< empty = flat synthetic backgrounds
    int image_width = 512;
    int image_height = 512;
    std::uint64_t seed = 0;
    BoxPolicy policy;
    int jobs = 0; ///< 0 = logical cores
    double fail_threshold = 0.05; ///< max tolerated failed-sample fraction
    int latent_factor = 16;

    static DatasetConfig from_json(const std::string& json_text); ///< throws ConfigError
};

struct ScriptCounts {
    std::int64_t requested = 0;
    std::int64_t generated = 0;
    std::int64_t failed = 0;
    std::int64_t boxes = 0;
    std::int64_t characters = 0;
    std::map<std::string, std::int64_t> character_coverage; ///< per character (UTF-8)
    std::map<std::string, std::int64_t> font_usage;         ///< per font path
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::map<std::string, ScriptCounts> per_script;
    std::int64_t total_generated = 0;
    std::int64_t total_failed = 0;
    std::vector<std::string> failure_messages; ///< capped, for diagnostics
};

std::string to_json(const DatasetManifest& manifest);

/// Writes out_dir/images/*.png, out_dir/conditions/*.png, annotations.jsonl
/// (one SampleRecord per line, index order) and manifest.json. Per-sample
/// failures are counted, not fatal, unless they exceed fail_threshold.
DatasetManifest build_dataset(const DatasetConfig& config);

std::string to_json(const SampleRecord& record);
SampleRecord sample_record_from_json(const std::string& json_text);

} // namespace glyphalign
