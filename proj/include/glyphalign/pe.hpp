#pragma once

#include "glyphalign/geometry.hpp"
#include "glyphalign/warp.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace glyphalign {

/// How condition-token coordinates are assigned: warped onto a target region
/// (affine or thin-plate spline) or shifted past the target image width
/// (layout-free offset injection).
enum class AlignMode { Affine, Tps, LayoutFree };

enum class TokenSource { Target, Condition };

struct AlignmentEntry {
    int token_index = 0;
    TokenSource source = TokenSource::Target;
    int box_id = -1; // -1 for target entries
    Vec2 coord;
};

/// Per-token fractional 2D positional coordinates for the concatenated
/// target+condition sequence, in token space. Target tokens always keep their
/// natural grid coordinates; only condition tokens are remapped.
struct AlignmentMap {
    AlignMode mode = AlignMode::Affine;
    TokenGrid target;
    std::vector<AlignmentEntry> entries;
};

/// One condition patch and the warp it should be aligned with. Affine mode
/// needs a region, TPS mode control points (token space), layout-free neither.
struct ConditionPatch {
    ConditionLayout layout;
    std::optional<TargetRegion> region;
    std::optional<ControlPoints> control_points;
};

struct AlignmentDiagnostics {
    std::uint64_t extrapolated = 0;
    std::size_t overlap_collisions = 0;
    std::vector<std::string> warnings;
};

/// Converts a half-open pixel rectangle into the inclusive token-space
/// coordinate bounds its first and last tokens occupy, e.g. pixels [32,96)
/// at factor 16 cover token coordinates [2,5].
TargetRegion token_region_from_pixel_rect(const PixelRect& rect, int latent_factor);

/// Builds the positional coordinate assignment for a target grid plus
/// condition patches: target tokens first (row-major at their own grid
/// coordinates), then each patch's tokens row-major at warped coordinates.
/// Collisions between condition coordinates are reported through diagnostics,
/// never fatal. Throws the underlying warp errors.
AlignmentMap build_alignment_map(const std::vector<ConditionPatch>& patches,
                                 const TokenGrid& target_grid, AlignMode mode,
                                 double lambda = 0.0, AlignmentDiagnostics* diag = nullptr);

/// Axis-split rotary encoder configuration: dim_y + dim_x = head_dim, all
/// even. Frequencies theta_k = base^(-2k/dim_axis) per rotation pair k.
struct RopeConfig {
    int head_dim = 64;
    int dim_y = 32;
    int dim_x = 32;
    double base = 10000.0;

    static RopeConfig split_evenly(int head_dim, double base = 10000.0);
    void validate() const;
};

/// Rotates the first dim_y components by y-proportional angles and the
/// remaining dim_x components by x-proportional angles. Accepts fractional
/// coordinates. Inner products of encoded vectors depend only on coordinate
/// differences.
std::vector<double> rope_encode(std::span<const double> vec, Vec2 coord, const RopeConfig& cfg);

struct ProbeMatrix {
    std::size_t size = 0;
    std::vector<double> dots; // row-major size x size

    double at(std::size_t query, std::size_t key) const { return dots[query * size + key]; }
};

/// Inner products between rope-encoded query/key vectors at the map's
/// per-token coordinates. Verification harness, not a production flow.
ProbeMatrix attention_probe(const AlignmentMap& map, const RopeConfig& cfg,
                            const std::vector<std::vector<double>>& queries,
                            const std::vector<std::vector<double>>& keys);

/// Serializes with coordinates at 9 significant digits; byte-identical for
/// identical maps.
std::string to_json(const AlignmentMap& map);
AlignmentMap alignment_map_from_json(const std::string& json_text);

std::string to_string(AlignMode mode);
AlignMode align_mode_from_string(const std::string& text);

} // namespace glyphalign
