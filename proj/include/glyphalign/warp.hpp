#pragma once

#include "glyphalign/geometry.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace glyphalign {

/// Coordinate space a region or map is expressed in.
enum class CoordSpace { Pixel, Token };

/// Rendering region in the target image. x1/y1 and x2/y2 are the coordinates
/// the first and last source indices map to (inclusive endpoint semantics:
/// source index W-1 lands exactly on x2).
struct TargetRegion {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    CoordSpace space = CoordSpace::Token;

    void validate() const;
    friend bool operator==(const TargetRegion&, const TargetRegion&) = default;
};

/// Linear scaling-and-translation map from a source strip of source_width x
/// source_height index positions onto a target region. Index (0,0) maps to
/// (x1,y1), (source_width-1, source_height-1) to (x2,y2).
struct AffineBoxMap {
    int source_width = 0;
    int source_height = kStripHeight;
    TargetRegion target;
};

/// Counters for non-fatal conditions observed while mapping coordinates.
struct WarpDiagnostics {
    std::atomic<std::uint64_t> extrapolated{0};
};

/// Evaluates the affine map at a (possibly fractional) source position.
/// Positions outside [0, W-1] x [0, H-1] extrapolate linearly and bump the
/// diagnostics counter. Throws DegenerateSourceError when either source
/// dimension is < 2, NonFiniteError on non-finite input.
Vec2 affine_map(const AffineBoxMap& map, double u, double v, WarpDiagnostics* diag = nullptr);

/// K landmark correspondences between source strip and target region.
struct ControlPoints {
    std::vector<Vec2> sources;
    std::vector<Vec2> targets;

    size_t size() const { return sources.size(); }
    /// K >= 3, sources pairwise distinct and not all collinear, all finite.
    void validate() const;
};

/// Fitted thin-plate spline: affine part plus weighted r^2 log r radial terms
/// anchored at the source control points.
struct TpsWarp {
    std::array<std::array<double, 3>, 2> affine{}; // rows map (u, v, 1) -> x resp. y
    std::vector<Vec2> weights;
    std::vector<Vec2> sources;
    double lambda = 0.0;
};

/// Biharmonic kernel r^2 ln r with the limit value 0 at r = 0.
double tps_kernel(double r);

/// Solves the (K+3)x(K+3) interpolation system
///   [[Phi + lambda*I, P], [P^T, 0]] [w; a] = [targets; 0]
/// per output dimension, with Phi_ij = phi(|s_i - s_j|) and P rows (u_i, v_i, 1).
/// The vanishing-moment side conditions (sum w = 0, sum w*u = 0, sum w*v = 0)
/// hold by construction. Throws SingularSystemError for duplicate or collinear
/// sources, NonFiniteError on non-finite input.
TpsWarp tps_fit(const ControlPoints& points, double lambda = 0.0);

Vec2 tps_eval(const TpsWarp& warp, double u, double v);

/// Shifts condition coordinates right of the target image: x' = i + offset_x,
/// y' = j. offset_x is the target image width in the active space; the y
/// offset is fixed at zero.
struct OffsetMap {
    double offset_x = 0.0;
};

Vec2 offset_map(const OffsetMap& map, double i, double j);

struct FoldCollision {
    size_t first_index = 0;
    size_t second_index = 0;
    Vec2 first_source;
    Vec2 second_source;
};

/// Reports pairs of points whose images land in the same quantization cell.
/// Used to diagnose overlapping character positions, the failure mode where
/// alignment quality degrades.
std::vector<FoldCollision> detect_fold(const TpsWarp& warp, std::span<const Vec2> grid,
                                       double cell_size = 0.5);

/// Same detector over already-mapped coordinates.
std::vector<FoldCollision> detect_collisions(std::span<const Vec2> mapped,
                                             std::span<const Vec2> sources, double cell_size = 0.5);

std::string to_json(const TpsWarp& warp);
TpsWarp tps_warp_from_json(const std::string& json_text);

} // namespace glyphalign
