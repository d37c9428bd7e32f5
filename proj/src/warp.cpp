#include "glyphalign/warp.hpp"

#include "glyphalign/errors.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace glyphalign {

namespace {

bool finite(double v) { return std::isfinite(v); }
bool finite(const Vec2& v) { return finite(v.x) && finite(v.y); }

// Twice the signed area of the polygon's convex hull (monotone chain).
double convex_hull_area(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const size_t n = pts.size();
    if (n < 3) return 0.0;
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    std::vector<Vec2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 1 ? k - 1 : 0);
    double area2 = 0.0;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % hull.size()];
        area2 += a.x * b.y - a.y * b.x;
    }
    return std::abs(area2) / 2.0;
}

int64_t quantize(double v, double cell) { return static_cast<int64_t>(std::floor(v / cell)); }

} // namespace

void TargetRegion::validate() const {
    if (!finite(x1) || !finite(y1) || !finite(x2) || !finite(y2))
        throw NonFiniteError("target region has non-finite coordinates");
    if (!(x2 > x1) || !(y2 > y1)) throw ValidationError("target region must be non-degenerate");
}

Vec2 affine_map(const AffineBoxMap& map, double u, double v, WarpDiagnostics* diag) {
    if (map.source_width < 2 || map.source_height < 2)
        throw DegenerateSourceError("affine source must span at least 2 positions per axis");
    map.target.validate();
    if (!finite(u) || !finite(v)) throw NonFiniteError("affine_map input is non-finite");
    const double wmax = static_cast<double>(map.source_width - 1);
    const double hmax = static_cast<double>(map.source_height - 1);
    if (diag && (u < 0.0 || u > wmax || v < 0.0 || v > hmax))
        diag->extrapolated.fetch_add(1, std::memory_order_relaxed);
    return {map.target.x1 + u / wmax * (map.target.x2 - map.target.x1),
            map.target.y1 + v / hmax * (map.target.y2 - map.target.y1)};
}

void ControlPoints::validate() const {
    if (sources.size() != targets.size())
        throw ValidationError("control point sources and targets must pair up");
    if (sources.size() < 3) throw ValidationError("need at least 3 control points");
    for (const Vec2& p : sources)
        if (!finite(p)) throw NonFiniteError("control point source is non-finite");
    for (const Vec2& p : targets)
        if (!finite(p)) throw NonFiniteError("control point target is non-finite");
    double min_x = sources[0].x, max_x = sources[0].x;
    double min_y = sources[0].y, max_y = sources[0].y;
    for (size_t i = 0; i < sources.size(); ++i) {
        min_x = std::min(min_x, sources[i].x);
        max_x = std::max(max_x, sources[i].x);
        min_y = std::min(min_y, sources[i].y);
        max_y = std::max(max_y, sources[i].y);
        for (size_t j = i + 1; j < sources.size(); ++j) {
            if (sources[i] == sources[j])
                throw SingularSystemError("duplicate source control points");
        }
    }
    const double bbox_area = (max_x - min_x) * (max_y - min_y);
    if (convex_hull_area(sources) <= 1e-9 * bbox_area)
        throw SingularSystemError("source control points are collinear");
}

double tps_kernel(double r) {
    if (r <= 0.0) return 0.0;
    return r * r * std::log(r);
}

TpsWarp tps_fit(const ControlPoints& points, double lambda) {
    points.validate();
    if (!finite(lambda) || lambda < 0.0) throw ValidationError("lambda must be finite and >= 0");
    const int k = static_cast<int>(points.size());
    const int n = k + 3;

    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double dx = points.sources[i].x - points.sources[j].x;
            const double dy = points.sources[i].y - points.sources[j].y;
            const double phi = tps_kernel(std::hypot(dx, dy));
            system(i, j) = phi;
            system(j, i) = phi;
        }
        system(i, i) = lambda;
        system(i, k + 0) = points.sources[i].x;
        system(i, k + 1) = points.sources[i].y;
        system(i, k + 2) = 1.0;
        system(k + 0, i) = points.sources[i].x;
        system(k + 1, i) = points.sources[i].y;
        system(k + 2, i) = 1.0;
    }

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    for (int i = 0; i < k; ++i) {
        rhs(i, 0) = points.targets[i].x;
        rhs(i, 1) = points.targets[i].y;
    }

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::MatrixXd solution = lu.solve(rhs);
    if (!solution.allFinite()) throw SingularSystemError("interpolation system is singular");
    const double residual = (system * solution - rhs).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (residual > 1e-6 * scale)
        throw SingularSystemError("interpolation system is numerically singular");

    TpsWarp warp;
    warp.lambda = lambda;
    warp.sources = points.sources;
    warp.weights.resize(points.size());
    for (int i = 0; i < k; ++i) warp.weights[i] = {solution(i, 0), solution(i, 1)};
    for (int d = 0; d < 2; ++d) {
        warp.affine[d][0] = solution(k + 0, d);
        warp.affine[d][1] = solution(k + 1, d);
        warp.affine[d][2] = solution(k + 2, d);
    }
    return warp;
}

Vec2 tps_eval(const TpsWarp& warp, double u, double v) {
    if (!finite(u) || !finite(v)) throw NonFiniteError("tps_eval input is non-finite");
    double x = warp.affine[0][0] * u + warp.affine[0][1] * v + warp.affine[0][2];
    double y = warp.affine[1][0] * u + warp.affine[1][1] * v + warp.affine[1][2];
    for (size_t i = 0; i < warp.sources.size(); ++i) {
        const double phi = tps_kernel(std::hypot(u - warp.sources[i].x, v - warp.sources[i].y));
        x += warp.weights[i].x * phi;
        y += warp.weights[i].y * phi;
    }
    return {x, y};
}

Vec2 offset_map(const OffsetMap& map, double i, double j) {
    if (!finite(i) || !finite(j)) throw NonFiniteError("offset_map input is non-finite");
    return {i + map.offset_x, j};
}

std::vector<FoldCollision> detect_collisions(std::span<const Vec2> mapped,
                                             std::span<const Vec2> sources, double cell_size) {
    if (cell_size <= 0.0) throw ValidationError("cell size must be positive");
    std::unordered_map<uint64_t, std::vector<size_t>> buckets;
    buckets.reserve(mapped.size());
    for (size_t i = 0; i < mapped.size(); ++i) {
        const uint64_t qx = static_cast<uint64_t>(quantize(mapped[i].x, cell_size));
        const uint64_t qy = static_cast<uint64_t>(quantize(mapped[i].y, cell_size));
        buckets[qx * 0x9E3779B97F4A7C15ull ^ qy].push_back(i);
    }
    std::vector<FoldCollision> collisions;
    for (size_t i = 0; i < mapped.size(); ++i) {
        const uint64_t qx = static_cast<uint64_t>(quantize(mapped[i].x, cell_size));
        const uint64_t qy = static_cast<uint64_t>(quantize(mapped[i].y, cell_size));
        for (size_t j : buckets[qx * 0x9E3779B97F4A7C15ull ^ qy]) {
            if (j <= i) continue;
            if (quantize(mapped[j].x, cell_size) == quantize(mapped[i].x, cell_size) &&
                quantize(mapped[j].y, cell_size) == quantize(mapped[i].y, cell_size)) {
                const Vec2 si = sources.empty() ? mapped[i] : sources[i];
                const Vec2 sj = sources.empty() ? mapped[j] : sources[j];
                collisions.push_back({i, j, si, sj});
            }
        }
    }
    return collisions;
}

std::vector<FoldCollision> detect_fold(const TpsWarp& warp, std::span<const Vec2> grid,
                                       double cell_size) {
    if (grid.empty()) throw ValidationError("fold detection grid must be non-empty");
    std::vector<Vec2> mapped;
    mapped.reserve(grid.size());
    for (const Vec2& p : grid) mapped.push_back(tps_eval(warp, p.x, p.y));
    return detect_collisions(mapped, grid, cell_size);
}

std::string to_json(const TpsWarp& warp) {
    nlohmann::ordered_json j;
    j["affine"] = {{warp.affine[0][0], warp.affine[0][1], warp.affine[0][2]},
                   {warp.affine[1][0], warp.affine[1][1], warp.affine[1][2]}};
    auto& weights = j["weights"] = nlohmann::ordered_json::array();
    for (const Vec2& w : warp.weights) weights.push_back({w.x, w.y});
    auto& sources = j["sources"] = nlohmann::ordered_json::array();
    for (const Vec2& s : warp.sources) sources.push_back({s.x, s.y});
    j["lambda"] = warp.lambda;
    return j.dump();
}

TpsWarp tps_warp_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    TpsWarp warp;
    for (int d = 0; d < 2; ++d)
        for (int c = 0; c < 3; ++c) warp.affine[d][c] = j.at("affine").at(d).at(c).get<double>();
    for (const auto& w : j.at("weights")) warp.weights.push_back({w.at(0), w.at(1)});
    for (const auto& s : j.at("sources")) warp.sources.push_back({s.at(0), s.at(1)});
    warp.lambda = j.value("lambda", 0.0);
    if (warp.weights.size() != warp.sources.size())
        throw ValidationError("weights and sources must have equal length");
    return warp;
}

} // namespace glyphalign
