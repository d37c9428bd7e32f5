#include "glyphalign/pe.hpp"

#include "glyphalign/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace glyphalign {

namespace {

// Condition token grid of a layout under the alignment's latent factor.
TokenGrid condition_grid(const ConditionLayout& layout, int latent_factor) {
    return TokenGrid::from_pixels(layout.canvas_width, ConditionLayout::canvas_height, latent_factor);
}

void rotate_block(double* block, int dim, double pos, double base) {
    for (int k = 0; 2 * k < dim; ++k) {
        const double theta = std::pow(base, -2.0 * k / dim);
        const double angle = pos * theta;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double a = block[2 * k];
        const double b = block[2 * k + 1];
        block[2 * k] = a * c - b * s;
        block[2 * k + 1] = a * s + b * c;
    }
}

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out += buf;
}

} // namespace

TargetRegion token_region_from_pixel_rect(const PixelRect& rect, int latent_factor) {
    if (latent_factor < 1) throw ValidationError("latent_factor must be >= 1");
    if (!rect.valid()) throw ValidationError("pixel rect must be non-degenerate");
    const double f = static_cast<double>(latent_factor);
    TargetRegion region;
    region.x1 = rect.x1 / f;
    region.y1 = rect.y1 / f;
    region.x2 = rect.x2 / f - 1.0;
    region.y2 = rect.y2 / f - 1.0;
    region.space = CoordSpace::Token;
    return region;
}

AlignmentMap build_alignment_map(const std::vector<ConditionPatch>& patches,
                                 const TokenGrid& target_grid, AlignMode mode, double lambda,
                                 AlignmentDiagnostics* diag) {
    if (target_grid.rows < 1 || target_grid.cols < 1 || target_grid.latent_factor < 1)
        throw ValidationError("target grid must be non-empty");

    AlignmentMap map;
    map.mode = mode;
    map.target = target_grid;
    map.entries.reserve(static_cast<size_t>(target_grid.rows) * target_grid.cols);

    int index = 0;
    for (int r = 0; r < target_grid.rows; ++r) {
        for (int c = 0; c < target_grid.cols; ++c) {
            map.entries.push_back({index++, TokenSource::Target, -1,
                                   {static_cast<double>(c), static_cast<double>(r)}});
        }
    }

    WarpDiagnostics warp_diag;
    std::vector<Vec2> condition_coords;
    std::vector<Vec2> condition_sources;
    int layout_free_col = 0;
    for (size_t box = 0; box < patches.size(); ++box) {
        const ConditionPatch& patch = patches[box];
        const TokenGrid grid = condition_grid(patch.layout, target_grid.latent_factor);

        AffineBoxMap affine;
        TpsWarp tps;
        OffsetMap offset{static_cast<double>(target_grid.cols)};
        switch (mode) {
        case AlignMode::Affine: {
            if (!patch.region)
                throw ValidationError("box " + std::to_string(box) + ": affine mode needs a region");
            TargetRegion region = *patch.region;
            if (region.space == CoordSpace::Pixel) {
                const double f = static_cast<double>(target_grid.latent_factor);
                region = {region.x1 / f, region.y1 / f, region.x2 / f, region.y2 / f,
                          CoordSpace::Token};
            }
            affine = {grid.cols, grid.rows, region};
            break;
        }
        case AlignMode::Tps:
            if (!patch.control_points)
                throw ValidationError("box " + std::to_string(box) +
                                      ": tps mode needs control points");
            tps = tps_fit(*patch.control_points, lambda);
            break;
        case AlignMode::LayoutFree:
            break;
        }

        for (int r = 0; r < grid.rows; ++r) {
            for (int c = 0; c < grid.cols; ++c) {
                const double u = static_cast<double>(c);
                const double v = static_cast<double>(r);
                Vec2 coord;
                switch (mode) {
                case AlignMode::Affine:
                    coord = affine_map(affine, u, v, &warp_diag);
                    break;
                case AlignMode::Tps:
                    coord = tps_eval(tps, u, v);
                    break;
                case AlignMode::LayoutFree:
                    coord = offset_map(offset, static_cast<double>(layout_free_col + c), v);
                    break;
                }
                map.entries.push_back({index++, TokenSource::Condition, static_cast<int>(box), coord});
                condition_coords.push_back(coord);
                condition_sources.push_back({u, v});
            }
        }
        layout_free_col += grid.cols;
    }

    if (diag) {
        diag->extrapolated += warp_diag.extrapolated.load();
        const auto collisions = detect_collisions(condition_coords, condition_sources);
        diag->overlap_collisions += collisions.size();
        if (!collisions.empty()) {
            diag->warnings.push_back("overlap: " + std::to_string(collisions.size()) +
                                     " condition token pairs share a coordinate cell");
        }
    }
    return map;
}

RopeConfig RopeConfig::split_evenly(int head_dim, double base) {
    RopeConfig cfg;
    cfg.head_dim = head_dim;
    cfg.dim_y = head_dim / 2;
    cfg.dim_x = head_dim - cfg.dim_y;
    cfg.base = base;
    cfg.validate();
    return cfg;
}

void RopeConfig::validate() const {
    if (head_dim < 4 || head_dim % 2 != 0)
        throw ValidationError("head_dim must be an even integer >= 4");
    if (dim_y < 2 || dim_x < 2 || dim_y % 2 != 0 || dim_x % 2 != 0)
        throw ValidationError("axis dims must be even integers >= 2");
    if (dim_y + dim_x != head_dim) throw ValidationError("axis dims must sum to head_dim");
    if (!(base > 1.0)) throw ValidationError("base must be > 1");
}

std::vector<double> rope_encode(std::span<const double> vec, Vec2 coord, const RopeConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(vec.size()) != cfg.head_dim)
        throw DimensionMismatchError("vector length " + std::to_string(vec.size()) +
                                     " does not match head_dim " + std::to_string(cfg.head_dim));
    std::vector<double> out(vec.begin(), vec.end());
    rotate_block(out.data(), cfg.dim_y, coord.y, cfg.base);
    rotate_block(out.data() + cfg.dim_y, cfg.dim_x, coord.x, cfg.base);
    return out;
}

ProbeMatrix attention_probe(const AlignmentMap& map, const RopeConfig& cfg,
                            const std::vector<std::vector<double>>& queries,
                            const std::vector<std::vector<double>>& keys) {
    const size_t n = map.entries.size();
    if (queries.size() != n || keys.size() != n)
        throw DimensionMismatchError("need one query and key vector per token");
    std::vector<std::vector<double>> q_enc(n), k_enc(n);
    for (size_t i = 0; i < n; ++i) {
        q_enc[i] = rope_encode(queries[i], map.entries[i].coord, cfg);
        k_enc[i] = rope_encode(keys[i], map.entries[i].coord, cfg);
    }
    ProbeMatrix probe;
    probe.size = n;
    probe.dots.resize(n * n);
    for (size_t a = 0; a < n; ++a) {
        for (size_t b = 0; b < n; ++b) {
            double dot = 0.0;
            for (int d = 0; d < cfg.head_dim; ++d) dot += q_enc[a][d] * k_enc[b][d];
            probe.dots[a * n + b] = dot;
        }
    }
    return probe;
}

std::string to_string(AlignMode mode) {
    switch (mode) {
    case AlignMode::Affine: return "affine";
    case AlignMode::Tps: return "tps";
    case AlignMode::LayoutFree: return "offset";
    }
    throw ValidationError("unknown alignment mode");
}

AlignMode align_mode_from_string(const std::string& text) {
    if (text == "affine") return AlignMode::Affine;
    if (text == "tps") return AlignMode::Tps;
    if (text == "offset" || text == "layout_free") return AlignMode::LayoutFree;
    throw ValidationError("unknown alignment mode: " + text);
}

std::string to_json(const AlignmentMap& map) {
    std::string out;
    out.reserve(64 + map.entries.size() * 56);
    out += "{\"mode\":\"";
    out += to_string(map.mode);
    out += "\",\"target\":{\"rows\":";
    out += std::to_string(map.target.rows);
    out += ",\"cols\":";
    out += std::to_string(map.target.cols);
    out += "},\"entries\":[";
    for (size_t i = 0; i < map.entries.size(); ++i) {
        const AlignmentEntry& e = map.entries[i];
        if (i) out += ',';
        out += "{\"idx\":";
        out += std::to_string(e.token_index);
        out += ",\"src\":\"";
        out += (e.source == TokenSource::Target ? "target" : "cond");
        out += "\",\"box\":";
        out += (e.source == TokenSource::Target ? "null" : std::to_string(e.box_id));
        out += ",\"x\":";
        append_double(out, e.coord.x);
        out += ",\"y\":";
        append_double(out, e.coord.y);
        out += '}';
    }
    out += "]}";
    return out;
}

AlignmentMap alignment_map_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    AlignmentMap map;
    map.mode = align_mode_from_string(j.at("mode").get<std::string>());
    map.target.rows = j.at("target").at("rows").get<int>();
    map.target.cols = j.at("target").at("cols").get<int>();
    for (const auto& e : j.at("entries")) {
        AlignmentEntry entry;
        entry.token_index = e.at("idx").get<int>();
        const std::string src = e.at("src").get<std::string>();
        if (src == "target") {
            entry.source = TokenSource::Target;
            entry.box_id = -1;
        } else if (src == "cond") {
            entry.source = TokenSource::Condition;
            entry.box_id = e.at("box").get<int>();
        } else {
            throw ValidationError("unknown entry source: " + src);
        }
        entry.coord = {e.at("x").get<double>(), e.at("y").get<double>()};
        map.entries.push_back(entry);
    }
    return map;
}

} // namespace glyphalign
