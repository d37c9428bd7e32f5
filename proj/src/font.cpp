#include "glyphalign/font.hpp"

#include "glyphalign/errors.hpp"
#include "glyphalign/unicode.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace glyphalign {

namespace {

constexpr std::uint32_t tag4(char a, char b, char c, char d) {
    return (std::uint32_t(std::uint8_t(a)) << 24) | (std::uint32_t(std::uint8_t(b)) << 16) |
           (std::uint32_t(std::uint8_t(c)) << 8) | std::uint32_t(std::uint8_t(d));
}

struct OutlinePoint {
    double x;
    double y;
    bool on_curve;
};
using Contour = std::vector<OutlinePoint>;
using Outline = std::vector<Contour>;

struct Segment {
    double x0, y0, x1, y1;
};

// x' = a*x + c*y + dx ; y' = b*x + d*y + dy (sfnt composite convention)
struct Affine2 {
    double a = 1, b = 0, c = 0, d = 1, dx = 0, dy = 0;
};

} // namespace

struct FontFace::Impl {
    std::vector<std::uint8_t> data;

    int units_per_em = 0;
    int ascent = 0;  // font units, positive up
    int descent = 0; // font units, typically negative
    std::uint16_t num_glyphs = 0;
    std::uint16_t num_hmetrics = 0;

    std::uint32_t loca_off = 0, loca_len = 0;
    std::uint32_t glyf_off = 0, glyf_len = 0;
    std::uint32_t hmtx_off = 0;
    std::uint32_t cmap_sub = 0;
    int cmap_format = 0;
    bool loca_long = false;

    // --- bounds-checked big-endian readers -------------------------------
    std::uint8_t u8(std::uint32_t pos) const {
        if (pos >= data.size()) throw ConfigError("truncated font file");
        return data[pos];
    }
    std::uint16_t u16(std::uint32_t pos) const {
        return std::uint16_t((std::uint16_t(u8(pos)) << 8) | u8(pos + 1));
    }
    std::uint32_t u32(std::uint32_t pos) const {
        return (std::uint32_t(u16(pos)) << 16) | u16(pos + 2);
    }
    std::int16_t i16(std::uint32_t pos) const { return std::int16_t(u16(pos)); }
    double f2dot14(std::uint32_t pos) const { return i16(pos) / 16384.0; }

    bool find_table(std::uint32_t tag, std::uint32_t& off, std::uint32_t& len) const {
        const std::uint16_t count = u16(4);
        for (std::uint16_t i = 0; i < count; ++i) {
            const std::uint32_t rec = 12 + 16u * i;
            if (u32(rec) == tag) {
                off = u32(rec + 8);
                len = u32(rec + 12);
                if (std::uint64_t(off) + len > data.size())
                    throw ConfigError("font table extends past end of file");
                return true;
            }
        }
        return false;
    }

    // --- character map ---------------------------------------------------
    std::uint16_t glyph_index(char32_t cp) const {
        if (cmap_format == 4) {
            if (cp > 0xFFFF) return 0;
            const std::uint16_t seg_x2 = u16(cmap_sub + 6);
            const std::uint32_t ends = cmap_sub + 14;
            const std::uint32_t starts = ends + seg_x2 + 2;
            const std::uint32_t deltas = starts + seg_x2;
            const std::uint32_t range_offs = deltas + seg_x2;
            std::uint32_t lo = 0, hi = seg_x2 / 2;
            while (lo < hi) { // first segment with endCode >= cp
                const std::uint32_t mid = (lo + hi) / 2;
                if (u16(ends + 2 * mid) < cp)
                    lo = mid + 1;
                else
                    hi = mid;
            }
            if (lo >= seg_x2 / 2u) return 0;
            const std::uint16_t start = u16(starts + 2 * lo);
            if (cp < start) return 0;
            const std::uint16_t delta = u16(deltas + 2 * lo);
            const std::uint16_t range_off = u16(range_offs + 2 * lo);
            if (range_off == 0) return std::uint16_t((cp + delta) & 0xFFFF);
            const std::uint32_t addr = range_offs + 2 * lo + range_off + 2 * (cp - start);
            const std::uint16_t gid = u16(addr);
            return gid == 0 ? 0 : std::uint16_t((gid + delta) & 0xFFFF);
        }
        if (cmap_format == 12) {
            const std::uint32_t n_groups = u32(cmap_sub + 12);
            std::uint32_t lo = 0, hi = n_groups;
            while (lo < hi) {
                const std::uint32_t mid = (lo + hi) / 2;
                const std::uint32_t rec = cmap_sub + 16 + 12 * mid;
                if (u32(rec + 4) < cp)
                    lo = mid + 1;
                else
                    hi = mid;
            }
            if (lo >= n_groups) return 0;
            const std::uint32_t rec = cmap_sub + 16 + 12 * lo;
            const std::uint32_t start = u32(rec);
            if (cp < start) return 0;
            return std::uint16_t(u32(rec + 8) + (cp - start));
        }
        return 0;
    }

    int advance_units(std::uint16_t gid) const {
        const std::uint16_t idx = std::min<std::uint16_t>(gid, num_hmetrics - 1);
        return u16(hmtx_off + 4u * idx);
    }

    bool glyph_range(std::uint16_t gid, std::uint32_t& off, std::uint32_t& len) const {
        if (gid >= num_glyphs) return false;
        std::uint32_t a, b;
        if (loca_long) {
            a = u32(loca_off + 4u * gid);
            b = u32(loca_off + 4u * gid + 4);
        } else {
            a = 2u * u16(loca_off + 2u * gid);
            b = 2u * u16(loca_off + 2u * gid + 2);
        }
        if (b < a || b > glyf_len) throw ConfigError("corrupt glyph location table");
        off = glyf_off + a;
        len = b - a;
        return true;
    }

    // --- glyph outlines --------------------------------------------------
    void decode_glyph(std::uint16_t gid, const Affine2& xf, int depth, Outline& out) const {
        if (depth > 5) throw ConfigError("composite glyph nesting too deep");
        std::uint32_t off = 0, len = 0;
        if (!glyph_range(gid, off, len) || len == 0) return; // empty glyph (e.g. space)

        const int n_contours = i16(off);
        if (n_contours >= 0)
            decode_simple(off, std::uint16_t(n_contours), xf, out);
        else
            decode_composite(off + 10, xf, depth, out);
    }

    void decode_simple(std::uint32_t off, std::uint16_t n_contours, const Affine2& xf,
                       Outline& out) const {
        const std::uint32_t ends = off + 10;
        std::vector<std::uint16_t> end_pts(n_contours);
        for (std::uint16_t i = 0; i < n_contours; ++i) end_pts[i] = u16(ends + 2u * i);
        const std::uint16_t n_points = n_contours == 0 ? 0 : end_pts.back() + 1;

        std::uint32_t pos = ends + 2u * n_contours;
        pos += 2u + u16(pos); // skip hinting instructions

        std::vector<std::uint8_t> flags(n_points);
        for (std::uint16_t i = 0; i < n_points;) {
            const std::uint8_t f = u8(pos++);
            flags[i++] = f;
            if (f & 0x08) { // repeat
                std::uint8_t reps = u8(pos++);
                while (reps-- && i < n_points) flags[i++] = f;
            }
        }

        std::vector<double> xs(n_points), ys(n_points);
        int v = 0;
        for (std::uint16_t i = 0; i < n_points; ++i) {
            const std::uint8_t f = flags[i];
            if (f & 0x02) { // x is byte; 0x10 gives its sign
                const int d = u8(pos++);
                v += (f & 0x10) ? d : -d;
            } else if (!(f & 0x10)) {
                v += i16(pos);
                pos += 2;
            }
            xs[i] = v;
        }
        v = 0;
        for (std::uint16_t i = 0; i < n_points; ++i) {
            const std::uint8_t f = flags[i];
            if (f & 0x04) {
                const int d = u8(pos++);
                v += (f & 0x20) ? d : -d;
            } else if (!(f & 0x20)) {
                v += i16(pos);
                pos += 2;
            }
            ys[i] = v;
        }

        std::uint16_t start = 0;
        for (std::uint16_t c = 0; c < n_contours; ++c) {
            const std::uint16_t stop = end_pts[c];
            Contour contour;
            contour.reserve(stop - start + 1u);
            for (std::uint16_t i = start; i <= stop; ++i) {
                const double x = xs[i], y = ys[i];
                contour.push_back({xf.a * x + xf.c * y + xf.dx, xf.b * x + xf.d * y + xf.dy,
                                   (flags[i] & 0x01) != 0});
            }
            if (contour.size() >= 2) out.push_back(std::move(contour));
            start = stop + 1;
        }
    }

    void decode_composite(std::uint32_t pos, const Affine2& xf, int depth, Outline& out) const {
        bool more = true;
        while (more) {
            const std::uint16_t flags = u16(pos);
            const std::uint16_t comp_gid = u16(pos + 2);
            pos += 4;
            more = (flags & 0x0020) != 0;

            if (!(flags & 0x0002))
                throw ConfigError("composite glyph uses point-matching placement (unsupported)");
            double dx, dy;
            if (flags & 0x0001) {
                dx = i16(pos);
                dy = i16(pos + 2);
                pos += 4;
            } else {
                dx = std::int8_t(u8(pos));
                dy = std::int8_t(u8(pos + 1));
                pos += 2;
            }

            Affine2 local;
            if (flags & 0x0008) {
                local.a = local.d = f2dot14(pos);
                pos += 2;
            } else if (flags & 0x0040) {
                local.a = f2dot14(pos);
                local.d = f2dot14(pos + 2);
                pos += 4;
            } else if (flags & 0x0080) {
                local.a = f2dot14(pos);
                local.b = f2dot14(pos + 2);
                local.c = f2dot14(pos + 4);
                local.d = f2dot14(pos + 6);
                pos += 8;
            }
            local.dx = dx;
            local.dy = dy;

            // compose: component point -> local -> xf
            Affine2 full;
            full.a = xf.a * local.a + xf.c * local.b;
            full.b = xf.b * local.a + xf.d * local.b;
            full.c = xf.a * local.c + xf.c * local.d;
            full.d = xf.b * local.c + xf.d * local.d;
            full.dx = xf.a * local.dx + xf.c * local.dy + xf.dx;
            full.dy = xf.b * local.dx + xf.d * local.dy + xf.dy;
            decode_glyph(comp_gid, full, depth + 1, out);
        }
    }
};

// ---------------------------------------------------------------------------
// Curve flattening and scanline fill
// ---------------------------------------------------------------------------

namespace {

void emit_segment(std::vector<Segment>& segments, double x0, double y0, double x1, double y1) {
    if (x0 == x1 && y0 == y1) return;
    segments.push_back({x0, y0, x1, y1});
}

void flatten_quad(std::vector<Segment>& segments, double x0, double y0, double cx, double cy,
                  double x1, double y1, int depth) {
    const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
    const double dev = std::abs(cx - mx) + std::abs(cy - my);
    if (depth >= 16 || dev <= 0.25) {
        emit_segment(segments, x0, y0, x1, y1);
        return;
    }
    const double ax = 0.5 * (x0 + cx), ay = 0.5 * (y0 + cy);
    const double bx = 0.5 * (cx + x1), by = 0.5 * (cy + y1);
    const double sx = 0.5 * (ax + bx), sy = 0.5 * (ay + by);
    flatten_quad(segments, x0, y0, ax, ay, sx, sy, depth + 1);
    flatten_quad(segments, sx, sy, bx, by, x1, y1, depth + 1);
}

/// Walks one contour of on/off points (quadratic B-spline convention with
/// implied on-curve midpoints) and emits flattened line segments.
void contour_to_segments(const Contour& raw, std::vector<Segment>& segments) {
    if (raw.size() < 2) return;
    Contour work;
    work.reserve(raw.size() + 2);
    size_t first_on = raw.size();
    for (size_t i = 0; i < raw.size(); ++i)
        if (raw[i].on_curve) {
            first_on = i;
            break;
        }
    if (first_on < raw.size()) {
        for (size_t i = 0; i < raw.size(); ++i) work.push_back(raw[(first_on + i) % raw.size()]);
    } else {
        work.push_back({0.5 * (raw.back().x + raw.front().x),
                        0.5 * (raw.back().y + raw.front().y), true});
        work.insert(work.end(), raw.begin(), raw.end());
    }
    work.push_back(work.front()); // close the loop with an on-curve sentinel

    OutlinePoint cur = work.front();
    size_t i = 1;
    while (i < work.size()) {
        const OutlinePoint& q = work[i];
        if (q.on_curve) {
            emit_segment(segments, cur.x, cur.y, q.x, q.y);
            cur = q;
            ++i;
        } else {
            const OutlinePoint& r = work[i + 1];
            if (r.on_curve) {
                flatten_quad(segments, cur.x, cur.y, q.x, q.y, r.x, r.y, 0);
                cur = r;
                i += 2;
            } else {
                const OutlinePoint mid{0.5 * (q.x + r.x), 0.5 * (q.y + r.y), true};
                flatten_quad(segments, cur.x, cur.y, q.x, q.y, mid.x, mid.y, 0);
                cur = mid;
                ++i;
            }
        }
    }
}

struct Edge {
    double x0, y0, x1, y1; // y0 < y1
    int dir;               // +1 when the original segment pointed downward
};

void paint_span(std::vector<double>& row, int width, double xa, double xb, double weight) {
    xa = std::max(xa, 0.0);
    xb = std::min(xb, double(width));
    if (xb <= xa) return;
    int pa = int(xa), pb = int(xb);
    if (pb >= width) pb = width - 1;
    if (pa == pb) {
        row[pa] += (xb - xa) * weight;
        return;
    }
    row[pa] += (pa + 1 - xa) * weight;
    for (int p = pa + 1; p < pb; ++p) row[p] += weight;
    row[pb] += (xb - pb) * weight;
}

constexpr int kSubScanlines = 4;

GlyphBitmap rasterize(std::vector<Segment>& segments) {
    GlyphBitmap bmp;
    if (segments.empty()) return bmp;

    double min_x = segments[0].x0, max_x = min_x, min_y = segments[0].y0, max_y = min_y;
    for (const Segment& s : segments) {
        min_x = std::min({min_x, s.x0, s.x1});
        max_x = std::max({max_x, s.x0, s.x1});
        min_y = std::min({min_y, s.y0, s.y1});
        max_y = std::max({max_y, s.y0, s.y1});
    }
    const int x_lo = int(std::floor(min_x)), y_lo = int(std::floor(min_y));
    const int width = std::max(1, int(std::ceil(max_x)) - x_lo);
    const int height = std::max(1, int(std::ceil(max_y)) - y_lo);

    std::vector<Edge> edges;
    edges.reserve(segments.size());
    for (const Segment& s : segments) {
        if (s.y0 == s.y1) continue; // horizontals never cross a scanline
        Edge e;
        if (s.y0 < s.y1)
            e = {s.x0 - x_lo, s.y0 - y_lo, s.x1 - x_lo, s.y1 - y_lo, +1};
        else
            e = {s.x1 - x_lo, s.y1 - y_lo, s.x0 - x_lo, s.y0 - y_lo, -1};
        edges.push_back(e);
    }
    if (edges.empty()) return bmp;
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return a.y0 < b.y0; });

    bmp.width = width;
    bmp.height = height;
    bmp.left = x_lo;
    bmp.top = y_lo; // provisional: line-space offset, rebased by the caller
    bmp.alpha.assign(size_t(width) * height, 0);

    std::vector<double> row(width);
    std::vector<const Edge*> active;
    std::vector<std::pair<double, int>> crossings;
    size_t next_edge = 0;

    for (int r = 0; r < height; ++r) {
        std::fill(row.begin(), row.end(), 0.0);
        for (int s = 0; s < kSubScanlines; ++s) {
            const double ys = r + (s + 0.5) / kSubScanlines;
            while (next_edge < edges.size() && edges[next_edge].y0 <= ys)
                active.push_back(&edges[next_edge++]);
            std::erase_if(active, [ys](const Edge* e) { return e->y1 <= ys; });

            crossings.clear();
            for (const Edge* e : active) {
                if (e->y0 > ys) continue; // queued for a later sub-scanline
                const double t = (ys - e->y0) / (e->y1 - e->y0);
                crossings.emplace_back(e->x0 + t * (e->x1 - e->x0), e->dir);
            }
            std::sort(crossings.begin(), crossings.end());

            int winding = 0;
            double span_start = 0;
            for (const auto& [x, dir] : crossings) {
                if (winding == 0) span_start = x;
                winding += dir;
                if (winding == 0) paint_span(row, width, span_start, x, 1.0 / kSubScanlines);
            }
        }
        for (int x = 0; x < width; ++x) {
            const double a = std::clamp(row[x], 0.0, 1.0);
            bmp.alpha[size_t(r) * width + x] = std::uint8_t(std::lround(a * 255.0));
        }
    }
    return bmp;
}

void trim_to_ink(GlyphBitmap& bmp) {
    int min_x = bmp.width, max_x = -1, min_y = bmp.height, max_y = -1;
    for (int y = 0; y < bmp.height; ++y)
        for (int x = 0; x < bmp.width; ++x)
            if (bmp.at(x, y) != 0) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    if (max_x < 0) {
        bmp = GlyphBitmap{};
        return;
    }
    if (min_x == 0 && min_y == 0 && max_x == bmp.width - 1 && max_y == bmp.height - 1) return;
    GlyphBitmap tight;
    tight.width = max_x - min_x + 1;
    tight.height = max_y - min_y + 1;
    tight.left = bmp.left + min_x;
    tight.top = bmp.top + min_y;
    tight.alpha.resize(size_t(tight.width) * tight.height);
    for (int y = 0; y < tight.height; ++y)
        std::memcpy(&tight.alpha[size_t(y) * tight.width],
                    &bmp.alpha[size_t(y + min_y) * bmp.width + min_x], size_t(tight.width));
    bmp = std::move(tight);
}

} // namespace

// ---------------------------------------------------------------------------
// FontFace
// ---------------------------------------------------------------------------

FontFace::FontFace() : impl_(std::make_unique<Impl>()) {}
FontFace::~FontFace() = default;

std::shared_ptr<const FontFace> FontFace::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open font file: " + path);
    std::shared_ptr<FontFace> face(new FontFace());
    face->path_ = path;
    Impl& f = *face->impl_;
    f.data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (f.data.size() < 12) throw ConfigError("not a font file: " + path);

    const std::uint32_t version = f.u32(0);
    if (version == tag4('O', 'T', 'T', 'O'))
        throw ConfigError("CFF-outline OpenType fonts are not supported: " + path);
    if (version == tag4('t', 't', 'c', 'f'))
        throw ConfigError("TrueType collections are not supported: " + path);
    if (version != 0x00010000 && version != tag4('t', 'r', 'u', 'e'))
        throw ConfigError("unrecognized font format: " + path);

    std::uint32_t off = 0, len = 0;
    if (!f.find_table(tag4('h', 'e', 'a', 'd'), off, len))
        throw ConfigError("font missing head table: " + path);
    f.units_per_em = f.u16(off + 18);
    f.loca_long = f.i16(off + 50) != 0;
    if (f.units_per_em == 0) throw ConfigError("font reports zero units per em: " + path);

    if (!f.find_table(tag4('m', 'a', 'x', 'p'), off, len))
        throw ConfigError("font missing maxp table: " + path);
    f.num_glyphs = f.u16(off + 4);

    if (!f.find_table(tag4('h', 'h', 'e', 'a'), off, len))
        throw ConfigError("font missing hhea table: " + path);
    f.ascent = f.i16(off + 4);
    f.descent = f.i16(off + 6);
    f.num_hmetrics = f.u16(off + 34);
    if (f.num_hmetrics == 0) throw ConfigError("font has no horizontal metrics: " + path);
    if (f.ascent <= f.descent) throw ConfigError("font has degenerate vertical metrics: " + path);

    if (!f.find_table(tag4('h', 'm', 't', 'x'), f.hmtx_off, len))
        throw ConfigError("font missing hmtx table: " + path);
    if (!f.find_table(tag4('l', 'o', 'c', 'a'), f.loca_off, f.loca_len))
        throw ConfigError("font missing loca table (glyf outlines required): " + path);
    if (!f.find_table(tag4('g', 'l', 'y', 'f'), f.glyf_off, f.glyf_len))
        throw ConfigError("font missing glyf table: " + path);

    if (!f.find_table(tag4('c', 'm', 'a', 'p'), off, len))
        throw ConfigError("font missing cmap table: " + path);
    const std::uint16_t n_records = f.u16(off + 2);
    int best_score = 0;
    for (std::uint16_t i = 0; i < n_records; ++i) {
        const std::uint32_t rec = off + 4 + 8u * i;
        const std::uint16_t platform = f.u16(rec);
        const std::uint16_t encoding = f.u16(rec + 2);
        const std::uint32_t sub = off + f.u32(rec + 4);
        const std::uint16_t format = f.u16(sub);
        if (format != 4 && format != 12) continue;
        int score = 0;
        if (platform == 3 && encoding == 10)
            score = 5;
        else if (platform == 0 && format == 12)
            score = 4;
        else if (platform == 3 && encoding == 1)
            score = 3;
        else if (platform == 0)
            score = 2;
        else
            score = 1;
        if (format == 12) score += 1; // prefer full-range maps on ties
        if (score > best_score) {
            best_score = score;
            f.cmap_sub = sub;
            f.cmap_format = format;
        }
    }
    if (best_score == 0)
        throw ConfigError("font has no usable unicode character map: " + path);
    return face;
}

int FontFace::units_per_em() const { return impl_->units_per_em; }

bool FontFace::has_glyph(char32_t cp) const { return impl_->glyph_index(cp) != 0; }

bool FontFace::covers(const std::u32string& text) const {
    return std::all_of(text.begin(), text.end(), [this](char32_t cp) { return has_glyph(cp); });
}

double FontFace::scale_for_height(double pixel_height) const {
    return pixel_height / double(impl_->ascent - impl_->descent);
}

double FontFace::ascent_px(double pixel_height) const {
    return impl_->ascent * scale_for_height(pixel_height);
}

double FontFace::advance_px_at(const std::u32string& text, double pixel_height) const {
    const double scale = scale_for_height(pixel_height);
    double total = 0.0;
    for (char32_t cp : text) {
        const std::uint16_t gid = impl_->glyph_index(cp);
        if (gid == 0 && cp != U' ')
            throw GlyphMissingError("font " + path_ + " has no glyph for U+" +
                                    codepoint_hex(cp));
        total += impl_->advance_units(gid) * scale;
    }
    return total;
}

double FontFace::advance_px(const std::u32string& text) const {
    return advance_px_at(text, double(kStripHeight));
}

LineRender FontFace::render_line(const std::u32string& text, double pixel_height) const {
    const double scale = scale_for_height(pixel_height);
    const double ascent = impl_->ascent * scale;

    std::vector<Segment> segments;
    double pen_x = 0.0;
    for (char32_t cp : text) {
        const std::uint16_t gid = impl_->glyph_index(cp);
        if (gid == 0 && cp != U' ')
            throw GlyphMissingError("font " + path_ + " has no glyph for U+" +
                                    codepoint_hex(cp));
        Outline outline;
        impl_->decode_glyph(gid, Affine2{}, 0, outline);
        const size_t first_new = segments.size();
        for (const Contour& contour : outline) contour_to_segments(contour, segments);
        // map font units (y up, pen-relative) to line space (y down, baseline 0)
        for (size_t i = first_new; i < segments.size(); ++i) {
            Segment& s = segments[i];
            s.x0 = pen_x + s.x0 * scale;
            s.x1 = pen_x + s.x1 * scale;
            s.y0 = -s.y0 * scale;
            s.y1 = -s.y1 * scale;
        }
        pen_x += impl_->advance_units(gid) * scale;
    }

    LineRender render;
    render.advance_px = pen_x;
    render.baseline_px = ascent;
    render.bitmap = rasterize(segments);
    trim_to_ink(render.bitmap);
    // rebase the vertical offset from baseline-relative to line-top-relative
    if (!render.bitmap.empty()) render.bitmap.top += int(std::lround(ascent));
    return render;
}

} // namespace glyphalign
