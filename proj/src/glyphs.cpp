// Built-in stroke-rendered digit faces. Each digit is a set of polyline
// strokes on the unit box (x right, y down); faces vary thickness, slant,
// and width. Rasterization is a distance field with 1px anti-aliased edges.

#include <algorithm>
#include <cmath>
#include <vector>

#include "degbench/data.hpp"
#include "degbench/error.hpp"

namespace degbench {

namespace {

struct P {
    double x, y;
};
using Stroke = std::vector<P>;

void arc(Stroke& s, double cx, double cy, double rx, double ry, double a0_deg, double a1_deg,
         int segments = 14) {
    for (int i = 0; i <= segments; ++i) {
        const double t = (a0_deg + (a1_deg - a0_deg) * i / segments) * 3.14159265358979323846 /
                         180.0;
        s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
    }
}

// y grows downward: 0 deg = right, 90 deg = bottom, -90 deg = top.
std::vector<Stroke> digit_strokes(int digit) {
    std::vector<Stroke> strokes;
    switch (digit) {
        case 0: {
            Stroke s;
            arc(s, 0.5, 0.5, 0.32, 0.42, 0, 360, 28);
            strokes.push_back(std::move(s));
            break;
        }
        case 1: {
            strokes.push_back({{0.5, 0.08}, {0.5, 0.92}});
            break;
        }
        case 2: {
            Stroke top;
            arc(top, 0.5, 0.33, 0.30, 0.25, 180, 360);
            top.push_back({0.80, 0.40});
            top.push_back({0.22, 0.92});
            strokes.push_back(std::move(top));
            strokes.push_back({{0.22, 0.92}, {0.82, 0.92}});
            break;
        }
        case 3: {
            Stroke upper;
            arc(upper, 0.47, 0.29, 0.29, 0.21, -150, 90);
            strokes.push_back(std::move(upper));
            Stroke lower;
            arc(lower, 0.47, 0.70, 0.31, 0.23, -90, 150);
            strokes.push_back(std::move(lower));
            break;
        }
        case 4: {
            strokes.push_back({{0.64, 0.08}, {0.14, 0.62}, {0.86, 0.62}});
            strokes.push_back({{0.64, 0.08}, {0.64, 0.92}});
            break;
        }
        case 5: {
            strokes.push_back({{0.78, 0.08}, {0.26, 0.08}, {0.23, 0.45}});
            Stroke bowl;
            arc(bowl, 0.46, 0.67, 0.29, 0.25, -100, 150);
            strokes.push_back(std::move(bowl));
            break;
        }
        case 6: {
            Stroke sweep;
            arc(sweep, 0.52, 0.50, 0.31, 0.42, -70, -255, 20);
            strokes.push_back(std::move(sweep));
            Stroke loop;
            arc(loop, 0.5, 0.68, 0.27, 0.23, 0, 360, 22);
            strokes.push_back(std::move(loop));
            break;
        }
        case 7: {
            strokes.push_back({{0.18, 0.08}, {0.82, 0.08}, {0.38, 0.92}});
            break;
        }
        case 8: {
            Stroke upper;
            arc(upper, 0.5, 0.29, 0.26, 0.21, 0, 360, 22);
            strokes.push_back(std::move(upper));
            Stroke lower;
            arc(lower, 0.5, 0.71, 0.30, 0.23, 0, 360, 22);
            strokes.push_back(std::move(lower));
            break;
        }
        case 9: {
            Stroke loop;
            arc(loop, 0.5, 0.32, 0.28, 0.24, 0, 360, 22);
            strokes.push_back(std::move(loop));
            strokes.push_back({{0.78, 0.32}, {0.76, 0.60}, {0.60, 0.86}, {0.38, 0.92}});
            break;
        }
        default:
            throw UsageError("digit must be 0..9, got " + std::to_string(digit));
    }
    return strokes;
}

struct Face {
    const char* name;
    double thickness;  // stroke radius as a fraction of glyph height (x2)
    double slant;      // horizontal shear
    double aspect;     // width / height
};

constexpr Face kFaces[] = {
    {"sans", 0.085, 0.0, 0.62},
    {"bold", 0.14, 0.0, 0.66},
    {"thin", 0.05, 0.0, 0.60},
    {"italic", 0.085, 0.20, 0.62},
    {"wide", 0.10, 0.0, 0.80},
};

double dist_to_segment(double px, double py, const P& a, const P& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

std::vector<std::string> builtin_font_names() {
    std::vector<std::string> names;
    for (const auto& f : kFaces) names.emplace_back(f.name);
    return names;
}

GlyphMask render_digit(int digit, const std::string& font, int size_px) {
    const Face* face = nullptr;
    for (const auto& f : kFaces)
        if (font == f.name) face = &f;
    if (!face) throw DataError("unreadable font resource: " + font);
    if (size_px < 8) throw UsageError("render_digit: size must be >= 8 px");

    auto strokes = digit_strokes(digit);
    for (auto& s : strokes)
        for (auto& p : s) p.x += face->slant * (0.5 - p.y);

    // glyph body is size_px tall; the mask adds a border for stroke radius
    const double radius = 0.5 * face->thickness * size_px;
    const int border = static_cast<int>(std::ceil(radius)) + 1;
    const int h = size_px + 2 * border;
    const int w = static_cast<int>(std::lround(face->aspect * size_px)) + 2 * border +
                  static_cast<int>(std::ceil(face->slant * size_px * 0.5));
    std::vector<Stroke> px_strokes = strokes;
    for (auto& s : px_strokes)
        for (auto& p : s) {
            p.x = border + (p.x + face->slant * 0.25) * face->aspect * size_px;
            p.y = border + p.y * size_px;
        }

    GlyphMask mask;
    mask.height = h;
    mask.width = w;
    mask.alpha.assign(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double cx = x + 0.5, cy = y + 0.5;
            double best = 1e30;
            for (const auto& s : px_strokes)
                for (size_t i = 0; i + 1 < s.size(); ++i)
                    best = std::min(best, dist_to_segment(cx, cy, s[i], s[i + 1]));
            const double coverage = std::clamp(radius + 0.5 - best, 0.0, 1.0);
            mask.alpha[static_cast<size_t>(y) * w + x] = coverage;
        }
    return mask;
}

}  // namespace degbench
