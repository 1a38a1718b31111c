#include "gradid/digits.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "gradid/errors.hpp"
#include "gradid/rng.hpp"

namespace gradid {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct Point {
    double x, y;
};

using Polyline = std::vector<Point>;
using Glyph = std::vector<Polyline>;

Polyline bezier(Point a, Point c, Point b, int samples = 10) {
    Polyline line;
    line.reserve(samples + 1);
    for (int i = 0; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        const double u = 1.0 - t;
        line.push_back({u * u * a.x + 2 * u * t * c.x + t * t * b.x,
                        u * u * a.y + 2 * u * t * c.y + t * t * b.y});
    }
    return line;
}

Polyline segment(Point a, Point b) { return {a, b}; }

Polyline ellipse(Point center, double rx, double ry, int samples = 24) {
    Polyline line;
    line.reserve(samples + 1);
    for (int i = 0; i <= samples; ++i) {
        const double t = 2.0 * kPi * static_cast<double>(i) / samples;
        line.push_back({center.x + rx * std::cos(t), center.y + ry * std::sin(t)});
    }
    return line;
}

// Glyphs live in the unit square, y pointing up.
const std::array<Glyph, 10>& glyphs() {
    static const std::array<Glyph, 10> g = {{
        // 0
        {ellipse({0.50, 0.50}, 0.22, 0.33)},
        // 1
        {segment({0.50, 0.90}, {0.50, 0.10}), segment({0.36, 0.72}, {0.50, 0.90})},
        // 2
        {bezier({0.28, 0.68}, {0.50, 1.02}, {0.72, 0.66}), bezier({0.72, 0.66}, {0.72, 0.34}, {0.28, 0.10}),
         segment({0.28, 0.10}, {0.74, 0.10})},
        // 3
        {bezier({0.30, 0.80}, {0.80, 0.98}, {0.52, 0.52}), bezier({0.52, 0.52}, {0.88, 0.30}, {0.30, 0.12})},
        // 4
        {segment({0.62, 0.90}, {0.24, 0.40}), segment({0.24, 0.40}, {0.78, 0.40}),
         segment({0.62, 0.90}, {0.62, 0.10})},
        // 5
        {segment({0.72, 0.90}, {0.32, 0.90}), segment({0.32, 0.90}, {0.32, 0.56}),
         bezier({0.32, 0.56}, {0.82, 0.58}, {0.70, 0.28}), bezier({0.70, 0.28}, {0.58, 0.06}, {0.28, 0.16})},
        // 6
        {bezier({0.64, 0.88}, {0.28, 0.76}, {0.31, 0.40}), ellipse({0.48, 0.28}, 0.17, 0.17, 20)},
        // 7
        {segment({0.26, 0.88}, {0.74, 0.88}), segment({0.74, 0.88}, {0.42, 0.10})},
        // 8
        {ellipse({0.50, 0.67}, 0.16, 0.17, 20), ellipse({0.50, 0.29}, 0.19, 0.20, 20)},
        // 9
        {ellipse({0.52, 0.66}, 0.17, 0.17, 20), bezier({0.69, 0.66}, {0.69, 0.28}, {0.50, 0.10})},
    }};
    return g;
}

double point_segment_distance(double px, double py, Point a, Point b) {
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double wx = px - a.x;
    const double wy = py - a.y;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    const double dx = px - (a.x + t * vx);
    const double dy = py - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

struct Affine {
    // p' = M (p - c) + c + t, with c the glyph box center.
    double m00, m01, m10, m11, tx, ty;

    Point apply(Point p) const {
        const double x = p.x - 0.5;
        const double y = p.y - 0.5;
        return {m00 * x + m01 * y + 0.5 + tx, m10 * x + m11 * y + 0.5 + ty};
    }
};

}  // namespace

Dataset gen_digits(const DigitsSpec& spec) {
    if (spec.count == 0) throw ParameterError("digit count must be positive");
    if (spec.side < 8) throw ParameterError("raster side must be at least 8 pixels");
    if (spec.pixel_noise < 0.0) throw ParameterError("pixel noise must be non-negative");

    Dataset ds;
    ds.source = Dataset::Source::synthetic;
    ds.seed = spec.seed;
    ds.num_classes = 10;
    ds.inputs.reserve(spec.count);
    ds.labels.reserve(spec.count);

    Rng rng(spec.seed);
    const std::size_t side = spec.side;
    const double inv_side = 1.0 / static_cast<double>(side);

    std::vector<Polyline> strokes;
    for (std::size_t i = 0; i < spec.count; ++i) {
        const int label = static_cast<int>(i % 10);

        const double theta = rng.uniform(-0.22, 0.22);
        const double sx = rng.uniform(0.82, 1.18);
        const double sy = rng.uniform(0.82, 1.18);
        const double shear = rng.uniform(-0.18, 0.18);
        const double ct = std::cos(theta);
        const double st = std::sin(theta);
        Affine t{};
        // rotation * shear * scale
        t.m00 = ct * sx + (-st) * (shear * sx);
        t.m01 = ct * (0.0) + (-st) * sy;
        t.m10 = st * sx + ct * (shear * sx);
        t.m11 = st * (0.0) + ct * sy;
        t.tx = rng.uniform(-0.10, 0.10);
        t.ty = rng.uniform(-0.10, 0.10);
        const double width = rng.uniform(0.045, 0.075);

        strokes.clear();
        for (const Polyline& stroke : glyphs()[static_cast<std::size_t>(label)]) {
            Polyline moved;
            moved.reserve(stroke.size());
            for (Point p : stroke) moved.push_back(t.apply(p));
            strokes.push_back(std::move(moved));
        }

        std::vector<double> pixels(side * side, 0.0);
        for (std::size_t r = 0; r < side; ++r) {
            const double y = 1.0 - (static_cast<double>(r) + 0.5) * inv_side;
            for (std::size_t c = 0; c < side; ++c) {
                const double x = (static_cast<double>(c) + 0.5) * inv_side;
                double dist = 1e9;
                for (const Polyline& stroke : strokes) {
                    for (std::size_t s = 0; s + 1 < stroke.size(); ++s) {
                        dist = std::min(dist, point_segment_distance(x, y, stroke[s], stroke[s + 1]));
                    }
                }
                const double ratio = dist / width;
                double v = 1.35 * std::exp(-2.0 * ratio * ratio);
                if (spec.pixel_noise > 0.0) v += spec.pixel_noise * rng.normal();
                pixels[r * side + c] = std::min(1.0, std::max(0.0, v));
            }
        }
        ds.inputs.emplace_back(std::vector<std::size_t>{side, side}, std::move(pixels));
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace gradid
