#include "dsseg/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>

namespace dsseg {

namespace {

struct Rgb {
    std::uint8_t r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};
constexpr Rgb kLine{31, 119, 180};

// 3x5 glyphs, one row per entry, bit 2 = leftmost column.
const std::array<std::uint8_t, 5>* glyph(char c) {
    static const std::array<std::uint8_t, 5> digits[10] = {
        {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
        {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}};
    static const std::array<std::uint8_t, 5> dot{0, 0, 0, 0, 2};
    if (c >= '0' && c <= '9') return &digits[c - '0'];
    if (c == '.') return &dot;
    return nullptr;
}

class Canvas {
public:
    Canvas(int w, int h) : img_{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, 255)} {}

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
        const auto i = (static_cast<std::size_t>(y) * img_.width + x) * 3;
        img_.rgb[i] = c.r;
        img_.rgb[i + 1] = c.g;
        img_.rgb[i + 2] = c.b;
    }

    void hline(int x0, int x1, int y, Rgb c) {
        for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    }
    void vline(int x, int y0, int y1, Rgb c) {
        for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) set(x, y, c);
    }

    // Bresenham, drawn 2 px thick.
    void line(int x0, int y0, int x1, int y1, Rgb c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            set(x0 + 1, y0, c);
            set(x0, y0 + 1, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void dot(int x, int y, Rgb c) {
        for (int oy = -2; oy <= 2; ++oy)
            for (int ox = -2; ox <= 2; ++ox)
                if (ox * ox + oy * oy <= 5) set(x + ox, y + oy, c);
    }

    // Text at scale 2; (x, y) is the top-left corner.
    void text(int x, int y, const std::string& s, Rgb c) {
        for (char ch : s) {
            if (const auto* g = glyph(ch)) {
                for (int r = 0; r < 5; ++r)
                    for (int col = 0; col < 3; ++col)
                        if ((*g)[r] & (4 >> col))
                            for (int k = 0; k < 4; ++k) set(x + 2 * col + k % 2, y + 2 * r + k / 2, c);
            }
            x += 8;
        }
    }
    static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 8 - 2; }

    Image take() { return std::move(img_); }

private:
    Image img_;
};

std::string fmt(const char* f, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

Image render_val_dice(const std::vector<TrainLogRow>& rows, int width, int height) {
    if (width < 120 || height < 100) throw ValidationError("plot: canvas too small");
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
        if (r.val_dice) pts.emplace_back(static_cast<double>(r.t + 1), *r.val_dice);
    }
    if (pts.empty()) throw ValidationError("plot: the training log has no val_dice entries");

    const int left = 56, right = width - 20, top = 20, bottom = height - 40;
    const double t_max = std::max(1.0, std::max_element(rows.begin(), rows.end(), [](auto& a, auto& b) {
                                           return a.t < b.t;
                                       })->t + 1.0);
    auto px = [&](double t) { return left + static_cast<int>(std::lround((right - left) * t / t_max)); };
    auto py = [&](double d) {
        return bottom - static_cast<int>(std::lround((bottom - top) * std::clamp(d, 0.0, 1.0)));
    };

    Canvas c(width, height);
    for (int k = 0; k <= 10; ++k) {
        const int y = py(k / 10.0);
        c.hline(left, right, y, kGrid);
        if (k % 2 == 0) {
            const std::string lab = fmt("%.1f", k / 10.0);
            c.hline(left - 5, left, y, kBlack);
            c.text(left - 10 - Canvas::text_width(lab), y - 5, lab, kBlack);
        }
    }
    for (int k = 0; k <= 4; ++k) {
        const double t = t_max * k / 4.0;
        const int x = px(t);
        c.vline(x, bottom, bottom + 5, kBlack);
        const std::string lab = fmt("%.0f", t);
        c.text(x - Canvas::text_width(lab) / 2, bottom + 10, lab, kBlack);
    }
    c.hline(left, right, bottom, kBlack);
    c.vline(left, top, bottom, kBlack);

    for (std::size_t i = 1; i < pts.size(); ++i) {
        c.line(px(pts[i - 1].first), py(pts[i - 1].second), px(pts[i].first), py(pts[i].second), kLine);
    }
    for (const auto& [t, d] : pts) c.dot(px(t), py(d), kLine);
    return c.take();
}

void write_png(const Image& img, const std::filesystem::path& path) {
    if (img.width <= 0 || img.height <= 0 ||
        img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw ValidationError("write_png: malformed image");
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace dsseg
