#pragma once

// Grayscale canvas and the two rasterizers the simulators use.
//
// Continuous coordinates live on the unit square with x to the right and y
// upward. Pixel (row, col) has row 0 at the top. A unit coordinate u maps to
// pixel index min(n-1, floor(u*n)), so u = 1 lands on the last pixel.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace simvae {

struct Canvas {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // row-major, values in [0,1]

  Canvas() = default;
  Canvas(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0.0) {}
  static Canvas from(std::span<const double> values, std::size_t h, std::size_t w);

  double& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  /// Writes max(current, value), so later strokes never darken earlier ones.
  void stamp(std::size_t row, std::size_t col, double value);

  friend bool operator==(const Canvas&, const Canvas&) = default;
};

struct PixelPoint {
  long col;
  long row;
};

long unit_to_col(double x, std::size_t width);
long unit_to_row(double y, std::size_t height);
PixelPoint unit_to_pixel(double x, double y, const Canvas& canvas);

/// Bresenham line between pixel centres, both endpoints included.
/// Pixels outside the canvas are skipped.
void draw_line(Canvas& canvas, PixelPoint a, PixelPoint b, double intensity);

struct UnitPoint {
  double x;
  double y;
};

/// Even-odd scanline fill of the closed polygon through `points` in order,
/// sampled at pixel centres. Self-intersections are allowed.
void fill_polygon_even_odd(Canvas& canvas, std::span<const UnitPoint> points, double intensity);

/// Binary PGM (P5, maxval 255); value = round(255 * intensity).
void write_pgm(std::ostream& out, const Canvas& canvas);
void write_pgm(const std::string& path, const Canvas& canvas);
/// Reads P5 or P2 with any maxval up to 65535, rescaled to [0,1].
Canvas read_pgm(std::istream& in);
Canvas read_pgm(const std::string& path);

}  // namespace simvae
