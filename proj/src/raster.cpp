#include "simvae/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>

#include "simvae/errors.hpp"

namespace simvae {

Canvas Canvas::from(std::span<const double> values, std::size_t h, std::size_t w) {
  if (values.size() != h * w)
    throw ShapeError("canvas: " + std::to_string(values.size()) + " values for " +
                     std::to_string(h) + "x" + std::to_string(w));
  Canvas c(h, w);
  std::copy(values.begin(), values.end(), c.pixels.begin());
  return c;
}

void Canvas::stamp(std::size_t row, std::size_t col, double value) {
  double& p = at(row, col);
  p = std::max(p, value);
}

long unit_to_col(double x, std::size_t width) {
  const long n = static_cast<long>(width);
  return std::clamp(static_cast<long>(std::floor(x * static_cast<double>(width))), 0L, n - 1);
}

long unit_to_row(double y, std::size_t height) {
  const long n = static_cast<long>(height);
  const long from_bottom =
      std::clamp(static_cast<long>(std::floor(y * static_cast<double>(height))), 0L, n - 1);
  return n - 1 - from_bottom;
}

PixelPoint unit_to_pixel(double x, double y, const Canvas& canvas) {
  return {unit_to_col(x, canvas.width), unit_to_row(y, canvas.height)};
}

void draw_line(Canvas& canvas, PixelPoint a, PixelPoint b, double intensity) {
  const long dx = std::labs(b.col - a.col);
  const long dy = -std::labs(b.row - a.row);
  const long sx = a.col < b.col ? 1 : -1;
  const long sy = a.row < b.row ? 1 : -1;
  long err = dx + dy;
  long x = a.col, y = a.row;
  const long w = static_cast<long>(canvas.width), h = static_cast<long>(canvas.height);
  for (;;) {
    if (x >= 0 && x < w && y >= 0 && y < h)
      canvas.stamp(static_cast<std::size_t>(y), static_cast<std::size_t>(x), intensity);
    if (x == b.col && y == b.row) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

void fill_polygon_even_odd(Canvas& canvas, std::span<const UnitPoint> points, double intensity) {
  struct Edge {
    UnitPoint lo, hi;  // lo.y <= hi.y, ties broken on x
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < points.size(); ++i) {
    UnitPoint a = points[i];
    UnitPoint b = points[(i + 1) % points.size()];
    if (b.y < a.y || (b.y == a.y && b.x < a.x)) std::swap(a, b);
    edges.push_back({a, b});
  }
  // Orientation-free edges make the result independent of the starting
  // point and direction of traversal.
  std::sort(edges.begin(), edges.end(), [](const Edge& e, const Edge& f) {
    return std::tie(e.lo.y, e.lo.x, e.hi.y, e.hi.x) < std::tie(f.lo.y, f.lo.x, f.hi.y, f.hi.x);
  });

  std::vector<double> xs;
  for (std::size_t r = 0; r < canvas.height; ++r) {
    const double y = 1.0 - (static_cast<double>(r) + 0.5) / static_cast<double>(canvas.height);
    xs.clear();
    for (const Edge& e : edges) {
      if (e.lo.y <= y && y < e.hi.y)
        xs.push_back(e.lo.x + (y - e.lo.y) * (e.hi.x - e.lo.x) / (e.hi.y - e.lo.y));
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    for (std::size_t c = 0; c < canvas.width; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(canvas.width);
      const auto right = xs.end() - std::upper_bound(xs.begin(), xs.end(), x);
      if (right % 2 == 1) canvas.stamp(r, c, intensity);
    }
  }
}

void write_pgm(std::ostream& out, const Canvas& canvas) {
  out << "P5\n" << canvas.width << " " << canvas.height << "\n255\n";
  std::string bytes(canvas.pixels.size(), '\0');
  for (std::size_t i = 0; i < canvas.pixels.size(); ++i) {
    const double v = std::clamp(canvas.pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_pgm(const std::string& path, const Canvas& canvas) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_pgm(out, canvas);
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  if (tok.empty()) throw FormatError("pgm: truncated header");
  return tok;
}

std::size_t header_number(std::istream& in, const char* what) {
  const std::string tok = header_token(in);
  char* end = nullptr;
  const unsigned long v = std::strtoul(tok.c_str(), &end, 10);
  if (*end != '\0' || v == 0) throw FormatError(std::string("pgm: bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace

Canvas read_pgm(std::istream& in) {
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (!in || (magic != "P5" && magic != "P2")) throw FormatError("pgm: not a P5/P2 graymap");
  const std::size_t width = header_number(in, "width");
  const std::size_t height = header_number(in, "height");
  const std::size_t maxval = header_number(in, "maxval");
  if (maxval > 65535) throw FormatError("pgm: maxval above 65535");
  Canvas canvas(height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P5") {
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    std::string raw(width * height * bpp, '\0');
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError("pgm: truncated pixel data");
    for (std::size_t i = 0; i < width * height; ++i) {
      std::size_t v = static_cast<unsigned char>(raw[i * bpp]);
      if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(raw[i * bpp + 1]);
      if (v > maxval) throw FormatError("pgm: pixel above maxval");
      canvas.pixels[i] = static_cast<double>(v) * scale;
    }
  } else {
    for (auto& p : canvas.pixels) {
      std::size_t v;
      if (!(in >> v)) throw FormatError("pgm: truncated pixel data");
      if (v > maxval) throw FormatError("pgm: pixel above maxval");
      p = static_cast<double>(v) * scale;
    }
  }
  return canvas;
}

Canvas read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_pgm(in);
}

}  // namespace simvae
