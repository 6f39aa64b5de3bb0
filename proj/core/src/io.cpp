#include "warpmetrics/io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace warpmetrics {

namespace {

constexpr char kGridMagic[8] = {'A', 'A', 'G', 'R', 'I', 'D', '1', '\0'};
constexpr char kFlowMagic[8] = {'A', 'A', 'F', 'L', 'O', 'W', '1', '\0'};

void put_u32le(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32le(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(os, bits);
}

float get_f32le(std::istream& is) {
  const uint32_t bits = get_u32le(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

Grid2D StoredGrid::to_pixels(int image_h, int image_w) const {
  if (dim != 2) throw IoError("StoredGrid: expected dim 2");
  if (image_h < 2 || image_w < 2)
    throw DimensionError("StoredGrid: image must be at least 2x2");
  Grid2D g(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const size_t i = (static_cast<size_t>(r) * w + c) * 2;
      g.at(r, c) = {values[i] * (image_w - 1), values[i + 1] * (image_h - 1)};
    }
  return g;
}

Grid3D StoredGrid::to_grid3d() const {
  if (dim != 3) throw IoError("StoredGrid: expected dim 3");
  Grid3D g(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const size_t i = (static_cast<size_t>(r) * w + c) * 3;
      g.at(r, c) = {values[i], values[i + 1], values[i + 2]};
    }
  return g;
}

StoredGrid StoredGrid::from_pixels(const Grid2D& grid, int image_h,
                                   int image_w) {
  if (image_h < 2 || image_w < 2)
    throw DimensionError("StoredGrid: image must be at least 2x2");
  StoredGrid s;
  s.h = grid.rows();
  s.w = grid.cols();
  s.dim = 2;
  s.values.reserve(static_cast<size_t>(s.h) * s.w * 2);
  for (int r = 0; r < s.h; ++r)
    for (int c = 0; c < s.w; ++c) {
      s.values.push_back(grid.at(r, c).x / (image_w - 1));
      s.values.push_back(grid.at(r, c).y / (image_h - 1));
    }
  return s;
}

StoredGrid StoredGrid::from_grid3d(const Grid3D& grid) {
  StoredGrid s;
  s.h = grid.rows();
  s.w = grid.cols();
  s.dim = 3;
  s.values.reserve(static_cast<size_t>(s.h) * s.w * 3);
  for (int r = 0; r < s.h; ++r)
    for (int c = 0; c < s.w; ++c) {
      const Vec3& p = grid.at(r, c);
      s.values.push_back(p.x);
      s.values.push_back(p.y);
      s.values.push_back(p.z);
    }
  return s;
}

void write_grid_file(const std::filesystem::path& path, const StoredGrid& g) {
  if (g.dim != 2 && g.dim != 3) throw IoError("grid dim must be 2 or 3");
  if (g.values.size() != static_cast<size_t>(g.h) * g.w * g.dim)
    throw IoError("grid value count does not match dimensions");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kGridMagic, 8);
  put_u32le(os, static_cast<uint32_t>(g.h));
  put_u32le(os, static_cast<uint32_t>(g.w));
  os.put(static_cast<char>(g.dim));
  for (double v : g.values) put_f32le(os, static_cast<float>(v));
  if (!os) throw IoError("write failed: " + path.string());
}

void write_grid_json(const std::filesystem::path& path, const StoredGrid& g) {
  nlohmann::ordered_json j;
  j["h"] = g.h;
  j["w"] = g.w;
  j["dim"] = g.dim;
  j["points"] = g.values;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << j.dump() << "\n";
}

StoredGrid read_grid_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[8] = {};
  is.read(magic, 8);
  StoredGrid g;
  if (is && std::memcmp(magic, kGridMagic, 8) == 0) {
    g.h = static_cast<int>(get_u32le(is));
    g.w = static_cast<int>(get_u32le(is));
    g.dim = is.get();
    if (!is || g.h < 2 || g.w < 2 || (g.dim != 2 && g.dim != 3))
      throw IoError("garbled grid header: " + path.string());
    const size_t n = static_cast<size_t>(g.h) * g.w * g.dim;
    g.values.resize(n);
    for (size_t i = 0; i < n; ++i) g.values[i] = get_f32le(is);
    if (!is) throw IoError("truncated grid file: " + path.string());
    return g;
  }
  // Fall back to the JSON mirror.
  is.clear();
  is.seekg(0);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("not an AAGRID1 or JSON grid file: " + path.string() + " (" +
                  e.what() + ")");
  }
  try {
    g.h = j.at("h").get<int>();
    g.w = j.at("w").get<int>();
    g.dim = j.at("dim").get<int>();
    g.values = j.at("points").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON grid: " + path.string() + " (" + e.what() +
                  ")");
  }
  if (g.h < 2 || g.w < 2 || (g.dim != 2 && g.dim != 3) ||
      g.values.size() != static_cast<size_t>(g.h) * g.w * g.dim)
    throw IoError("malformed JSON grid: " + path.string());
  return g;
}

void write_flow_file(const std::filesystem::path& path, const FlowField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kFlowMagic, 8);
  put_u32le(os, static_cast<uint32_t>(f.height));
  put_u32le(os, static_cast<uint32_t>(f.width));
  for (size_t i = 0; i < f.size(); ++i) {
    put_f32le(os, f.vx[i]);
    put_f32le(os, f.vy[i]);
    os.put(static_cast<char>(f.valid[i] ? 1 : 0));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

FlowField read_flow_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[8] = {};
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFlowMagic, 8) != 0)
    throw IoError("not an AAFLOW1 file: " + path.string());
  const int h = static_cast<int>(get_u32le(is));
  const int w = static_cast<int>(get_u32le(is));
  if (!is || h <= 0 || w <= 0)
    throw IoError("garbled flow header: " + path.string());
  FlowField f(h, w);
  for (size_t i = 0; i < f.size(); ++i) {
    f.vx[i] = get_f32le(is);
    f.vy[i] = get_f32le(is);
    f.valid[i] = static_cast<uint8_t>(is.get() ? 1 : 0);
  }
  if (!is) throw IoError("truncated flow file: " + path.string());
  return f;
}

// ---- PNG -------------------------------------------------------------------

namespace {
struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};
struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};
}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
  PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw IoError("cannot open: " + path.string());
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                   nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png)))
    throw IoError("failed to decode PNG: " + path.string());
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  png_set_strip_16(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_set_palette_to_rgb(ctx.png);
  png_set_expand_gray_1_2_4_to_8(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int nch = png_get_channels(ctx.png, ctx.info);
  if (nch != 1 && nch != 3)
    throw IoError("unsupported PNG channel count: " + path.string());

  std::vector<unsigned char> row(static_cast<size_t>(w) * nch);
  ImageBuffer img(h, w, nch);
  for (int y = 0; y < h; ++y) {
    png_read_row(ctx.png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nch; ++c)
        img.at(y, x, c) = row[static_cast<size_t>(x) * nch + c] / 255.0f;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
  if (image.empty()) throw InvalidInputError("write_png: empty image");
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw IoError("cannot open for writing: " + path.string());
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                    nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png)))
    throw IoError("failed to encode PNG: " + path.string());
  png_init_io(ctx.png, ctx.fp);
  const int color =
      image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(ctx.png, ctx.info, image.width(), image.height(), 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<unsigned char> row(static_cast<size_t>(image.width()) *
                                 image.channels());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        row[static_cast<size_t>(x) * image.channels() + c] =
            static_cast<unsigned char>(
                std::lround(std::clamp(image.at(y, x, c), 0.0f, 1.0f) * 255.0f));
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

}  // namespace warpmetrics
