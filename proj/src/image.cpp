#include <algorithm>
#include <array>
#include <stdexcept>

#include <zlib.h>

#include "ttt/eval.hpp"

namespace ttt {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, kNumColors> kPalette{{
    {0x00, 0x00, 0x00}, {0x00, 0x74, 0xD9}, {0xFF, 0x41, 0x36}, {0x2E, 0xCC, 0x40}, {0xFF, 0xDC, 0x00},
    {0xAA, 0xAA, 0xAA}, {0xF0, 0x12, 0xBE}, {0xFF, 0x85, 0x1B}, {0x7F, 0xDB, 0xFF}, {0x87, 0x0C, 0x25},
}};
constexpr std::array<std::uint8_t, 3> kLine{0x55, 0x55, 0x55};
constexpr std::array<std::uint8_t, 3> kBackground{0xFF, 0xFF, 0xFF};
constexpr std::size_t kGap = 8;

Image blank(std::size_t w, std::size_t h) {
  Image img{w, h, {}};
  img.rgb.resize(w * h * 3);
  for (std::size_t i = 0; i < w * h; ++i) std::copy(kBackground.begin(), kBackground.end(), img.rgb.begin() + i * 3);
  return img;
}

void blit(Image& dst, const Image& src, std::size_t x0, std::size_t y0) {
  for (std::size_t y = 0; y < src.height; ++y) {
    auto from = src.rgb.begin() + static_cast<std::ptrdiff_t>(y * src.width * 3);
    std::copy(from, from + static_cast<std::ptrdiff_t>(src.width * 3),
              dst.rgb.begin() + static_cast<std::ptrdiff_t>(((y0 + y) * dst.width + x0) * 3));
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Image render_grid_image(const Grid& g, std::size_t cell) {
  if (cell == 0) throw std::invalid_argument("cell size must be positive");
  const std::size_t w = g.cols() * cell + g.cols() + 1;
  const std::size_t h = g.rows() * cell + g.rows() + 1;
  Image img{w, h, {}};
  img.rgb.resize(w * h * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const bool line = x % (cell + 1) == 0 || y % (cell + 1) == 0;
      const auto& px = line ? kLine : kPalette[g.at(y / (cell + 1), x / (cell + 1))];
      std::copy(px.begin(), px.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>((y * w + x) * 3));
    }
  }
  return img;
}

Image render_task_image(const Task& task, std::span<const std::vector<Grid>> attempts, std::size_t cell) {
  std::vector<std::vector<Image>> rows;
  for (const auto& ex : task.train) rows.push_back({render_grid_image(ex.input, cell), render_grid_image(ex.output, cell)});
  for (std::size_t m = 0; m < task.test.size(); ++m) {
    std::vector<Image> row{render_grid_image(task.test[m].input, cell)};
    if (task.test[m].output) row.push_back(render_grid_image(*task.test[m].output, cell));
    if (m < attempts.size())
      for (const auto& a : attempts[m]) row.push_back(render_grid_image(a, cell));
    rows.push_back(std::move(row));
  }
  std::size_t width = 0, height = kGap;
  for (const auto& row : rows) {
    std::size_t w = kGap, h = 0;
    for (const auto& im : row) {
      w += im.width + kGap;
      h = std::max(h, im.height);
    }
    width = std::max(width, w);
    height += h + kGap;
  }
  Image out = blank(std::max<std::size_t>(width, 1), height);
  std::size_t y = kGap;
  for (const auto& row : rows) {
    std::size_t x = kGap, h = 0;
    for (const auto& im : row) {
      blit(out, im, x, y);
      x += im.width + kGap;
      h = std::max(h, im.height);
    }
    y += h + kGap;
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> raw;
  raw.reserve(img.height * (img.width * 3 + 1));
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(y * img.width * 3),
               img.rgb.begin() + static_cast<std::ptrdiff_t>((y + 1) * img.width * 3));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  z.resize(zlen);

  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit RGB
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

}  // namespace ttt
