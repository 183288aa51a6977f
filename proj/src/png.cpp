#include <zlib.h>

#include <array>
#include <stdexcept>

#include "layoutrev/render.hpp"

namespace layoutrev {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

void put_chunk(std::string& out, const char (&type)[5], std::string_view data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t crc_start = out.size();
  out.append(type, 4);
  out.append(data);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + crc_start),
              static_cast<uInt>(out.size() - crc_start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::string encode_png(const Bitmap& bm) {
  if (bm.width < 1 || bm.height < 1 ||
      bm.pixels.size() != static_cast<std::size_t>(bm.width) * bm.height * 4) {
    throw std::invalid_argument("encode_png: malformed bitmap");
  }

  // Filter type 0 on every scanline keeps the byte stream a pure function of
  // the pixels.
  const std::size_t stride = static_cast<std::size_t>(bm.width) * 4;
  std::string raw;
  raw.reserve((stride + 1) * bm.height);
  for (int y = 0; y < bm.height; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(bm.pixels.data()) + y * stride, stride);
  }

  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  int rc = compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                     reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                     9);
  if (rc != Z_OK) throw std::runtime_error("encode_png: zlib error " + std::to_string(rc));
  packed.resize(packed_size);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(bm.width));
  put_u32(ihdr, static_cast<std::uint32_t>(bm.height));
  ihdr += std::string("\x08\x06\x00\x00\x00", 5);  // 8-bit RGBA, deflate, no filter, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

}  // namespace layoutrev
