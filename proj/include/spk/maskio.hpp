#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"

// Raster formats, all bit-exact:
//   masks / instance maps  binary PGM "P5", maxval 65535, big-endian samples
//   RGB images             binary PPM "P6", maxval 255
//   score maps             magic "SPKSCR1\n", three little-endian u32 (H, W, C),
//                          then H*W*C little-endian IEEE-754 f32, row-major,
//                          channel fastest

namespace spk {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};
using RgbImage = Grid<Rgb>;

namespace detail {

// Cursor over an input buffer that reports byte offsets on failure.
class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t next() {
    if (pos_ >= bytes_.size()) throw FormatError("unexpected end of data", pos_);
    return bytes_[pos_++];
  }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated payload: ") + what + ", " +
                            std::to_string(n - remaining()) + " byte(s) missing",
                        bytes_.size());
    }
  }

  void pnm_payload_separator() {
    std::size_t at = pos_;
    std::uint8_t c = next();
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') {
      throw FormatError("expected single whitespace before payload", at);
    }
  }

  const std::uint8_t* take(std::size_t n, const char* what) {
    require(n, what);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  void expect_consumed() const {
    if (pos_ != bytes_.size()) {
      throw FormatError("trailing bytes after declared payload", pos_);
    }
  }

  // Skips PNM whitespace and '#' comments.
  void skip_pnm_space() {
    while (pos_ < bytes_.size()) {
      std::uint8_t c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint64_t pnm_integer(const char* what) {
    skip_pnm_space();
    std::size_t start = pos_;
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 0xFFFFFFFFull) {
        throw FormatError(std::string(what) + " out of range", start);
      }
      ++pos_;
    }
    if (pos_ == start) {
      throw FormatError(std::string("expected ") + what, pos_);
    }
    return value;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t read_le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline void append_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 24));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PGM16 masks

inline std::vector<std::uint8_t> write_mask(const Grid<std::uint32_t>& mask) {
  if (mask.empty()) throw ValidationError("cannot write an empty mask");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 0xFFFF) {
      throw ValidationError("mask value " + std::to_string(mask[i]) +
                            " at flat index " + std::to_string(i) +
                            " exceeds 16-bit sample range");
    }
  }
  std::string header = "P5\n" + std::to_string(mask.width()) + " " +
                       std::to_string(mask.height()) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + mask.size() * 2);
  for (std::uint32_t v : mask.data()) {
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v & 0xFF));
  }
  return out;
}

inline Grid<std::uint32_t> read_mask(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes);
  std::size_t magic_at = in.offset();
  if (in.remaining() < 2 || in.next() != 'P' || in.next() != '5') {
    throw FormatError("bad magic, expected P5", magic_at);
  }
  std::uint64_t width = in.pnm_integer("width");
  std::uint64_t height = in.pnm_integer("height");
  in.skip_pnm_space();
  std::size_t maxval_at = in.offset();
  std::uint64_t maxval = in.pnm_integer("maxval");
  if (maxval != 65535) {
    throw FormatError("maxval must be 65535, got " + std::to_string(maxval),
                      maxval_at);
  }
  if (width == 0 || height == 0) {
    throw FormatError("zero image dimension", maxval_at);
  }
  in.pnm_payload_separator();
  Grid<std::uint32_t> mask(height, width);
  const std::uint8_t* p = in.take(mask.size() * 2, "pixel samples");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = std::uint32_t(p[2 * i]) << 8 | p[2 * i + 1];
  }
  in.expect_consumed();
  return mask;
}

// ---------------------------------------------------------------------------
// PPM images

inline std::vector<std::uint8_t> write_image(const RgbImage& image) {
  if (image.empty()) throw ValidationError("cannot write an empty image");
  std::string header = "P6\n" + std::to_string(image.width()) + " " +
                       std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size() * 3);
  for (const Rgb& px : image.data()) {
    out.push_back(px.r);
    out.push_back(px.g);
    out.push_back(px.b);
  }
  return out;
}

inline RgbImage read_image(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes);
  std::size_t magic_at = in.offset();
  if (in.remaining() < 2 || in.next() != 'P' || in.next() != '6') {
    throw FormatError("bad magic, expected P6", magic_at);
  }
  std::uint64_t width = in.pnm_integer("width");
  std::uint64_t height = in.pnm_integer("height");
  in.skip_pnm_space();
  std::size_t maxval_at = in.offset();
  std::uint64_t maxval = in.pnm_integer("maxval");
  if (maxval != 255) {
    throw FormatError("maxval must be 255, got " + std::to_string(maxval),
                      maxval_at);
  }
  if (width == 0 || height == 0) {
    throw FormatError("zero image dimension", maxval_at);
  }
  in.pnm_payload_separator();
  RgbImage image(height, width);
  const std::uint8_t* p = in.take(image.size() * 3, "pixel samples");
  for (std::size_t i = 0; i < image.size(); ++i) {
    image[i] = Rgb{p[3 * i], p[3 * i + 1], p[3 * i + 2]};
  }
  in.expect_consumed();
  return image;
}

// ---------------------------------------------------------------------------
// Score maps

inline constexpr char kScoreMapMagic[8] = {'S', 'P', 'K', 'S', 'C', 'R', '1', '\n'};

inline std::vector<std::uint8_t> write_scoremap(const ScoreMap& scores) {
  if (scores.empty()) throw ValidationError("cannot write an empty score map");
  std::vector<std::uint8_t> out(kScoreMapMagic, kScoreMapMagic + 8);
  detail::append_le32(out, std::uint32_t(scores.height()));
  detail::append_le32(out, std::uint32_t(scores.width()));
  detail::append_le32(out, std::uint32_t(scores.channels()));
  const auto& values = scores.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("non-finite score at flat index " + std::to_string(i));
    }
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    detail::append_le32(out, bits);
  }
  return out;
}

inline ScoreMap read_scoremap(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes);
  const std::uint8_t* magic = in.take(8, "magic");
  if (std::memcmp(magic, kScoreMapMagic, 8) != 0) {
    throw FormatError("bad magic, expected SPKSCR1", 0);
  }
  std::uint32_t height = detail::read_le32(in.take(4, "height"));
  std::uint32_t width = detail::read_le32(in.take(4, "width"));
  std::uint32_t channels = detail::read_le32(in.take(4, "channels"));
  if (height == 0 || width == 0 || channels == 0) {
    throw FormatError("zero map dimension", 8);
  }
  ScoreMap scores(height, width, channels);
  std::size_t payload_at = in.offset();
  const std::uint8_t* p = in.take(scores.size() * 4, "score samples");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    float v = std::bit_cast<float>(detail::read_le32(p + 4 * i));
    if (!std::isfinite(v)) {
      throw FormatError("non-finite score at flat index " + std::to_string(i),
                        payload_at + 4 * i);
    }
    scores.data()[i] = v;
  }
  in.expect_consumed();
  revalidate_normalization(scores);
  return scores;
}

// ---------------------------------------------------------------------------
// Files

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline LabelMask read_mask_file(const std::filesystem::path& path) {
  return read_mask(read_file(path));
}

inline void write_mask_file(const std::filesystem::path& path,
                            const Grid<std::uint32_t>& mask) {
  write_file(path, write_mask(mask));
}

inline ScoreMap read_scoremap_file(const std::filesystem::path& path) {
  return read_scoremap(read_file(path));
}

inline void write_scoremap_file(const std::filesystem::path& path,
                                const ScoreMap& scores) {
  write_file(path, write_scoremap(scores));
}

}  // namespace spk
