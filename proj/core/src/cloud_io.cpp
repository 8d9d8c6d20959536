// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "survscan/error.hpp"

namespace survscan {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'P', 'C'};
constexpr std::uint16_t kFormatVersion = 1;
constexpr std::uint16_t kMaskIntensity = 1u << 0;
constexpr std::uint16_t kMaskColors = 1u << 1;
constexpr std::uint16_t kMaskClasses = 1u << 2;
constexpr std::size_t kHeaderSize = 56;
constexpr std::size_t kFrameTagBytes = 32;

CloudFormat resolve_format(const std::filesystem::path& path,
                           CloudFormat format) {
  if (format != CloudFormat::kAuto) return format;
  return path.extension() == ".sspc" ? CloudFormat::kSspcBinary
                                     : CloudFormat::kXyzAscii;
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line,
                          const std::string& what) {
  std::ostringstream os;
  os << path.string() << ":" << line << ": " << what;
  throw Error(os.str());
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error("failed while reading " + path.string());
  return std::move(buf).str();
}

bool parse_double(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_u8(std::string_view token, std::uint8_t& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || value > 255) return false;
  out = static_cast<std::uint8_t>(value);
  return true;
}

// --- ASCII xyz ---------------------------------------------------------

PointCloud read_xyz(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  PointCloud cloud;
  cloud.source = path.string();

  std::size_t line_no = 0;
  int ncols = 0;  // fixed by the first data line
  bool want_intensity = false, want_colors = false;
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::size_t stop = (eol == std::string::npos) ? text.size() : eol;
    std::string_view line(text.data() + pos, stop - pos);
    pos = stop + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    tokens.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size() || line[i] == '#') break;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty()) continue;

    const int got = static_cast<int>(tokens.size());
    if (ncols == 0) {
      if (got != 3 && got != 4 && got != 6 && got != 7) {
        std::ostringstream os;
        os << "expected 3, 4, 6 or 7 columns, got " << got;
        fail_at(path, line_no, os.str());
      }
      ncols = got;
      want_intensity = (ncols == 4 || ncols == 7);
      want_colors = (ncols == 6 || ncols == 7);
    } else if (got != ncols) {
      std::ostringstream os;
      os << "expected " << ncols << " columns as on the first data line, got "
         << got;
      fail_at(path, line_no, os.str());
    }

    Vec3 p;
    for (int c = 0; c < 3; ++c) {
      if (!parse_double(tokens[c], p[c]) || !std::isfinite(p[c]))
        fail_at(path, line_no,
                "invalid coordinate \"" + std::string(tokens[c]) + "\"");
    }
    int next = 3;
    double intensity = 0.0;
    if (want_intensity) {
      if (!parse_double(tokens[next], intensity) ||
          !std::isfinite(intensity) || intensity < 0.0 || intensity > 1.0)
        fail_at(path, line_no,
                "intensity \"" + std::string(tokens[next]) +
                    "\" is not in [0, 1]");
      ++next;
    }
    Rgb8 rgb;
    if (want_colors) {
      std::uint8_t* channel[3] = {&rgb.r, &rgb.g, &rgb.b};
      for (int c = 0; c < 3; ++c, ++next) {
        if (!parse_u8(tokens[next], *channel[c]))
          fail_at(path, line_no,
                  "color component \"" + std::string(tokens[next]) +
                      "\" is not an integer in [0, 255]");
      }
    }

    cloud.positions.push_back(p);
    if (want_intensity)
      cloud.intensities.push_back(static_cast<float>(intensity));
    if (want_colors) cloud.colors.push_back(rgb);
  }
  return cloud;
}

void write_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const bool with_intensity = cloud.has_intensity();
  const bool with_colors = cloud.has_color();
  char buf[192];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    int len = std::snprintf(buf, sizeof buf, "%.9f %.9f %.9f", p.x(), p.y(),
                            p.z());
    if (with_intensity)
      len += std::snprintf(buf + len, sizeof buf - len, " %.9g",
                           static_cast<double>(cloud.intensities[i]));
    if (with_colors) {
      const Rgb8& c = cloud.colors[i];
      len += std::snprintf(buf + len, sizeof buf - len, " %u %u %u",
                           unsigned(c.r), unsigned(c.g), unsigned(c.b));
    }
    buf[len++] = '\n';
    out.write(buf, len);
  }
  if (!out.good()) throw Error("failed while writing " + path.string());
}

// --- Binary sspc -------------------------------------------------------

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(std::uint16_t(p[0]) |
                                    (std::uint16_t(p[1]) << 8));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

double get_f64(const unsigned char* p) {
  return std::bit_cast<double>(get_u64(p));
}

float get_f32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return std::bit_cast<float>(v);
}

PointCloud read_sspc(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderSize)
    throw Error(path.string() + ": file shorter than the 56-byte header");
  if (std::memcmp(data, kMagic, 4) != 0)
    throw Error(path.string() + ": not an sspc file (bad magic)");
  const std::uint16_t version = get_u16(data + 4);
  if (version != kFormatVersion) {
    std::ostringstream os;
    os << path.string() << ": unsupported sspc version " << version;
    throw Error(os.str());
  }
  const std::uint16_t mask = get_u16(data + 6);
  if (mask & ~(kMaskIntensity | kMaskColors | kMaskClasses)) {
    std::ostringstream os;
    os << path.string() << ": unknown field mask bits 0x" << std::hex << mask;
    throw Error(os.str());
  }
  const std::uint64_t count = get_u64(data + 8);
  const char* tag_bytes = bytes.data() + 16;
  const std::size_t tag_len = static_cast<std::size_t>(
      std::find(tag_bytes, tag_bytes + kFrameTagBytes, '\0') - tag_bytes);
  const std::int64_t epoch =
      std::bit_cast<std::int64_t>(get_u64(data + 16 + kFrameTagBytes));

  const bool want_intensity = (mask & kMaskIntensity) != 0;
  const bool want_colors = (mask & kMaskColors) != 0;
  const bool want_classes = (mask & kMaskClasses) != 0;

  PointCloud cloud;
  cloud.source = path.string();
  cloud.frame = FrameTag::parse(std::string(tag_bytes, tag_len));
  if (epoch != -1) cloud.epoch = epoch;

  const std::size_t record = 24 + (want_intensity ? 4 : 0) +
                             (want_colors ? 3 : 0) + (want_classes ? 1 : 0);
  if (bytes.size() != kHeaderSize + count * record) {
    std::ostringstream os;
    os << path.string() << ": expected " << kHeaderSize + count * record
       << " bytes for " << count << " points, file has " << bytes.size();
    throw Error(os.str());
  }

  cloud.positions.resize(count);
  if (want_intensity) cloud.intensities.resize(count);
  if (want_colors) cloud.colors.resize(count);
  if (want_classes) cloud.classes.resize(count);

  const unsigned char* p = data + kHeaderSize;
  for (std::uint64_t i = 0; i < count; ++i) {
    Vec3& pos = cloud.positions[i];
    pos = Vec3(get_f64(p), get_f64(p + 8), get_f64(p + 16));
    p += 24;
    if (!pos.allFinite()) {
      std::ostringstream os;
      os << path.string() << ": point " << i << " has a non-finite coordinate";
      throw Error(os.str());
    }
    if (want_intensity) {
      const float v = get_f32(p);
      p += 4;
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        std::ostringstream os;
        os << path.string() << ": point " << i << " intensity " << v
           << " is not in [0, 1]";
        throw Error(os.str());
      }
      cloud.intensities[i] = v;
    }
    if (want_colors) {
      cloud.colors[i] = Rgb8{p[0], p[1], p[2]};
      p += 3;
    }
    if (want_classes) {
      if (!is_valid_class(*p)) {
        std::ostringstream os;
        os << path.string() << ": point " << i << " has unknown class code "
           << unsigned(*p);
        throw Error(os.str());
      }
      cloud.classes[i] = *p;
      ++p;
    }
  }
  return cloud;
}

void write_sspc(const PointCloud& cloud, const std::filesystem::path& path) {
  const std::string tag = cloud.frame.str();
  if (tag.size() >= kFrameTagBytes) {
    std::ostringstream os;
    os << "frame tag \"" << tag << "\" does not fit the 32-byte header field "
       << "(31 characters max)";
    throw Error(os.str());
  }

  std::uint16_t mask = 0;
  if (cloud.has_intensity()) mask |= kMaskIntensity;
  if (cloud.has_color()) mask |= kMaskColors;
  if (cloud.has_class()) mask |= kMaskClasses;

  const std::size_t record = 24 + (cloud.has_intensity() ? 4 : 0) +
                             (cloud.has_color() ? 3 : 0) +
                             (cloud.has_class() ? 1 : 0);
  std::string out;
  out.reserve(kHeaderSize + cloud.size() * record);
  out.append(kMagic, 4);
  put_u16(out, kFormatVersion);
  put_u16(out, mask);
  put_u64(out, cloud.size());
  out.append(tag);
  out.append(kFrameTagBytes - tag.size(), '\0');
  put_u64(out, std::bit_cast<std::uint64_t>(cloud.epoch.value_or(-1)));

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    put_f64(out, p.x());
    put_f64(out, p.y());
    put_f64(out, p.z());
    if (cloud.has_intensity()) put_f32(out, cloud.intensities[i]);
    if (cloud.has_color()) {
      const Rgb8& c = cloud.colors[i];
      out.push_back(char(c.r));
      out.push_back(char(c.g));
      out.push_back(char(c.b));
    }
    if (cloud.has_class()) out.push_back(char(cloud.classes[i]));
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file.good()) throw Error("failed while writing " + path.string());
}

}  // namespace

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format) {
  PointCloud cloud = resolve_format(path, format) == CloudFormat::kSspcBinary
                         ? read_sspc(path)
                         : read_xyz(path);
  cloud.validate();
  return cloud;
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 CloudFormat format) {
  cloud.validate();
  if (resolve_format(path, format) == CloudFormat::kSspcBinary)
    write_sspc(cloud, path);
  else
    write_xyz(cloud, path);
}

}  // namespace survscan
