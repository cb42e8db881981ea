#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "error.hpp"
#include "types.hpp"

namespace gpground {

enum class OutputFormat { Csv, Ply };

namespace io_detail {

inline std::vector<char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::streamoff>(in.tellg());
  if (size < 0) throw Error(ErrorKind::Io, "cannot size '" + path + "'");
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(bytes.data(), size))
    throw Error(ErrorKind::Io, "read failed on '" + path + "'");
  return bytes;
}

inline float load_le_float(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i)
    bits = (bits << 8) | static_cast<std::uint8_t>(p[i]);
  return std::bit_cast<float>(bits);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

/// Shortest round-trip decimal form; output is byte-stable for equal inputs.
inline void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed on '" + path + "'");
}

}  // namespace io_detail

/// Decodes a KITTI velodyne scan: little-endian float32 (x, y, z, intensity)
/// records. Non-finite records are dropped and counted in
/// `Frame::dropped_nonfinite`.
inline Frame decode_kitti_bin(std::span<const char> bytes, std::string source_id = {}) {
  constexpr std::size_t kRecord = 16;
  if (bytes.empty())
    throw Error(ErrorKind::MalformedInput, "empty KITTI scan '" + source_id + "'");
  if (bytes.size() % kRecord != 0)
    throw Error(ErrorKind::MalformedInput,
                "KITTI scan '" + source_id + "' has " + std::to_string(bytes.size()) +
                    " bytes, not a multiple of 16");

  Frame frame;
  frame.source_id = std::move(source_id);
  const std::size_t count = bytes.size() / kRecord;
  frame.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const char* rec = bytes.data() + i * kRecord;
    const float x = io_detail::load_le_float(rec);
    const float y = io_detail::load_le_float(rec + 4);
    const float z = io_detail::load_le_float(rec + 8);
    const float intensity = io_detail::load_le_float(rec + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      ++frame.dropped_nonfinite;
      continue;
    }
    Point3 p;
    p.x = x;
    p.y = y;
    p.z = z;
    p.intensity = intensity;
    frame.points.push_back(p);
  }
  if (frame.points.empty())
    throw Error(ErrorKind::MalformedInput,
                "KITTI scan '" + frame.source_id + "' has no finite points");
  return frame;
}

inline Frame load_kitti_bin(const std::string& path) {
  const auto bytes = io_detail::read_all(path);
  return decode_kitti_bin(bytes, path);
}

/// Writes points as a KITTI scan (float32, little-endian).
inline void write_kitti_bin(const Frame& frame, const std::string& path) {
  std::string bytes;
  bytes.reserve(frame.size() * 16);
  auto put = [&](float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  };
  for (const auto& p : frame.points) {
    put(static_cast<float>(p.x));
    put(static_cast<float>(p.y));
    put(static_cast<float>(p.z));
    put(p.intensity);
  }
  io_detail::write_text(path, bytes);
}

/// Parses `x,y,z,label[,grade]` rows. A header is accepted on the first
/// non-empty line only. The optional fifth column carries the true terrain
/// grade written by the synthetic generator.
inline Frame parse_labeled_csv(std::string_view text, std::string source_id = {}) {
  Frame frame;
  frame.source_id = std::move(source_id);
  std::size_t line_no = 0;
  bool seen_content = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = io_detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }

    const auto fields = io_detail::split(line, ',');
    auto fail = [&](const std::string& why) {
      throw Error(ErrorKind::MalformedInput, frame.source_id + ": line " +
                                                 std::to_string(line_no) + ": " + why);
    };

    double x = 0, y = 0, z = 0;
    const bool numeric = fields.size() >= 3 && io_detail::parse_double(fields[0], x);
    if (!seen_content && !numeric) {
      seen_content = true;  // header row
      continue;
    }
    seen_content = true;
    if (fields.size() != 4 && fields.size() != 5)
      fail("expected 4 or 5 fields, got " + std::to_string(fields.size()));
    if (!io_detail::parse_double(fields[0], x) || !io_detail::parse_double(fields[1], y) ||
        !io_detail::parse_double(fields[2], z))
      fail("unparsable coordinate");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      fail("non-finite coordinate");

    Point3 p;
    p.x = x;
    p.y = y;
    p.z = z;
    const auto label = io_detail::trim(fields[3]);
    if (label == "1")
      p.truth = Label::Ground;
    else if (label == "0")
      p.truth = Label::NonGround;
    else
      fail("unknown label value '" + std::string(label) + "'");
    if (fields.size() == 5) {
      double grade = 0;
      const auto g = io_detail::trim(fields[4]);
      if (g.empty() || g == "nan")
        grade = std::numeric_limits<double>::quiet_NaN();
      else if (!io_detail::parse_double(g, grade))
        fail("unparsable grade");
      p.true_grade = grade;
    }
    frame.points.push_back(p);
    if (end == text.size()) break;
  }
  if (frame.points.empty())
    throw Error(ErrorKind::MalformedInput, "labeled CSV '" + frame.source_id + "' has no rows");
  return frame;
}

inline Frame load_labeled_csv(const std::string& path) {
  const auto bytes = io_detail::read_all(path);
  return parse_labeled_csv(std::string_view(bytes.data(), bytes.size()), path);
}

/// Writes ground-truth labels (and grades when known) in the format
/// `load_labeled_csv` reads.
inline void write_labeled_csv(const Frame& frame, const std::string& path) {
  std::string out = "x,y,z,label,grade\n";
  out.reserve(frame.size() * 48);
  for (const auto& p : frame.points) {
    io_detail::append_number(out, p.x);
    out.push_back(',');
    io_detail::append_number(out, p.y);
    out.push_back(',');
    io_detail::append_number(out, p.z);
    out.push_back(',');
    out.push_back(p.truth == Label::Ground ? '1' : '0');
    out.push_back(',');
    if (std::isnan(p.true_grade))
      out += "nan";
    else
      io_detail::append_number(out, p.true_grade);
    out.push_back('\n');
  }
  io_detail::write_text(path, out);
}

inline std::string format_predictions(const Frame& frame, std::span<const Label> predictions,
                                      OutputFormat format) {
  if (predictions.size() != frame.size())
    throw Error(ErrorKind::LengthMismatch,
                "prediction count " + std::to_string(predictions.size()) +
                    " does not match frame size " + std::to_string(frame.size()));
  std::string out;
  if (format == OutputFormat::Csv) {
    out = "x,y,z,pred\n";
    out.reserve(frame.size() * 40);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const auto& p = frame.points[i];
      io_detail::append_number(out, p.x);
      out.push_back(',');
      io_detail::append_number(out, p.y);
      out.push_back(',');
      io_detail::append_number(out, p.z);
      out.push_back(',');
      out.push_back(predictions[i] == Label::Ground ? '1' : '0');
      out.push_back('\n');
    }
    return out;
  }

  out = "ply\nformat ascii 1.0\ncomment ground=green non-ground=red\n";
  out += "element vertex " + std::to_string(frame.size()) + "\n";
  out +=
      "property double x\nproperty double y\nproperty double z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto& p = frame.points[i];
    io_detail::append_number(out, p.x);
    out.push_back(' ');
    io_detail::append_number(out, p.y);
    out.push_back(' ');
    io_detail::append_number(out, p.z);
    out += predictions[i] == Label::Ground ? " 0 255 0\n" : " 255 0 0\n";
  }
  return out;
}

inline void write_labeled_output(const Frame& frame, std::span<const Label> predictions,
                                 const std::string& path, OutputFormat format) {
  io_detail::write_text(path, format_predictions(frame, predictions, format));
}

}  // namespace gpground
