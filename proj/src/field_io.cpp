#include "dgm/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace dgm {

namespace {

constexpr char kMagic[4] = {'D', 'G', 'M', 'F'};
constexpr uint8_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

// Reader over an in-memory buffer; every failure reports the offending byte.
struct Cursor {
  const std::vector<uint8_t>& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw IoError(path + ": truncated " + what, pos);
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return buf[pos++];
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

std::vector<uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path + ": read failed");
  return buf;
}

void spill(const std::string& path, const std::vector<uint8_t>& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(path + ": write failed");
}

Cursor open_field(const std::string& path, const std::vector<uint8_t>& buf) {
  Cursor c{buf, 0, path};
  c.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw IoError(path + ": bad magic", 0);
  c.pos = 4;
  const uint8_t version = c.u8("version");
  if (version != kVersion) throw IoError(path + ": unsupported version", 4);
  return c;
}

}  // namespace

void write_field(const std::string& path, const FeatureMap& f, FieldDtype dtype) {
  check_nonempty(f.height, f.width, "write_field");
  if (f.channels <= 0 || f.channels > 0xffff) throw IoError(path + ": bad channel count");
  std::vector<uint8_t> buf;
  buf.reserve(16 + f.size() * 8);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  buf.push_back(kVersion);
  buf.push_back(static_cast<uint8_t>(dtype));
  put_u16(buf, static_cast<uint16_t>(f.channels));
  put_u32(buf, static_cast<uint32_t>(f.height));
  put_u32(buf, static_cast<uint32_t>(f.width));
  switch (dtype) {
    case FieldDtype::F32:
      for (double v : f.data) put_u32(buf, std::bit_cast<uint32_t>(static_cast<float>(v)));
      break;
    case FieldDtype::F64:
      for (double v : f.data) put_u64(buf, std::bit_cast<uint64_t>(v));
      break;
    case FieldDtype::U16:
      for (double v : f.data) {
        if (!(v >= 0.0 && v <= 65535.0) || v != static_cast<double>(static_cast<uint16_t>(v)))
          throw RangeError("write_field: value not representable as u16");
        put_u16(buf, static_cast<uint16_t>(v));
      }
      break;
    default:
      throw ConfigError("write_field: unknown dtype");
  }
  spill(path, buf);
}

FeatureMap read_field(const std::string& path) {
  const std::vector<uint8_t> buf = slurp(path);
  Cursor c = open_field(path, buf);
  const uint8_t dtype = c.u8("dtype");
  const uint16_t channels = c.u16("channel count");
  const uint32_t height = c.u32("height");
  const uint32_t width = c.u32("width");
  if (channels == 0 || height == 0 || width == 0)
    throw IoError(path + ": empty field", 6);
  FeatureMap f(channels, static_cast<int>(height), static_cast<int>(width));
  switch (static_cast<FieldDtype>(dtype)) {
    case FieldDtype::F32:
      for (double& v : f.data) v = std::bit_cast<float>(c.u32("payload"));
      break;
    case FieldDtype::F64:
      for (double& v : f.data) v = std::bit_cast<double>(c.u64("payload"));
      break;
    case FieldDtype::U16:
      for (double& v : f.data) v = c.u16("payload");
      break;
    default:
      throw IoError(path + ": unknown dtype", 5);
  }
  if (c.pos != buf.size()) throw IoError(path + ": trailing bytes", c.pos);
  return f;
}

FieldDtype peek_field_dtype(const std::string& path) {
  const std::vector<uint8_t> buf = slurp(path);
  Cursor c = open_field(path, buf);
  const uint8_t dtype = c.u8("dtype");
  if (dtype < 1 || dtype > 3) throw IoError(path + ": unknown dtype", 5);
  return static_cast<FieldDtype>(dtype);
}

void write_mask(const std::string& path, const LabelMask& mask) {
  FeatureMap f(1, mask.height, mask.width);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int32_t l = mask.labels[i];
    if (l < 0 || l > 0xffff) throw RangeError("write_mask: label outside [0, 65535]");
    f.data[i] = l;
  }
  write_field(path, f, FieldDtype::U16);
}

LabelMask read_mask(const std::string& path) {
  if (peek_field_dtype(path) != FieldDtype::U16)
    throw IoError(path + ": mask must be stored as u16", 5);
  FeatureMap f = read_field(path);
  if (f.channels != 1) throw IoError(path + ": mask must have one channel", 6);
  LabelMask mask(f.height, f.width);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.labels[i] = static_cast<int32_t>(f.data[i]);
  return mask;
}

namespace {

// PGM header tokens are separated by whitespace; '#' starts a comment that
// runs to end of line.
int pgm_token(Cursor& c, const char* what) {
  for (;;) {
    c.need(1, what);
    const uint8_t ch = c.buf[c.pos];
    if (ch == '#') {
      while (c.pos < c.buf.size() && c.buf[c.pos] != '\n') ++c.pos;
    } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
      ++c.pos;
    } else {
      break;
    }
  }
  if (!(c.buf[c.pos] >= '0' && c.buf[c.pos] <= '9'))
    throw IoError(c.path + ": expected number in header", c.pos);
  long v = 0;
  while (c.pos < c.buf.size() && c.buf[c.pos] >= '0' && c.buf[c.pos] <= '9') {
    v = v * 10 + (c.buf[c.pos] - '0');
    if (v > 1000000000L) throw IoError(c.path + ": header number too large", c.pos);
    ++c.pos;
  }
  return static_cast<int>(v);
}

}  // namespace

LabelMask read_pgm(const std::string& path) {
  const std::vector<uint8_t> buf = slurp(path);
  Cursor c{buf, 0, path};
  c.need(2, "signature");
  if (buf[0] != 'P' || buf[1] != '5') throw IoError(path + ": not a binary PGM", 0);
  c.pos = 2;
  const int width = pgm_token(c, "width");
  const int height = pgm_token(c, "height");
  const int maxval = pgm_token(c, "maxval");
  if (width <= 0 || height <= 0) throw IoError(path + ": empty image", c.pos);
  if (maxval <= 0 || maxval > 65535) throw IoError(path + ": maxval outside [1, 65535]", c.pos);
  c.need(1, "raster separator");
  const uint8_t sep = buf[c.pos];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    throw IoError(path + ": missing raster separator", c.pos);
  ++c.pos;

  LabelMask mask(height, width);
  const bool wide = maxval > 255;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    int v;
    if (wide) {
      c.need(2, "raster");
      v = (buf[c.pos] << 8) | buf[c.pos + 1];  // two-byte samples are big-endian
      c.pos += 2;
    } else {
      c.need(1, "raster");
      v = buf[c.pos];
      ++c.pos;
    }
    if (v > maxval) throw IoError(path + ": sample exceeds maxval", c.pos - (wide ? 2 : 1));
    mask.labels[i] = v;
  }
  if (c.pos != buf.size()) throw IoError(path + ": trailing bytes", c.pos);
  return mask;
}

void write_pgm(const std::string& path, const LabelMask& mask, int maxval) {
  check_nonempty(mask.height, mask.width, "write_pgm");
  if (maxval <= 0 || maxval > 65535) throw RangeError("write_pgm: maxval outside [1, 65535]");
  std::vector<uint8_t> buf;
  const std::string header = "P5\n" + std::to_string(mask.width) + " " +
                             std::to_string(mask.height) + "\n" + std::to_string(maxval) + "\n";
  buf.insert(buf.end(), header.begin(), header.end());
  for (int32_t l : mask.labels) {
    if (l < 0 || l > maxval) throw RangeError("write_pgm: label outside [0, maxval]");
    if (maxval > 255) {
      buf.push_back(static_cast<uint8_t>(l >> 8));
      buf.push_back(static_cast<uint8_t>(l & 0xff));
    } else {
      buf.push_back(static_cast<uint8_t>(l));
    }
  }
  spill(path, buf);
}

}  // namespace dgm
