#include "lf4d/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace lf4d {

namespace {

constexpr char kFieldMagic[4] = {'L', 'F', '4', 'D'};
constexpr char kParamMagic[4] = {'L', 'F', '4', 'P'};
constexpr std::uint8_t kVersion = 1;

template <typename U>
void put(std::ostream& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t k = 0; k < sizeof(U); ++k) b[k] = static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char b[sizeof(U)];
  in.read(reinterpret_cast<char*>(b), sizeof(U));
  if (!in) throw std::runtime_error("unexpected end of stream");
  std::uint64_t v = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return static_cast<U>(v);
}

void put_values(std::ostream& out, std::span<const double> values, DType dtype) {
  if (dtype == DType::float32) {
    for (double v : values) put(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    for (double v : values) put(out, std::bit_cast<std::uint64_t>(v));
  }
}

void get_values(std::istream& in, std::span<double> values, DType dtype) {
  if (dtype == DType::float32) {
    for (double& v : values) v = std::bit_cast<float>(get<std::uint32_t>(in));
  } else {
    for (double& v : values) v = std::bit_cast<double>(get<std::uint64_t>(in));
  }
}

DType read_dtype(std::istream& in) {
  const auto tag = get<std::uint8_t>(in);
  if (tag != 1 && tag != 2) throw std::runtime_error("unknown dtype tag " + std::to_string(tag));
  return static_cast<DType>(tag);
}

void expect_magic(std::istream& in, const char (&magic)[4], const char* what) {
  char m[4];
  in.read(m, 4);
  if (!in || std::memcmp(m, magic, 4) != 0) throw std::runtime_error(std::string("not an ") + what + " stream");
  const auto version = get<std::uint8_t>(in);
  if (version != kVersion)
    throw std::runtime_error(std::string("unsupported ") + what + " version " + std::to_string(version));
}

std::uint32_t checked_u32(Index v) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw std::invalid_argument("extent does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_lf4d(std::ostream& out, const LightField& field, DType dtype) {
  out.write(kFieldMagic, 4);
  put(out, kVersion);
  for (Index e : field.shape()) put(out, checked_u32(e));
  put(out, static_cast<std::uint8_t>(dtype));
  put_values(out, field.values(), dtype);
  if (!out) throw std::runtime_error("write_lf4d: stream error");
}

void write_lf4d(const std::filesystem::path& path, const LightField& field, DType dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_lf4d: cannot open " + path.string());
  write_lf4d(out, field, dtype);
}

LightField read_lf4d(std::istream& in) {
  expect_magic(in, kFieldMagic, "LF4D");
  Extents<5> e{};
  for (auto& v : e) {
    v = get<std::uint32_t>(in);
    if (v == 0) throw std::runtime_error("read_lf4d: zero extent");
  }
  const DType dtype = read_dtype(in);
  LightField field(e);
  get_values(in, field.values(), dtype);
  return field;
}

LightField read_lf4d(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_lf4d: cannot open " + path.string());
  return read_lf4d(in);
}

// ---------------------------------------------------------------------------
// PNG view directories

namespace {

std::string view_name(Index s, Index t) {
  std::ostringstream os;
  os << "view_" << std::setw(2) << std::setfill('0') << s << '_' << std::setw(2) << std::setfill('0') << t << ".png";
  return os.str();
}

}  // namespace

void write_views_png(const std::filesystem::path& dir, const LightField& field) {
  const auto& e = field.shape();
  if (e[axis::C] != 1 && e[axis::C] != 3) throw std::invalid_argument("write_views_png: need 1 or 3 channels");
  std::filesystem::create_directories(dir);
  const Index C = e[axis::C], Y = e[axis::Y], X = e[axis::X];
  std::vector<png_byte> buffer(static_cast<std::size_t>(C * Y * X));
  for_each_view(field, [&](Index s, Index t) {
    for (Index y = 0; y < Y; ++y)
      for (Index x = 0; x < X; ++x)
        for (Index c = 0; c < C; ++c) {
          const double v = std::clamp(field(c, s, t, y, x), 0.0, 1.0);
          buffer[static_cast<std::size_t>((y * X + x) * C + c)] = static_cast<png_byte>(std::lround(v * 255.0));
        }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(X);
    image.height = static_cast<png_uint_32>(Y);
    image.format = C == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    const auto path = (dir / view_name(s, t)).string();
    if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr))
      throw std::runtime_error("write_views_png: " + std::string(image.message));
  });
}

LightField read_views_png(const std::filesystem::path& dir) {
  static const std::regex pattern(R"(view_(\d{2})_(\d{2})\.png)");
  std::map<std::pair<Index, Index>, std::filesystem::path> files;
  Index S = 0, T = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const Index s = std::stol(m[1]), t = std::stol(m[2]);
    files[{s, t}] = entry.path();
    S = std::max(S, s + 1);
    T = std::max(T, t + 1);
  }
  if (files.empty()) throw std::runtime_error("read_views_png: no view_SS_TT.png files in " + dir.string());
  if (static_cast<Index>(files.size()) != S * T) throw std::runtime_error("read_views_png: incomplete view grid");

  LightField field;
  Index C = 0, Y = 0, X = 0;
  for (const auto& [st, path] : files) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
      throw std::runtime_error("read_views_png: " + std::string(image.message));
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr))
      throw std::runtime_error("read_views_png: " + std::string(image.message));
    const Index c = color ? 3 : 1, h = image.height, w = image.width;
    if (field.empty()) {
      C = c, Y = h, X = w;
      field = LightField({C, S, T, Y, X});
    } else if (c != C || h != Y || w != X) {
      throw std::runtime_error("read_views_png: views differ in size or color format");
    }
    for (Index y = 0; y < Y; ++y)
      for (Index x = 0; x < X; ++x)
        for (Index k = 0; k < C; ++k)
          field(k, st.first, st.second, y, x) = buffer[static_cast<std::size_t>((y * X + x) * C + k)] / 255.0;
  }
  return field;
}

// ---------------------------------------------------------------------------
// Parameter bundles

void write_param_bundle(std::ostream& out, std::span<const ParamRecord> records) {
  out.write(kParamMagic, 4);
  put(out, kVersion);
  put(out, checked_u32(static_cast<Index>(records.size())));
  for (const auto& r : records) {
    put(out, checked_u32(static_cast<Index>(r.name.size())));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
  }
  for (const auto& r : records) {
    if (r.shape.size() > 255) throw std::invalid_argument("write_param_bundle: rank too large");
    Index count = 1;
    for (Index e : r.shape) count *= e;
    if (count != static_cast<Index>(r.values.size()))
      throw std::invalid_argument("write_param_bundle: record '" + r.name + "' shape does not match value count");
    put(out, static_cast<std::uint8_t>(r.shape.size()));
    for (Index e : r.shape) put(out, checked_u32(e));
    put(out, static_cast<std::uint8_t>(r.dtype));
    put_values(out, r.values, r.dtype);
  }
  if (!out) throw std::runtime_error("write_param_bundle: stream error");
}

std::vector<ParamRecord> read_param_bundle(std::istream& in) {
  expect_magic(in, kParamMagic, "LF4P");
  const auto count = get<std::uint32_t>(in);
  std::vector<ParamRecord> records(count);
  for (auto& r : records) {
    const auto len = get<std::uint32_t>(in);
    r.name.resize(len);
    in.read(r.name.data(), len);
    if (!in) throw std::runtime_error("read_param_bundle: truncated name table");
  }
  for (auto& r : records) {
    const auto rank = get<std::uint8_t>(in);
    r.shape.resize(rank);
    Index n = 1;
    for (auto& e : r.shape) {
      e = get<std::uint32_t>(in);
      n *= e;
    }
    r.dtype = read_dtype(in);
    r.values.resize(static_cast<std::size_t>(n));
    get_values(in, r.values, r.dtype);
  }
  return records;
}

}  // namespace lf4d
