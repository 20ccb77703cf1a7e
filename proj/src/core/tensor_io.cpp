#include "maskexplain/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "maskexplain/core.hpp"

namespace maskexplain {

static_assert(std::endian::native == std::endian::little, "MPT1 I/O assumes a little-endian host");

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_mpt1(const Tensor& t) {
  if (t.dims.size() > 255) throw InvalidInput("too many tensor dimensions");
  if (t.element_count() != t.values.size()) throw ShapeMismatch("tensor dims do not match payload");
  std::vector<std::uint8_t> out = {'M', 'P', 'T', '1', static_cast<std::uint8_t>(t.dims.size())};
  out.reserve(5 + 4 * t.dims.size() + 4 * t.values.size());
  auto put32 = [&out](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  };
  for (auto d : t.dims) put32(d);
  for (float v : t.values) put32(std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_mpt1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "MPT1", 4) != 0) throw IoError("not an MPT1 tensor");
  const std::size_t ndim = bytes[4];
  std::size_t pos = 5;
  auto get32 = [&]() {
    if (pos + 4 > bytes.size()) throw IoError("truncated MPT1 tensor");
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[pos + b]) << (8 * b);
    pos += 4;
    return v;
  };
  Tensor t;
  for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get32());
  const std::size_t n = t.element_count();
  if (bytes.size() != pos + 4 * n) throw IoError("MPT1 payload size does not match dims");
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.values[i] = std::bit_cast<float>(get32());
  return t;
}

void write_mpt1(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_mpt1(t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Tensor read_mpt1(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_mpt1(bytes);
}

namespace {

template <class P>
Tensor plane_tensor(const P& p) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(p.height), static_cast<std::uint32_t>(p.width)};
  t.values.assign(p.data.begin(), p.data.end());
  return t;
}

template <class P>
P plane_from(const Tensor& t) {
  if (t.dims.size() != 2 && !(t.dims.size() == 3 && t.dims[2] == 1))
    throw ShapeMismatch("expected a [H, W] tensor");
  P p(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  p.data.assign(t.values.begin(), t.values.end());
  return p;
}

}  // namespace

Tensor to_tensor(const Image& img) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width),
            static_cast<std::uint32_t>(img.channels)};
  t.values.assign(img.data.begin(), img.data.end());
  return t;
}
Tensor to_tensor(const Mask& m) { return plane_tensor(m); }
Tensor to_tensor(const Heatmap& h) { return plane_tensor(h); }
Tensor to_tensor(const Field& f) { return plane_tensor(f); }

Tensor stack_images(const std::vector<Image>& images) {
  Tensor t;
  if (images.empty()) {
    t.dims = {0, 0, 0, 0};
    return t;
  }
  const Image& first = images.front();
  t.dims = {static_cast<std::uint32_t>(images.size()), static_cast<std::uint32_t>(first.height),
            static_cast<std::uint32_t>(first.width), static_cast<std::uint32_t>(first.channels)};
  t.values.reserve(images.size() * first.size());
  for (const Image& img : images) {
    if (!img.same_shape(first)) throw ShapeMismatch("cannot stack images of different shapes");
    t.values.insert(t.values.end(), img.data.begin(), img.data.end());
  }
  return t;
}

Image image_from_tensor(const Tensor& t) {
  if (t.dims.size() != 2 && t.dims.size() != 3) throw ShapeMismatch("expected a [H, W] or [H, W, C] tensor");
  const int c = t.dims.size() == 3 ? static_cast<int>(t.dims[2]) : 1;
  Image img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), c);
  img.data.assign(t.values.begin(), t.values.end());
  return img;
}

Mask mask_from_tensor(const Tensor& t) {
  Mask m = plane_from<Mask>(t);
  check_mask(m);
  return m;
}

Heatmap heatmap_from_tensor(const Tensor& t) { return plane_from<Heatmap>(t); }

std::vector<Image> unstack_images(const Tensor& t) {
  if (t.dims.size() != 3 && t.dims.size() != 4) throw ShapeMismatch("expected a [N, H, W(, C)] tensor");
  const int n = static_cast<int>(t.dims[0]);
  const int h = static_cast<int>(t.dims[1]);
  const int w = static_cast<int>(t.dims[2]);
  const int c = t.dims.size() == 4 ? static_cast<int>(t.dims[3]) : 1;
  std::vector<Image> out;
  out.reserve(n);
  const std::size_t per = static_cast<std::size_t>(h) * w * c;
  for (int i = 0; i < n; ++i) {
    Image img(h, w, c);
    std::copy_n(t.values.begin() + i * per, per, img.data.begin());
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<Heatmap> unstack_heatmaps(const Tensor& t) {
  if (t.dims.size() != 3) throw ShapeMismatch("expected a [N, H, W] tensor");
  const int n = static_cast<int>(t.dims[0]);
  const int h = static_cast<int>(t.dims[1]);
  const int w = static_cast<int>(t.dims[2]);
  const std::size_t per = static_cast<std::size_t>(h) * w;
  std::vector<Heatmap> out;
  for (int i = 0; i < n; ++i) {
    Heatmap m(h, w);
    std::copy_n(t.values.begin() + i * per, per, m.data.begin());
    out.push_back(std::move(m));
  }
  return out;
}

Tensor stack_heatmaps(const std::vector<Heatmap>& maps) {
  Tensor t;
  if (maps.empty()) {
    t.dims = {0, 0, 0};
    return t;
  }
  t.dims = {static_cast<std::uint32_t>(maps.size()), static_cast<std::uint32_t>(maps[0].height),
            static_cast<std::uint32_t>(maps[0].width)};
  for (const Heatmap& m : maps) {
    if (!m.same_shape(maps[0])) throw ShapeMismatch("cannot stack heatmaps of different shapes");
    t.values.insert(t.values.end(), m.data.begin(), m.data.end());
  }
  return t;
}

std::string encode_pgm(const Heatmap& h) {
  const Heatmap n = normalize_heatmap(h);
  std::ostringstream os;
  os << "P5\n" << h.width << ' ' << h.height << "\n255\n";
  std::string out = os.str();
  out.reserve(out.size() + n.size());
  for (double v : n.data) out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * v))));
  return out;
}

void write_pgm(const std::filesystem::path& path, const Heatmap& h) { write_text(path, encode_pgm(h)); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace maskexplain
