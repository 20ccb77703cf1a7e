#include "maskexplain/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "maskexplain/random.hpp"
#include "maskexplain/tensor_io.hpp"

namespace maskexplain {

namespace {

constexpr double kNoiseAmplitude = 0.1;

// Draws one shape into `fg` (1 on shape pixels).
void draw_shape(ShapeClass cls, Rng& rng, BinaryMask& fg) {
  const int n = fg.height;
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  switch (cls) {
    case ShapeClass::kSquare: {
      const int side = uniform_int(6, 14);
      const int x0 = uniform_int(1, n - 1 - side);
      const int y0 = uniform_int(1, n - 1 - side);
      for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) fg(y, x) = 1;
      break;
    }
    case ShapeClass::kDisk: {
      const double r = std::uniform_real_distribution<double>(3.5, 8.0)(rng);
      const int margin = static_cast<int>(std::ceil(r)) + 1;
      const double cx = uniform_int(margin, n - margin);
      const double cy = uniform_int(margin, n - margin);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          if (dx * dx + dy * dy <= r * r) fg(y, x) = 1;
        }
      break;
    }
    case ShapeClass::kCross: {
      const int span = uniform_int(9, 17);
      const int thick = std::max(2, span / 3);
      const int x0 = uniform_int(1, n - 1 - span);
      const int y0 = uniform_int(1, n - 1 - span);
      const int off = (span - thick) / 2;
      for (int y = y0; y < y0 + span; ++y)
        for (int x = x0; x < x0 + span; ++x) {
          const bool vertical = x >= x0 + off && x < x0 + off + thick;
          const bool horizontal = y >= y0 + off && y < y0 + off + thick;
          if (vertical || horizontal) fg(y, x) = 1;
        }
      break;
    }
  }
}

Box tight_box(const BinaryMask& fg) {
  Box b{fg.width, fg.height, 0, 0};
  for (int y = 0; y < fg.height; ++y)
    for (int x = 0; x < fg.width; ++x)
      if (fg(y, x)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
  return b;
}

}  // namespace

ShapeCorpus ShapeCorpus::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, size());
  begin = std::min(begin, end);
  ShapeCorpus out;
  out.images.assign(images.begin() + begin, images.begin() + end);
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  out.boxes.assign(boxes.begin() + begin, boxes.begin() + end);
  return out;
}

ShapeCorpus generate_shape_corpus(int n, std::uint64_t seed) {
  if (n < 1) throw InvalidParameter("corpus size must be >= 1");
  ShapeCorpus corpus;
  corpus.images.reserve(n);
  const int size = kShapeImageSize;
  for (int i = 0; i < n; ++i) {
    // one stream per sample, so a prefix of a corpus does not depend on n
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const int label = std::uniform_int_distribution<int>(0, kShapeClasses - 1)(rng);
    const double background = std::uniform_real_distribution<double>(0.05, 0.35)(rng);
    const double foreground = std::uniform_real_distribution<double>(0.65, 1.0)(rng);
    BinaryMask fg(size, size, 0);
    draw_shape(static_cast<ShapeClass>(label), rng, fg);
    std::uniform_real_distribution<double> noise(-kNoiseAmplitude, kNoiseAmplitude);
    Image img(size, size, 1);
    for (std::size_t p = 0; p < img.size(); ++p)
      img.data[p] = std::clamp((fg.data[p] ? foreground : background) + noise(rng), 0.0, 1.0);
    corpus.images.push_back(std::move(img));
    corpus.labels.push_back(label);
    corpus.boxes.push_back(tight_box(fg));
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& dir, const ShapeCorpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  write_mpt1(dir / "images.mpt1", stack_images(corpus.images));
  std::ostringstream csv;
  csv << "index,label,x0,y0,x1,y1\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Box& b = corpus.boxes[i];
    csv << i << ',' << corpus.labels[i] << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << '\n';
  }
  write_text(dir / "labels.csv", csv.str());
}

ShapeCorpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "images.mpt1") || !std::filesystem::exists(dir / "labels.csv"))
    throw IoError("corpus not found in " + dir.string());
  ShapeCorpus corpus;
  corpus.images = unstack_images(read_mpt1(dir / "images.mpt1"));
  std::istringstream csv(read_text(dir / "labels.csv"));
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::size_t index = 0;
    int label = 0;
    Box b;
    if (!(row >> index >> label >> b.x0 >> b.y0 >> b.x1 >> b.y1)) throw IoError("malformed labels.csv row: " + line);
    if (index != corpus.labels.size()) throw IoError("labels.csv rows out of order");
    corpus.labels.push_back(label);
    corpus.boxes.push_back(b);
  }
  if (corpus.labels.size() != corpus.images.size()) throw IoError("labels.csv and images.mpt1 disagree in length");
  return corpus;
}

}  // namespace maskexplain
