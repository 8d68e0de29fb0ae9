#include "lwf/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "../binary_io.hpp"

namespace lwf::data {

namespace {

constexpr std::size_t kCifarRecord = 3074;
constexpr std::size_t kCifarClasses = 100;
constexpr char kArchiveMagic[4] = {'T', 'I', 'A', '1'};
constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::format, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

void Dataset::validate() const {
  require(!labels.empty(), ErrorKind::data, "dataset is empty");
  require(images.rank() == 4 && images.dim(0) == labels.size(), ErrorKind::data,
          "dataset images " + shape_string(images.shape()) + " do not match " + std::to_string(labels.size()) +
              " labels");
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto l : labels) {
    require(l < num_classes, ErrorKind::data,
            "label " + std::to_string(l) + " exceeds class count " + std::to_string(num_classes));
    ++counts[l];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    require(counts[c] > 0, ErrorKind::data, "class " + std::to_string(c) + " has no samples");
}

Dataset from_bytes(const std::vector<std::uint8_t>& pixels, std::vector<std::size_t> labels, std::size_t channels,
                   std::size_t height, std::size_t width, std::size_t num_classes) {
  Dataset ds;
  require(!labels.empty(), ErrorKind::format, "no samples");
  require(pixels.size() == labels.size() * channels * height * width, ErrorKind::format, "pixel count mismatch");
  ds.images = Tensor<float>({labels.size(), channels, height, width});
  auto out = ds.images.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = static_cast<float>(pixels[i]) / 255.0f;
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  return ds;
}

Dataset load_cifar100(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  require(!bytes.empty(), ErrorKind::format, path.string() + " is empty");
  require(bytes.size() % kCifarRecord == 0, ErrorKind::format,
          path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 3074");
  const std::size_t n = bytes.size() / kCifarRecord;
  std::vector<std::uint8_t> pixels;
  pixels.reserve(n * 3072);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = bytes.data() + i * kCifarRecord;
    require(rec[1] < kCifarClasses, ErrorKind::format,
            path.string() + ": record " + std::to_string(i) + " has fine label " + std::to_string(rec[1]));
    labels[i] = rec[1];
    pixels.insert(pixels.end(), rec + 2, rec + kCifarRecord);
  }
  return from_bytes(pixels, std::move(labels), 3, 32, 32, kCifarClasses);
}

Dataset load_tensor_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::format, "cannot open " + path.string());
  char magic[4];
  io::read_exact(is, magic, 4, "archive magic");
  require(std::equal(magic, magic + 4, kArchiveMagic), ErrorKind::format, path.string() + ": bad archive magic");
  const auto version = io::read_le<std::uint32_t>(is, "archive version");
  require(version == kArchiveVersion, ErrorKind::format,
          path.string() + ": unsupported archive version " + std::to_string(version));
  const auto n = io::read_le<std::uint64_t>(is, "sample count");
  const auto c = io::read_le<std::uint32_t>(is, "channels");
  const auto h = io::read_le<std::uint32_t>(is, "height");
  const auto w = io::read_le<std::uint32_t>(is, "width");
  require(n > 0, ErrorKind::format, path.string() + ": archive holds no samples");
  require(c > 0 && h > 0 && w > 0, ErrorKind::format, path.string() + ": zero image dimension");
  std::vector<std::size_t> labels(n);
  std::size_t num_classes = 0;
  for (auto& l : labels) {
    l = io::read_le<std::uint16_t>(is, "labels");
    num_classes = std::max(num_classes, l + 1);
  }
  std::vector<std::uint8_t> pixels(n * c * h * w);
  io::read_exact(is, reinterpret_cast<char*>(pixels.data()), pixels.size(), "image payload");
  require(is.peek() == std::char_traits<char>::eof(), ErrorKind::format, path.string() + ": trailing bytes");
  return from_bytes(pixels, std::move(labels), c, h, w, num_classes);
}

void save_tensor_archive(const Dataset& ds, const std::filesystem::path& path) {
  require(ds.size() > 0, ErrorKind::format, "refusing to write an empty archive");
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::format, "cannot open " + path.string() + " for writing");
  os.write(kArchiveMagic, 4);
  io::write_le<std::uint32_t>(os, kArchiveVersion);
  io::write_le<std::uint64_t>(os, ds.size());
  for (std::size_t d = 1; d < 4; ++d) io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.images.dim(d)));
  for (auto l : ds.labels) {
    require(l <= 0xFFFF, ErrorKind::format, "label does not fit in 16 bits");
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(l));
  }
  std::vector<char> pixels(ds.images.size());
  auto src = ds.images.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float v = std::clamp(src[i], 0.0f, 1.0f);
    pixels[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  }
  os.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  require(static_cast<bool>(os), ErrorKind::format, "write failed for " + path.string());
}

Dataset load_raw_rgb(const std::filesystem::path& pixels_path, const std::filesystem::path& labels_path,
                     std::size_t height, std::size_t width) {
  const auto pixels = read_file(pixels_path);
  require(!pixels.empty(), ErrorKind::format, pixels_path.string() + " is empty");
  const std::size_t per_image = 3 * height * width;
  require(per_image > 0 && pixels.size() % per_image == 0, ErrorKind::format,
          pixels_path.string() + ": size is not a multiple of 3*H*W");
  std::ifstream ls(labels_path);
  require(static_cast<bool>(ls), ErrorKind::format, "cannot open " + labels_path.string());
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ls, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream in(line);
    long long v = -1;
    std::string rest;
    require(static_cast<bool>(in >> v) && !(in >> rest) && v >= 0 && v <= 0xFFFF, ErrorKind::format,
            labels_path.string() + ":" + std::to_string(lineno) + ": bad label '" + line + "'");
    labels.push_back(static_cast<std::size_t>(v));
    num_classes = std::max(num_classes, labels.back() + 1);
  }
  require(labels.size() == pixels.size() / per_image, ErrorKind::format,
          labels_path.string() + ": " + std::to_string(labels.size()) + " labels for " +
              std::to_string(pixels.size() / per_image) + " images");
  return from_bytes(pixels, std::move(labels), 3, height, width, num_classes);
}

namespace {

std::vector<std::vector<float>> draw_templates(const SynthSpec& spec, Prng& rng) {
  const std::size_t dim = 3 * spec.image_size * spec.image_size;
  std::vector<std::vector<float>> templates(spec.n_classes, std::vector<float>(dim));
  for (auto& t : templates)
    for (auto& v : t) v = static_cast<float>(rng.uniform01());
  return templates;
}

Dataset draw_samples(const SynthSpec& spec, const std::vector<std::vector<float>>& templates, std::size_t per_class,
                     Prng rng) {
  const std::size_t dim = 3 * spec.image_size * spec.image_size;
  Dataset ds;
  ds.num_classes = spec.n_classes;
  ds.images = Tensor<float>({spec.n_classes * per_class, 3, spec.image_size, spec.image_size});
  float* out = ds.images.raw();
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const auto& t = templates[c];
    double mean = 0.0;
    for (float v : t) mean += v;
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (float v : t) var += (v - mean) * (v - mean);
    const double spread = std::sqrt(var / static_cast<double>(dim));
    const double noise = std::isinf(spec.separation) ? 0.0 : spread / spec.separation;
    for (std::size_t s = 0; s < per_class; ++s) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double v = noise > 0.0 ? t[k] + rng.normal(0.0, noise) : t[k];
        *out++ = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

void check_synth(const SynthSpec& spec) {
  require(spec.n_classes >= 2, ErrorKind::config, "synthetic data needs at least 2 classes");
  require(spec.per_class >= 2, ErrorKind::config, "synthetic data needs at least 2 samples per class");
  require(spec.image_size >= 1, ErrorKind::config, "synthetic image size must be positive");
  require(spec.separation > 0.0, ErrorKind::config, "synthetic separation must be positive");
}

}  // namespace

Dataset synth_tasks(const SynthSpec& spec, Prng rng) {
  check_synth(spec);
  Prng trng = rng.fork(0);
  const auto templates = draw_templates(spec, trng);
  return draw_samples(spec, templates, spec.per_class, rng.fork(1));
}

std::pair<Dataset, Dataset> synth_train_test(const SynthSpec& spec, std::size_t test_per_class, Prng rng) {
  check_synth(spec);
  require(test_per_class >= 1, ErrorKind::config, "synthetic test split needs at least one sample per class");
  Prng trng = rng.fork(0);
  const auto templates = draw_templates(spec, trng);
  return {draw_samples(spec, templates, spec.per_class, rng.fork(1)),
          draw_samples(spec, templates, test_per_class, rng.fork(2))};
}

}  // namespace lwf::data
