#include <algorithm>
#include <fstream>
#include <sstream>

#include "bfa/data.hpp"
#include "bfa/error.hpp"

namespace bfa {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size())
    throw ParseError(std::string(what) + ": truncated header", bytes.size());
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Dataset parse_idx(const std::string& image_bytes, const std::string& label_bytes,
                  std::size_t max_items, std::size_t downscale) {
  if (downscale < 1) throw InvalidConfig("downscale must be >= 1");
  if (std::uint32_t m = read_be32(image_bytes, 0, "image file"); m != kImageMagic)
    throw ParseError("image file: bad magic number", 0);
  if (std::uint32_t m = read_be32(label_bytes, 0, "label file"); m != kLabelMagic)
    throw ParseError("label file: bad magic number", 0);

  const std::size_t count = read_be32(image_bytes, 4, "image file");
  const std::size_t rows = read_be32(image_bytes, 8, "image file");
  const std::size_t cols = read_be32(image_bytes, 12, "image file");
  const std::size_t label_count = read_be32(label_bytes, 4, "label file");
  if (label_count != count)
    throw ParseError("label count " + std::to_string(label_count) + " does not match image count " +
                         std::to_string(count),
                     4);
  constexpr std::size_t kImageHeader = 16, kLabelHeader = 8;
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() < kImageHeader ||
      (pixels > 0 && count > (image_bytes.size() - kImageHeader) / pixels))
    throw ParseError("image file: truncated payload", image_bytes.size());
  if (label_bytes.size() < kLabelHeader + count)
    throw ParseError("label file: truncated payload", label_bytes.size());

  const std::size_t out_rows = rows / downscale, out_cols = cols / downscale;
  if (out_rows == 0 || out_cols == 0) throw InvalidConfig("downscale larger than the image");
  const std::size_t n = max_items == 0 ? count : std::min(count, max_items);
  const double block = static_cast<double>(downscale * downscale);

  Dataset ds;
  ds.name = "idx";
  std::size_t max_label = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t base = kImageHeader + k * pixels;
    Vec x(out_rows * out_cols);
    for (std::size_t r = 0; r < out_rows; ++r)
      for (std::size_t c = 0; c < out_cols; ++c) {
        double sum = 0.0;
        for (std::size_t dr = 0; dr < downscale; ++dr)
          for (std::size_t dc = 0; dc < downscale; ++dc)
            sum += static_cast<unsigned char>(
                image_bytes[base + (r * downscale + dr) * cols + c * downscale + dc]);
        x[r * out_cols + c] = sum / (255.0 * block);
      }
    const std::size_t y = static_cast<unsigned char>(label_bytes[kLabelHeader + k]);
    max_label = std::max(max_label, y);
    ds.points.push_back({std::move(x), y});
  }
  ds.num_classes = n ? max_label + 1 : 0;
  if (ds.num_classes >= 2) stratified_split(ds, 0.2, 0);
  else
    for (std::size_t i = 0; i < n; ++i) ds.train_idx.push_back(i);
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t max_items, std::size_t downscale) {
  return parse_idx(slurp(images), slurp(labels), max_items, downscale);
}

}  // namespace bfa
