#include "lwf/runner/convert.hpp"

#include "lwf/error.hpp"

namespace lwf::runner {

data::Dataset convert_to_archive(const ConvertInput& input, const std::filesystem::path& out) {
  require(std::filesystem::is_regular_file(input.images), ErrorKind::format,
          "unsupported input " + input.images.string() + ": expected a CIFAR binary or raw RGB dump file");
  data::Dataset ds;
  if (input.labels) {
    require(input.height > 0 && input.width > 0, ErrorKind::config, "raw RGB input needs --height and --width");
    ds = data::load_raw_rgb(input.images, *input.labels, input.height, input.width);
  } else {
    ds = data::load_cifar100(input.images);
  }
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  data::save_tensor_archive(ds, out);
  return ds;
}

}  // namespace lwf::runner
