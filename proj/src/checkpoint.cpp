#include "seqdispatch/checkpoint.hpp"

#include <fstream>

#include "seqdispatch/detail/binary_io.hpp"
#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {
constexpr std::string_view kMagic = "SQDCKPT1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  detail::write_u32(out, kVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    detail::write_string(out, t.name);
    detail::write_u64(out, t.value.rows());
    detail::write_u64(out, t.value.cols());
  }
  for (const auto& t : tensors) {
    for (double v : t.value.values()) detail::write_f64(out, v);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  detail::expect_magic(in, kMagic, path.string());
  const auto version = detail::read_u32(in);
  if (version != kVersion) {
    throw Error(ErrorCode::IoError, path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = detail::read_u32(in);
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    t.name = detail::read_string(in);
    const auto rows = detail::read_u64(in);
    const auto cols = detail::read_u64(in);
    if (rows * cols > (std::uint64_t{1} << 32)) throw Error(ErrorCode::IoError, "tensor too large");
    t.value = Matrix(rows, cols);
  }
  for (auto& t : tensors) {
    for (double& v : t.value.values()) v = detail::read_f64(in);
  }
  return tensors;
}

void check_tensor(const NamedTensor& t, const std::string& name, const Matrix& like, std::size_t index) {
  if (t.name != name || !t.value.same_shape(like)) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor " + std::to_string(index) + " ('" + t.name +
                                              "') does not match expected '" + name + "'");
  }
}

}  // namespace seqdispatch
