#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "seqdispatch/matrix.hpp"

namespace seqdispatch {

/// Parameter checkpoint layout (all integers and floats little-endian):
///
///   8 bytes   magic "SQDCKPT1"
///   u32       format version (1)
///   u32       tensor count N
///   N x { u32 name length, name bytes, u64 rows, u64 cols }   shape table
///   sum(rows*cols) x f64                                       payload, table order
struct NamedTensor {
  std::string name;
  Matrix value;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

template <typename P>
std::vector<NamedTensor> to_tensors(const P& params) {
  std::vector<NamedTensor> out;
  P::visit(params, "", [&](const std::string& name, const Matrix& m) { out.push_back({name, m}); });
  return out;
}

/// Overwrites every matrix of `params` from `tensors`, which must carry the
/// same names and shapes in the same order. Throws ShapeMismatch otherwise.
template <typename P>
void from_tensors(P& params, const std::vector<NamedTensor>& tensors);

void check_tensor(const NamedTensor& t, const std::string& name, const Matrix& like, std::size_t index);

template <typename P>
void from_tensors(P& params, const std::vector<NamedTensor>& tensors) {
  std::size_t k = 0;
  P::visit(params, "", [&](const std::string& name, Matrix& m) {
    if (k >= tensors.size()) check_tensor({}, name, m, k);
    check_tensor(tensors[k], name, m, k);
    m = tensors[k].value;
    ++k;
  });
  if (k != tensors.size()) check_tensor(tensors[k], "<end>", Matrix(), k);
}

}  // namespace seqdispatch
