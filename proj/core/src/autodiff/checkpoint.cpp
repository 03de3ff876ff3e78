/*
 * Copyright 2026 The ftsched Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ftsched/autodiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ftsched/error.hpp"

namespace ftsched::ad {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'F', 'T', 'C', 'K', '0', '0', '0', '1'};

std::filesystem::path with_ext(const std::filesystem::path& stem,
                               const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& file) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError("truncated checkpoint " + file.string());
  }
  return v;
}

}  // namespace

void save_tensors(const std::filesystem::path& stem, const ParamMap& tensors) {
  const auto bin_path = with_ext(stem, ".bin");
  const auto idx_path = with_ext(stem, ".idx");
  std::ofstream bin(bin_path, std::ios::binary);
  std::ofstream idx(idx_path);
  if (!bin || !idx) throw IoError("cannot write checkpoint " + stem.string());
  bin.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(bin, tensors.size());
  idx << "ftsched-tensors 1 " << tensors.size() << '\n';
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(bin, static_cast<std::uint32_t>(name.size()));
    bin.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(bin, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(bin, d);
    const auto offset = static_cast<long long>(bin.tellp());
    bin.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
    idx << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) idx << ' ' << d;
    idx << ' ' << offset << '\n';
  }
  if (!bin || !idx) throw IoError("failed writing checkpoint " + stem.string());
}

ParamMap load_tensors(const std::filesystem::path& stem) {
  const auto bin_path = with_ext(stem, ".bin");
  const auto idx_path = with_ext(stem, ".idx");
  std::ifstream bin(bin_path, std::ios::binary);
  std::ifstream idx(idx_path);
  if (!bin) throw IoError("missing checkpoint data " + bin_path.string());
  if (!idx) throw IoError("missing checkpoint index " + idx_path.string());

  char magic[8];
  if (!bin.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("bad checkpoint header in " + bin_path.string());
  }
  const auto count = get<std::uint64_t>(bin, bin_path);

  std::string tag;
  int version = 0;
  std::uint64_t idx_count = 0;
  if (!(idx >> tag >> version >> idx_count) || tag != "ftsched-tensors" ||
      version != 1 || idx_count != count) {
    throw IoError("checkpoint index " + idx_path.string() +
                  " does not match its data file");
  }

  ParamMap out;
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto len = get<std::uint32_t>(bin, bin_path);
    std::string name(len, '\0');
    if (!bin.read(name.data(), len)) throw IoError("truncated checkpoint " + bin_path.string());
    const auto rank = get<std::uint32_t>(bin, bin_path);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(bin, bin_path);
    const auto offset = static_cast<long long>(bin.tellg());
    std::vector<double> data(shape_size(shape));
    if (!bin.read(reinterpret_cast<char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw IoError("truncated checkpoint " + bin_path.string());
    }

    std::string idx_name;
    std::size_t idx_rank = 0;
    if (!(idx >> idx_name >> idx_rank) || idx_name != name || idx_rank != rank) {
      throw IoError("checkpoint index disagrees at tensor '" + name + "'");
    }
    for (std::size_t d = 0; d < rank; ++d) {
      std::size_t dim = 0;
      if (!(idx >> dim) || dim != shape[d])
        throw IoError("checkpoint index disagrees on shape of '" + name + "'");
    }
    long long idx_offset = -1;
    if (!(idx >> idx_offset) || idx_offset != offset)
      throw IoError("checkpoint index disagrees on offset of '" + name + "'");
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace ftsched::ad
