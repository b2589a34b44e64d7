#include "dpreg/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dpreg {

namespace {
constexpr char kMagic[8] = {'D', 'P', 'T', 'E', 'N', 'S', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("tensor container truncated");
  return v;
}
}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, t.rank());
    for (auto d : t.shape()) write_u64(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing tensor container '" + path + "'");
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("'" + path + "' is not a tensor container");
  const std::uint64_t count = read_u64(is);
  std::map<std::string, Tensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t rank = read_u64(is);
    Shape shape(rank);
    for (auto& d : shape) d = read_u64(is);
    std::vector<double> data(shape_size(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("tensor container truncated");
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace dpreg
