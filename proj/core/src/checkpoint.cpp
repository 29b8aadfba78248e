#include "uforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "uforge/errors.hpp"

namespace uforge::nn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

constexpr char kMagic[4] = {'U', 'F', 'C', 'K'};

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError(std::string("checkpoint: truncated while reading ") + what);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const MlpArchitecture& arch, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open for writing: " + path.string());

  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(arch.activation));
  write_pod<std::uint64_t>(os, arch.seed);
  write_pod<std::uint64_t>(os, arch.layer_widths.size());
  for (std::size_t w : arch.layer_widths) write_pod<std::uint64_t>(os, w);

  write_pod<std::uint64_t>(os, params.entry_count());
  for (const auto& e : params.entries()) {
    write_pod<std::uint64_t>(os, e.name.size());
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<std::uint64_t>(os, e.tensor.rows());
    write_pod<std::uint64_t>(os, e.tensor.cols());
    os.write(reinterpret_cast<const char*>(e.tensor.values().data()),
             static_cast<std::streamsize>(e.tensor.size() * sizeof(double)));
  }
  if (!os) throw IoError("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path.string());

  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ck;
  const auto act = read_pod<std::uint32_t>(is, "activation");
  if (act > 1) throw IoError("checkpoint: unknown activation id " + std::to_string(act));
  ck.arch.activation = static_cast<Activation>(act);
  ck.arch.seed = read_pod<std::uint64_t>(is, "seed");
  const auto width_count = read_pod<std::uint64_t>(is, "width count");
  for (std::uint64_t i = 0; i < width_count; ++i) {
    ck.arch.layer_widths.push_back(read_pod<std::uint64_t>(is, "width"));
  }
  ck.arch.validate();

  const auto tensor_count = read_pod<std::uint64_t>(is, "tensor count");
  for (std::uint64_t t = 0; t < tensor_count; ++t) {
    const auto name_len = read_pod<std::uint64_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!is) throw IoError("checkpoint: truncated tensor name");
    const auto rows = read_pod<std::uint64_t>(is, "rows");
    const auto cols = read_pod<std::uint64_t>(is, "cols");
    Tensor2D tensor(rows, cols);
    is.read(reinterpret_cast<char*>(tensor.values().data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated tensor payload for '" + name + "'");
    ck.params.add(std::move(name), std::move(tensor));
  }
  return ck;
}

}  // namespace uforge::nn
