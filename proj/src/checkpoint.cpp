#include "lut/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lut/error.hpp"

namespace lut {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'U', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > (1u << 28)) throw FormatError("checkpoint string length implausible");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw FormatError("checkpoint truncated");
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put_string(os, k);
    put_string(os, v);
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_string(os, name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_meta = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_string(is);
    ckpt.metadata[k] = get_string(is);
  }
  const auto n_tensors = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = get_string(is);
    const auto ndim = get<std::uint32_t>(is);
    if (ndim > 8) throw FormatError("tensor rank implausible in " + path.string());
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is));
    std::vector<double> values(shape_size(shape));
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw FormatError("checkpoint truncated in tensor " + name);
    ckpt.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return ckpt;
}

Checkpoint snapshot(const nn::ParameterList& params, std::map<std::string, std::string> meta) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(meta);
  ckpt.tensors.reserve(params.size());
  for (const auto& p : params) ckpt.tensors.push_back({p.name, p.tensor.clone()});
  return ckpt;
}

void restore(nn::ParameterList& params, const Checkpoint& ckpt) {
  for (auto& p : params) {
    const Tensor* src = ckpt.find(p.name);
    if (src == nullptr) throw FormatError("checkpoint lacks parameter " + p.name);
    if (src->shape() != p.tensor.shape()) {
      throw DimensionError("parameter " + p.name + " has shape " +
                           shape_string(p.tensor.shape()) + " but checkpoint holds " +
                           shape_string(src->shape()));
    }
    std::copy(src->data().begin(), src->data().end(), p.tensor.mutable_values().begin());
  }
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts) {
  if (ckpts.empty()) throw UsageError("average_checkpoints needs at least one checkpoint");
  Checkpoint out;
  out.metadata = ckpts.back().metadata;
  const auto& first = ckpts.front();
  for (const auto& [name, t] : first.tensors) {
    std::vector<double> acc(t.size(), 0.0);
    for (const auto& c : ckpts) {
      const Tensor* other = c.find(name);
      if (other == nullptr || other->shape() != t.shape()) {
        throw DimensionError("checkpoints disagree on parameter " + name);
      }
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += other->at(i);
    }
    const double inv = 1.0 / static_cast<double>(ckpts.size());
    for (double& v : acc) v *= inv;
    out.tensors.push_back({name, Tensor(t.shape(), std::move(acc))});
  }
  for (const auto& c : ckpts) {
    if (c.tensors.size() != first.tensors.size()) {
      throw DimensionError("checkpoints hold different parameter sets");
    }
  }
  return out;
}

Checkpoint average_checkpoints(const std::vector<std::filesystem::path>& paths) {
  std::vector<Checkpoint> ckpts;
  ckpts.reserve(paths.size());
  for (const auto& p : paths) ckpts.push_back(load_checkpoint(p));
  return average_checkpoints(ckpts);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t checkpoint_hash(const Checkpoint& ckpt) {
  std::string buf;
  for (const auto& [name, t] : ckpt.tensors) {
    buf += name;
    buf += shape_string(t.shape());
    buf.append(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(double));
  }
  return fnv1a64(buf);
}

}  // namespace lut
