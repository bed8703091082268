#include "rmfn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rmfn/error.hpp"
#include "rmfn/rng.hpp"

namespace rmfn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'M', 'F', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void doubles(double* dst, std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw_format(std::string("checkpoint truncated in ") + what);
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > bytes_.size() - pos_) throw_format(std::string("checkpoint truncated in ") + what);
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const RmfnModel& model) {
  const std::string config = serialize_config(model.config());
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, fnv1a64(config));
  put<std::uint64_t>(out, config.size());
  out += config;

  std::uint64_t count = 0;
  model.params().for_each([&](const std::string&, const ParamSlot&) { ++count; });
  put<std::uint64_t>(out, count);
  model.params().for_each([&](const std::string& name, const ParamSlot& slot) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(slot.value.rank()));
    for (auto e : slot.value.shape()) put<std::uint64_t>(out, e);
    out.append(reinterpret_cast<const char*>(slot.value.raw()), slot.value.size() * sizeof(double));
  });
  return out;
}

RmfnModel decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) throw_format("not an RMFN checkpoint");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw_format("unsupported checkpoint version " + std::to_string(version));
  const auto digest = r.get<std::uint64_t>("config digest");
  const auto config_len = r.get<std::uint64_t>("config length");
  const std::string config_text = r.str(config_len, "config");
  if (fnv1a64(config_text) != digest) throw_format("checkpoint config digest mismatch");
  RmfnConfig config = parse_config(config_text);

  ParamStore store;
  std::map<std::string, std::pair<Tensor, Tensor>> layers;
  const auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.get<std::uint32_t>("name length"), "name");
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw_format("tensor " + name + " has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) {
      e = r.get<std::uint64_t>("extents");
      if (e == 0 || e > (std::uint64_t{1} << 40)) throw_format("tensor " + name + " has a bad extent");
    }
    Tensor value(shape);
    r.doubles(value.raw(), value.size(), name.c_str());

    const auto dot = name.rfind('.');
    if (dot == std::string::npos) throw_format("bad tensor name '" + name + "'");
    const std::string layer = name.substr(0, dot), which = name.substr(dot + 1);
    auto& entry = layers[layer];
    if (which == "weight")
      entry.first = std::move(value);
    else if (which == "bias")
      entry.second = std::move(value);
    else
      throw_format("bad tensor name '" + name + "'");
  }
  if (!r.done()) throw_format("trailing bytes after checkpoint");
  for (auto& [layer, wb] : layers) {
    if (wb.first.empty() || wb.second.empty()) throw_format("layer " + layer + " lacks weight or bias");
    store.add(layer, std::move(wb.first), std::move(wb.second));
  }
  return RmfnModel(std::move(config), std::move(store));
}

void save_checkpoint(const RmfnModel& model, const std::string& path) {
  const std::string bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_io("short write to checkpoint " + path);
}

RmfnModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace rmfn
