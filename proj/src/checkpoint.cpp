#include "simvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "simvae/errors.hpp"

namespace simvae {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "SIMVAE1\n";

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view rest() const { return bytes_.substr(pos_); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint: truncated while reading ") + what);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

void Checkpoint::put(std::string name, Tensor value) {
  for (auto& t : tensors)
    if (t.name == name) {
      t.value = std::move(value);
      return;
    }
  tensors.push_back({std::move(name), std::move(value)});
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic);
  for (const auto& [name, value] : ckpt.tensors) {
    if (name.empty()) throw FormatError("checkpoint: empty tensor name");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (auto d : value.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max())
        throw FormatError("checkpoint: dimension too large in '" + name + "'");
      put_u32(out, static_cast<std::uint32_t>(d));
    }
    const auto* raw = reinterpret_cast<const char*>(value.data().data());
    out.append(raw, value.size() * sizeof(double));
  }
  put_u32(out, 0);
  out += ckpt.metadata.dump();
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("checkpoint: bad magic");
  Reader in(bytes.substr(kMagic.size()));
  Checkpoint ckpt;
  for (;;) {
    const std::uint32_t name_len = in.u32();
    if (name_len == 0) break;
    std::string name(in.take(name_len, "name"));
    const std::uint32_t rank = in.u32();
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    std::size_t count = 1;
    for (auto d : shape) {
      if (d == 0) throw FormatError("checkpoint: zero dimension in '" + name + "'");
      count *= d;
    }
    const auto raw = in.take(count * sizeof(double), "tensor data");
    std::vector<double> data(count);
    std::memcpy(data.data(), raw.data(), raw.size());
    ckpt.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  const auto meta = in.rest();
  if (!meta.empty()) {
    try {
      ckpt.metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void export_parameters(const ParameterSet& params, Checkpoint& ckpt) {
  for (const auto& p : params) ckpt.put(p.name, p.value);
}

void import_parameters(ParameterSet& params, const Checkpoint& ckpt) {
  for (auto& p : params) {
    const Tensor* t = ckpt.find(p.name);
    if (t == nullptr) throw FormatError("checkpoint: missing parameter '" + p.name + "'");
    if (t->shape() != p.value.shape())
      throw FormatError("checkpoint: parameter '" + p.name + "' has shape " +
                        shape_string(t->shape()) + ", model expects " +
                        shape_string(p.value.shape()));
    p.value = *t;
  }
}

void export_adam(const Adam& adam, const ParameterSet& params, Checkpoint& ckpt) {
  const auto& m = adam.first_moments();
  const auto& v = adam.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    ckpt.put("adam.m/" + params[i].name, m[i]);
    ckpt.put("adam.v/" + params[i].name, v[i]);
  }
  ckpt.metadata["adam_t"] = adam.steps();
}

void import_adam(Adam& adam, const ParameterSet& params, const Checkpoint& ckpt) {
  const std::uint64_t t = ckpt.metadata.value("adam_t", std::uint64_t{0});
  if (t == 0) {
    adam.restore(0, {}, {});
    return;
  }
  std::vector<Tensor> m, v;
  for (const auto& p : params) {
    const Tensor* mt = ckpt.find("adam.m/" + p.name);
    const Tensor* vt = ckpt.find("adam.v/" + p.name);
    if (mt == nullptr || vt == nullptr)
      throw FormatError("checkpoint: missing optimizer state for '" + p.name + "'");
    m.push_back(*mt);
    v.push_back(*vt);
  }
  adam.restore(t, std::move(m), std::move(v));
}

}  // namespace simvae
