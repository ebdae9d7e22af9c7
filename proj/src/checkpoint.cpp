#include "mreal/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mreal/config.hpp"
#include "mreal/error.hpp"

namespace mreal {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "mreal-checkpoint 1";

struct TensorEntry {
  std::string dtype;
  Shape shape;
  std::uint64_t offset = 0;
};

void put_u32_le(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_real(v[i]);
  }
  return s;
}

std::vector<double> split_reals(const std::string& key, const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
  return out;
}

Shape parse_shape(const std::string& s) {
  Shape shape;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) shape.push_back(static_cast<std::size_t>(parse_int("shape", item)));
  return shape;
}

class Writer {
 public:
  void meta(const std::string& key, const std::string& value) { manifest_ << "meta " << key << ' ' << value << '\n'; }

  void f32(const std::string& name, const Tensor<float>& t) {
    header(name, "f32", t.shape);
    for (float v : t.data) put_u32_le(payload_, std::bit_cast<std::uint32_t>(v));
  }

  void i32(const std::string& name, const std::vector<std::int32_t>& v) {
    header(name, "i32", {v.size()});
    for (auto x : v) put_u32_le(payload_, static_cast<std::uint32_t>(x));
  }

  void commit(const fs::path& dir) {
    fs::create_directories(dir);
    const auto bin_tmp = dir / "tensors.bin.tmp";
    const auto man_tmp = dir / "manifest.txt.tmp";
    {
      std::ofstream bin(bin_tmp, std::ios::binary);
      bin.write(payload_.data(), static_cast<std::streamsize>(payload_.size()));
      if (!bin) throw Error("failed writing " + bin_tmp.string());
    }
    {
      std::ofstream man(man_tmp);
      man << kMagic << '\n' << manifest_.str();
      if (!man) throw Error("failed writing " + man_tmp.string());
    }
    fs::rename(bin_tmp, dir / "tensors.bin");
    fs::rename(man_tmp, dir / "manifest.txt");
  }

 private:
  void header(const std::string& name, const char* dtype, const Shape& shape) {
    manifest_ << "tensor " << name << ' ' << dtype << ' ' << (shape.empty() ? "1" : shape_string(shape)) << ' '
              << payload_.size() << '\n';
  }

  std::ostringstream manifest_;
  std::string payload_;
};

class Reader {
 public:
  explicit Reader(const fs::path& dir) {
    std::ifstream man(dir / "manifest.txt");
    if (!man) throw Error("corrupt checkpoint: cannot open " + (dir / "manifest.txt").string());
    std::string line;
    if (!std::getline(man, line) || line != kMagic) throw Error("corrupt checkpoint: bad manifest header");
    while (std::getline(man, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string kind, key;
      ls >> kind >> key;
      if (kind == "meta") {
        std::string value;
        std::getline(ls, value);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        meta_[key] = value;
      } else if (kind == "tensor") {
        TensorEntry e;
        std::string shape;
        ls >> e.dtype >> shape >> e.offset;
        if (!ls) throw Error("corrupt checkpoint: bad tensor line for " + key);
        e.shape = parse_shape(shape);
        tensors_[key] = e;
      } else {
        throw Error("corrupt checkpoint: unknown manifest entry '" + kind + "'");
      }
    }
    std::ifstream bin(dir / "tensors.bin", std::ios::binary);
    if (!bin) throw Error("corrupt checkpoint: missing tensors.bin");
    payload_.assign(std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>());
  }

  const std::string& meta(const std::string& key) const {
    const auto it = meta_.find(key);
    if (it == meta_.end()) throw Error("corrupt checkpoint: missing meta '" + key + "'");
    return it->second;
  }

  KeyValues meta_with_prefix(const std::string& prefix) const {
    KeyValues kv;
    for (const auto& [k, v] : meta_)
      if (k.rfind(prefix, 0) == 0) kv[k.substr(prefix.size())] = v;
    return kv;
  }

  void f32(const std::string& name, Tensor<float>& t) const {
    const auto& e = entry(name, "f32");
    if (e.shape != t.shape)
      throw Error("corrupt checkpoint: " + name + " has shape [" + shape_string(e.shape) + "], expected [" +
                  shape_string(t.shape) + "]");
    const auto* p = bytes(e, t.size());
    for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = std::bit_cast<float>(get_u32_le(p + 4 * i));
  }

  std::vector<std::int32_t> i32(const std::string& name) const {
    const auto& e = entry(name, "i32");
    const std::size_t n = shape_size(e.shape);
    const auto* p = bytes(e, n);
    std::vector<std::int32_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::int32_t>(get_u32_le(p + 4 * i));
    return v;
  }

 private:
  const TensorEntry& entry(const std::string& name, const char* dtype) const {
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("corrupt checkpoint: missing tensor " + name);
    if (it->second.dtype != dtype) throw Error("corrupt checkpoint: " + name + " has dtype " + it->second.dtype);
    return it->second;
  }

  const unsigned char* bytes(const TensorEntry& e, std::size_t count) const {
    if (e.offset + 4 * count > payload_.size()) throw Error("corrupt checkpoint: payload truncated");
    return reinterpret_cast<const unsigned char*>(payload_.data()) + e.offset;
  }

  std::map<std::string, std::string> meta_;
  std::map<std::string, TensorEntry> tensors_;
  std::string payload_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  Writer w;
  w.meta("step", std::to_string(ckpt.state.step));
  w.meta("cursor", std::to_string(ckpt.state.cursor));
  w.meta("rng", ckpt.state.rng_state);
  w.meta("ema.decay", format_real(ckpt.state.ema.decay));
  for (const auto& [k, v] : arch_to_map(ckpt.arch)) w.meta("arch." + k, v);
  for (const auto& [k, v] : ckpt.config.to_map()) w.meta("config." + k, v);
  w.meta("stats.scheme", ckpt.stats.scheme == NormScheme::six_sigma ? "six_sigma" : "minmax_tanh");
  w.meta("stats.sigma", join_reals(ckpt.stats.sigma));
  w.meta("stats.min", join_reals(ckpt.stats.min));
  w.meta("stats.max", join_reals(ckpt.stats.max));

  auto& params = const_cast<ModelParams<float>&>(ckpt.state.params);
  auto& ema = const_cast<GeneratorParams<float>&>(ckpt.state.ema.shadow);
  auto& gacc = const_cast<GeneratorParams<float>&>(ckpt.state.gen_acc);
  auto& dacc = const_cast<DiscriminatorParams<float>&>(ckpt.state.disc_acc);
  for (auto& [name, t] : tensor_list(params.gen)) w.f32("param." + name, *t);
  for (auto& [name, t] : tensor_list(params.disc)) w.f32("param." + name, *t);
  for (auto& [name, t] : tensor_list(ema)) w.f32("ema." + name, *t);
  for (auto& [name, t] : tensor_list(gacc)) w.f32("acc." + name, *t);
  for (auto& [name, t] : tensor_list(dacc)) w.f32("acc." + name, *t);
  w.i32("order", ckpt.state.order);
  w.commit(dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const Reader r(dir);
  Checkpoint ckpt;
  const auto arch_rest = apply_arch(ckpt.arch, r.meta_with_prefix("arch."));
  if (!arch_rest.empty()) throw Error("corrupt checkpoint: unknown arch key " + arch_rest.begin()->first);
  const auto cfg_rest = ckpt.config.apply(r.meta_with_prefix("config."));
  if (!cfg_rest.empty()) throw Error("corrupt checkpoint: unknown config key " + cfg_rest.begin()->first);

  const std::string& scheme = r.meta("stats.scheme");
  if (scheme == "six_sigma") ckpt.stats.scheme = NormScheme::six_sigma;
  else if (scheme == "minmax_tanh") ckpt.stats.scheme = NormScheme::minmax_tanh;
  else throw Error("corrupt checkpoint: unknown normalization scheme " + scheme);
  ckpt.stats.sigma = split_reals("stats.sigma", r.meta("stats.sigma"));
  ckpt.stats.min = split_reals("stats.min", r.meta("stats.min"));
  ckpt.stats.max = split_reals("stats.max", r.meta("stats.max"));

  auto& st = ckpt.state;
  st.step = parse_int("step", r.meta("step"));
  st.cursor = parse_int("cursor", r.meta("cursor"));
  st.rng_state = r.meta("rng");
  st.params = zero_params(ckpt.arch);
  st.ema = EmaState<float>{st.params.gen, parse_real("ema.decay", r.meta("ema.decay"))};
  st.gen_acc = st.params.gen;
  st.disc_acc = st.params.disc;
  for (auto& [name, t] : tensor_list(st.params.gen)) r.f32("param." + name, *t);
  for (auto& [name, t] : tensor_list(st.params.disc)) r.f32("param." + name, *t);
  for (auto& [name, t] : tensor_list(st.ema.shadow)) r.f32("ema." + name, *t);
  for (auto& [name, t] : tensor_list(st.gen_acc)) r.f32("acc." + name, *t);
  for (auto& [name, t] : tensor_list(st.disc_acc)) r.f32("acc." + name, *t);
  st.order = r.i32("order");
  if (st.cursor < 0 || st.cursor > static_cast<std::int64_t>(st.order.size()))
    throw Error("corrupt checkpoint: cursor out of range");
  return ckpt;
}

}  // namespace mreal
