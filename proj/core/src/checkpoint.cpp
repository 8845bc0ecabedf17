#include "amt/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace amt::nn {

namespace {

constexpr char kMagic[8] = {'A', 'M', 'T', 'C', 'K', 'P', 'T', '\x01'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), tmp_(path + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw NumericError("checkpoint: cannot open " + tmp_ + " for writing");
  }
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void str(const std::string& s) {
    pod<uint32_t>(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void commit() {
    out_.flush();
    if (!out_) throw NumericError("checkpoint: write failed for " + tmp_);
    out_.close();
    if (std::rename(tmp_.c_str(), path_.c_str()) != 0)
      throw NumericError("checkpoint: rename failed for " + path_);
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw NumericError("checkpoint: cannot open " + path);
  }
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw NumericError("checkpoint: truncated file");
    return v;
  }
  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw NumericError("checkpoint: truncated file");
  }
  std::string str() {
    const uint32_t n = pod<uint32_t>();
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }

 private:
  std::ifstream in_;
};

void read_header(Reader& r, CheckpointInfo& info) {
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw NumericError("checkpoint: bad magic");
  const uint32_t version = r.pod<uint32_t>();
  if (version != kVersion) throw NumericError("checkpoint: unsupported version");
  info.scalar_bytes = r.pod<uint8_t>();
  if (info.scalar_bytes != 4 && info.scalar_bytes != 8)
    throw NumericError("checkpoint: bad scalar width");
  info.config_text = r.str();
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::string& path) {
  Reader r(path);
  CheckpointInfo info;
  read_header(r, info);
  return info;
}

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const AdamW<S>* optimizer, const std::string& config_text) {
  Writer w(path);
  w.bytes(kMagic, 8);
  w.pod<uint32_t>(kVersion);
  w.pod<uint8_t>(sizeof(S));
  w.str(config_text);
  w.pod<uint64_t>(params.count());
  for (const auto& p : params.all()) {
    w.str(p->name);
    w.pod<uint8_t>(static_cast<uint8_t>(p->value.rank()));
    for (int64_t d : p->value.shape()) w.pod<uint64_t>(static_cast<uint64_t>(d));
    w.bytes(p->value.data(), sizeof(S) * static_cast<size_t>(p->value.size()));
  }
  w.pod<uint8_t>(optimizer ? 1 : 0);
  if (optimizer) {
    auto* opt = const_cast<AdamW<S>*>(optimizer);
    opt->ensure_state(params);
    w.pod<uint64_t>(static_cast<uint64_t>(opt->step_count()));
    w.pod<double>(opt->config().lr);
    w.pod<double>(opt->config().weight_decay);
    w.pod<double>(opt->config().beta1);
    w.pod<double>(opt->config().beta2);
    w.pod<double>(opt->config().eps);
    for (size_t i = 0; i < params.count(); ++i) {
      const Tensor<S>& m = opt->first_moments()[i];
      const Tensor<S>& v = opt->second_moments()[i];
      w.bytes(m.data(), sizeof(S) * static_cast<size_t>(m.size()));
      w.bytes(v.data(), sizeof(S) * static_cast<size_t>(v.size()));
    }
  }
  w.commit();
}

template <typename S>
std::string load_checkpoint(const std::string& path, ParamStore<S>& params, AdamW<S>* optimizer) {
  Reader r(path);
  CheckpointInfo info;
  read_header(r, info);
  if (info.scalar_bytes != sizeof(S))
    throw NumericError("checkpoint: scalar width mismatch (file " +
                       std::to_string(info.scalar_bytes * 8) + "-bit)");
  const uint64_t n = r.pod<uint64_t>();
  if (n != params.count()) throw NumericError("checkpoint: parameter count mismatch");
  for (const auto& p : params.all()) {
    const std::string name = r.str();
    if (name != p->name) throw NumericError("checkpoint: parameter order mismatch at " + name);
    const uint8_t rank = r.pod<uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int64_t>(r.pod<uint64_t>());
    if (shape != p->value.shape())
      throw NumericError("checkpoint: shape mismatch for " + name);
    r.bytes(p->value.data(), sizeof(S) * static_cast<size_t>(p->value.size()));
  }
  const uint8_t has_opt = r.pod<uint8_t>();
  if (optimizer) {
    if (!has_opt) throw NumericError("checkpoint: optimizer state requested but absent");
    optimizer->ensure_state(params);
    optimizer->set_step_count(static_cast<int64_t>(r.pod<uint64_t>()));
    optimizer->config().lr = r.pod<double>();
    optimizer->config().weight_decay = r.pod<double>();
    optimizer->config().beta1 = r.pod<double>();
    optimizer->config().beta2 = r.pod<double>();
    optimizer->config().eps = r.pod<double>();
    for (size_t i = 0; i < params.count(); ++i) {
      Tensor<S>& m = optimizer->first_moments()[i];
      Tensor<S>& v = optimizer->second_moments()[i];
      r.bytes(m.data(), sizeof(S) * static_cast<size_t>(m.size()));
      r.bytes(v.data(), sizeof(S) * static_cast<size_t>(v.size()));
    }
  }
  return info.config_text;
}

template void save_checkpoint<float>(const std::string&, const ParamStore<float>&,
                                     const AdamW<float>*, const std::string&);
template void save_checkpoint<double>(const std::string&, const ParamStore<double>&,
                                      const AdamW<double>*, const std::string&);
template std::string load_checkpoint<float>(const std::string&, ParamStore<float>&, AdamW<float>*);
template std::string load_checkpoint<double>(const std::string&, ParamStore<double>&,
                                             AdamW<double>*);

}  // namespace amt::nn
