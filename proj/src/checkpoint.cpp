#include "hlpnn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hlpnn {

namespace {

constexpr char kMagic[6] = {'H', 'L', 'P', 'N', 'N', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void save_checkpoint(const std::string& path, const std::string& config_json, std::uint64_t seed,
                     const ParameterMap& params, const std::map<std::string, std::string>& aux) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, fnv1a64(config_json));
  write_pod<std::uint64_t>(out, seed);
  write_string(out, config_json);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(aux.size()));
  for (const auto& [name, blob] : aux) {
    write_string(out, name);
    write_string(out, blob);
  }
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    write_string(out, name);
    write_pod<std::int32_t>(out, t.rows());
    write_pod<std::int32_t>(out, t.cols());
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not an HLPNN1 file");
  Checkpoint c;
  c.config_hash = read_pod<std::uint64_t>(in);
  c.seed = read_pod<std::uint64_t>(in);
  c.config_json = read_string(in);
  if (fnv1a64(c.config_json) != c.config_hash)
    throw std::runtime_error("checkpoint: config hash mismatch in '" + path + "'");
  const auto n_aux = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_aux; ++i) {
    std::string name = read_string(in);
    c.aux[name] = read_string(in);
  }
  const auto n_params = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = read_string(in);
    Checkpoint::Param p;
    p.rows = read_pod<std::int32_t>(in);
    p.cols = read_pod<std::int32_t>(in);
    p.values.resize(static_cast<std::size_t>(p.rows) * p.cols);
    in.read(reinterpret_cast<char*>(p.values.data()),
            static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
    c.params[name] = std::move(p);
  }
  return c;
}

void restore_parameters(const Checkpoint& ckpt, ParameterMap& params) {
  if (ckpt.params.size() != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto& [name, t] : params) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end())
      throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    if (it->second.rows != t.rows() || it->second.cols != t.cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    t.data() = it->second.values;
  }
}

}  // namespace hlpnn
