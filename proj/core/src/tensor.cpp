#include "roundbuy/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "roundbuy/error.hpp"

namespace roundbuy::ad {

namespace {
constexpr const char* kMagic = "ROUNDBUY-CHECKPOINT";
constexpr int kFormatVersion = 1;

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double get_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw Error(Errc::CheckpointFormat, "truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}
}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_)
    throw Error(Errc::ShapeMismatch, "tensor values do not match shape " + std::to_string(rows_) + "x" +
                                         std::to_string(cols_));
}

void ParamStore::add(const std::string& name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second)
    throw Error(Errc::DuplicateId, "parameter '" + name + "' already exists");
}

Tensor& ParamStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(Errc::MismatchedStores, "no parameter '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(Errc::MismatchedStores, "no parameter '" + std::string(name) + "'");
  return it->second;
}

const Tensor* ParamStore::find(std::string_view name) const {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : &it->second;
}

Tensor* ParamStore::find(std::string_view name) {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : &it->second;
}

bool ParamStore::erase(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) return false;
  params_.erase(it);
  return true;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, Tensor(t.rows(), t.cols()));
  return out;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b)
    if (a->first != b->first || !a->second.same_shape(b->second)) return false;
  return true;
}

ParamStore interpolate_params(const ParamStore& theta, const ParamStore& theta_pp, double epsilon) {
  if (!theta.same_layout(theta_pp))
    throw Error(Errc::MismatchedStores, "interpolation requires identical parameter names and shapes");
  ParamStore out = theta;
  for (auto& [name, t] : out) {
    const Tensor& target = theta_pp.at(name);
    // (1 - e) theta + e theta_pp rather than theta + e (theta_pp - theta): both
    // endpoints are then reproduced exactly.
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - epsilon) * t[i] + epsilon * target[i];
  }
  return out;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  for (const auto& [key, value] : ckpt.metadata) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
      throw Error(Errc::CheckpointFormat, "metadata key/value must be single-line; key '" + key + "'");
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& [name, t] : ckpt.params) {
    if (name.find_first_of(" \n") != std::string::npos)
      throw Error(Errc::CheckpointFormat, "parameter name contains whitespace: '" + name + "'");
    out << "param " << name << " f64 " << t.rows() << ' ' << t.cols() << '\n';
  }
  out << "payload\n";
  for (const auto& [name, t] : ckpt.params)
    for (double v : t.values()) put_le(out, v);
  if (!out) throw Error(Errc::Io, "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::CheckpointFormat, "empty checkpoint");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kMagic) throw Error(Errc::CheckpointFormat, "bad magic");
    if (version != kFormatVersion)
      throw Error(Errc::CheckpointFormat, "unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  struct Entry {
    std::string name;
    std::size_t rows, cols;
  };
  std::vector<Entry> entries;
  while (true) {
    if (!std::getline(in, line)) throw Error(Errc::CheckpointFormat, "header not terminated");
    if (line == "payload") break;
    if (line.rfind("meta ", 0) == 0) {
      const auto rest = line.substr(5);
      const auto sp = rest.find(' ');
      if (sp == std::string::npos) throw Error(Errc::CheckpointFormat, "bad meta line");
      ckpt.metadata[rest.substr(0, sp)] = rest.substr(sp + 1);
    } else if (line.rfind("param ", 0) == 0) {
      std::istringstream ps(line.substr(6));
      Entry e;
      std::string dtype;
      if (!(ps >> e.name >> dtype >> e.rows >> e.cols) || dtype != "f64")
        throw Error(Errc::CheckpointFormat, "bad param line: " + line);
      entries.push_back(std::move(e));
    } else {
      throw Error(Errc::CheckpointFormat, "unexpected header line: " + line);
    }
  }
  for (const auto& e : entries) {
    Tensor t(e.rows, e.cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_le(in);
    ckpt.params.add(e.name, std::move(t));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return read_checkpoint(in);
}

}  // namespace roundbuy::ad
