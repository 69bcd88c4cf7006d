#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace roundbuy::ad {

// Dense row-major 2-D array of doubles. Vectors are stored as (n x 1).
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor column(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(n, 1, std::move(values));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Named trainable parameters. Ordered by name so that iteration, optimizer
// updates and serialization are deterministic.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  void add(const std::string& name, Tensor value);
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  const Tensor* find(std::string_view name) const;
  Tensor* find(std::string_view name);
  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }
  // Returns false when absent.
  bool erase(std::string_view name);
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  // Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  bool same_layout(const ParamStore& other) const;

  bool operator==(const ParamStore&) const = default;

 private:
  Map params_;
};

// theta + epsilon * (theta_pp - theta), elementwise; exact at epsilon 0 and 1.
// Stores must share layout.
ParamStore interpolate_params(const ParamStore& theta, const ParamStore& theta_pp, double epsilon);

// Checkpoint container: a text header (format version, metadata, parameter
// names, dtype and shapes) followed by the little-endian float64 payload of
// every parameter in header order.
struct Checkpoint {
  ParamStore params;
  std::map<std::string, std::string> metadata;  // single-line values
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace roundbuy::ad
