#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace srender {

/// 64-byte aligned allocator; every buffer starts on the same alignment.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles. Activations are rank 3 (channels, rows,
/// cols); convolution weights are rank 4 (out, in, k, k).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);
  Tensor(std::vector<int> dims, std::vector<double> values);

  static Tensor chw(int channels, int rows, int cols, double fill = 0.0) {
    return Tensor({channels, rows, cols}, fill);
  }
  static Tensor scalar(double v) { return Tensor({1, 1, 1}, v); }

  const std::vector<int>& dims() const noexcept { return dims_; }
  int rank() const noexcept { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  int channels() const { return dim(0); }
  int rows() const { return dim(1); }
  int cols() const { return dim(2); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  Buffer& storage() noexcept { return data_; }
  const Buffer& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(int c, int r, int col) {
    return data_[(static_cast<std::size_t>(c) * dims_[1] + r) * dims_[2] + col];
  }
  double at(int c, int r, int col) const {
    return data_[(static_cast<std::size_t>(c) * dims_[1] + r) * dims_[2] + col];
  }

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  void fill(double v);
  Tensor& operator+=(const Tensor& other);

  std::string shape_string() const;

 private:
  std::vector<int> dims_;
  Buffer data_;
};

bool bit_identical(const Tensor& a, const Tensor& b) noexcept;

}  // namespace srender
