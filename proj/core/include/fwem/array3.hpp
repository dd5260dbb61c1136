#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace fwem {

/// Extents of a 3D array stored x-fastest.
struct Dims {
  int n1 = 0;
  int n2 = 0;
  int n3 = 0;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) *
           static_cast<std::size_t>(n3);
  }
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(n1) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(n2) * static_cast<std::size_t>(k));
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

template <class T>
class Array3 {
 public:
  Array3() = default;
  explicit Array3(Dims dims, T value = T{}) : dims_(dims), data_(dims.size(), value) {}

  T& operator()(int i, int j, int k) { return data_[dims_.index(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
  T& operator[](std::size_t idx) { return data_[idx]; }
  const T& operator[](std::size_t idx) const { return data_[idx]; }

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] T* data() { return data_.data(); }
  [[nodiscard]] const T* data() const { return data_.data(); }
  [[nodiscard]] std::span<T> flat() { return data_; }
  [[nodiscard]] std::span<const T> flat() const { return data_; }
  [[nodiscard]] std::vector<T>& vec() { return data_; }
  [[nodiscard]] const std::vector<T>& vec() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

 private:
  Dims dims_{};
  std::vector<T> data_;
};

}  // namespace fwem
