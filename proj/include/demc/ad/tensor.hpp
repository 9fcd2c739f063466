// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "demc/error.hpp"

namespace demc::ad {

  // Dimensions of a batch x channel x height x width tensor.
  struct Shape
  {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    constexpr std::size_t numel() const
    {
      return std::size_t(n) * std::size_t(c) * std::size_t(h) * std::size_t(w);
    }

    constexpr std::size_t planeSize() const { return std::size_t(h) * std::size_t(w); }

    bool operator==(const Shape&) const = default;

    std::string str() const
    {
      return std::to_string(n) + "x" + std::to_string(c) + "x" +
             std::to_string(h) + "x" + std::to_string(w);
    }
  };

  // Dense NCHW array, row-major. Value type; copies are deep.
  template<typename T>
  class Tensor
  {
  public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
      : shape_(checked(shape)), data_(shape.numel(), fill) {}

    Tensor(Shape shape, std::vector<T> data)
      : shape_(checked(shape)), data_(std::move(data))
    {
      if (data_.size() != shape_.numel())
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    T* ptr() { return data_.data(); }
    const T* ptr() const { return data_.data(); }

    std::size_t offset(int n, int c, int y, int x) const
    {
      return ((std::size_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    T& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
    T at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    // Contiguous h*w plane of channel c in batch item n.
    T* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
    const T* plane(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

    bool allFinite() const
    {
      return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    // Bitwise equality of shape and payload.
    bool identical(const Tensor& other) const
    {
      return shape_ == other.shape_ &&
             (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(T)) == 0);
    }

    template<typename U>
    Tensor<U> cast() const
    {
      std::vector<U> out(data_.size());
      std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
      return Tensor<U>(shape_, std::move(out));
    }

    // Channels [begin, begin+count) of every batch item.
    Tensor sliceChannels(int begin, int count) const
    {
      if (begin < 0 || count < 0 || begin + count > shape_.c)
        throw ShapeError("channel slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_.str());
      Tensor out({shape_.n, count, shape_.h, shape_.w});
      const std::size_t plane = shape_.planeSize();
      for (int n = 0; n < shape_.n; ++n)
        std::copy_n(this->plane(n, begin), plane * count, out.plane(n, 0));
      return out;
    }

    // Batch item n as a 1-item tensor.
    Tensor item(int n) const
    {
      Tensor out({1, shape_.c, shape_.h, shape_.w});
      std::copy_n(plane(n, 0), out.size(), out.ptr());
      return out;
    }

  private:
    static Shape checked(Shape s)
    {
      if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
        throw ShapeError("negative tensor dimension in " + s.str());
      return s;
    }

    Shape shape_;
    std::vector<T> data_;
  };

  // Stacks equally shaped tensors along the batch axis.
  template<typename T>
  Tensor<T> stackBatch(std::span<const Tensor<T>> items)
  {
    if (items.empty())
      throw ShapeError("cannot stack an empty batch");
    Shape s = items.front().shape();
    const int per = s.n;
    for (const auto& t : items)
      if (t.shape() != s)
        throw ShapeError("batch item shape " + t.shape().str() + " differs from " + s.str());
    s.n = per * int(items.size());
    Tensor<T> out(s);
    std::size_t pos = 0;
    for (const auto& t : items)
    {
      std::copy(t.data().begin(), t.data().end(), out.ptr() + pos);
      pos += t.size();
    }
    return out;
  }

} // namespace demc::ad
