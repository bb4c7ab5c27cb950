#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dift/core/errors.hpp"

namespace dift {

/// Dense channel-major (C x H x W) array.
template <typename T>
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int channels, int height, int width, T fill = T{})
        : channels_(channels), height_(height), width_(width) {
        if (channels < 1 || height < 1 || width < 1) {
            throw ValidationError("tensor dimensions must be positive");
        }
        data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
    }
    Tensor3(int channels, int height, int width, std::vector<T> data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        if (channels < 1 || height < 1 || width < 1) {
            throw ValidationError("tensor dimensions must be positive");
        }
        if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
            throw ValidationError("tensor data size does not match its shape");
        }
    }

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }

    bool same_shape(const Tensor3& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }
    T& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
    const T& operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    const std::vector<T>& storage() const { return data_; }

    bool operator==(const Tensor3&) const = default;

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

}  // namespace dift
