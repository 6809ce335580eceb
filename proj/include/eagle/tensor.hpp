#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eagle {

struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense row-major tensor. No views or strides; reshape copies.
template <typename T>
struct basic_tensor {
    std::vector<int64_t> shape;
    std::vector<T> data;

    basic_tensor() = default;
    explicit basic_tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }
    basic_tensor(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw shape_error("tensor data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(shape));
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 1) throw shape_error("nonpositive dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
    // rows when viewed as a 2-d matrix [numel/last_dim, last_dim]
    int64_t rows2d() const { return last_dim() == 0 ? 0 : numel() / last_dim(); }

    T& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    T* row(int64_t r) { return data.data() + r * last_dim(); }
    const T* row(int64_t r) const { return data.data() + r * last_dim(); }

    bool same_shape(const basic_tensor& o) const { return shape == o.shape; }
};

using tensor = basic_tensor<float>;
using tensord = basic_tensor<double>;

template <typename T>
basic_tensor<T> full(std::vector<int64_t> shape, T v) {
    basic_tensor<T> t(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

template <typename T, typename U>
basic_tensor<T> cast_tensor(const basic_tensor<U>& src) {
    basic_tensor<T> out(src.shape);
    for (size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<T>(src.data[i]);
    return out;
}

inline void require_same_shape(const std::vector<int64_t>& a, const std::vector<int64_t>& b,
                               const char* what) {
    if (a != b)
        throw shape_error(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace eagle
