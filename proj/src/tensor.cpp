#include "xfrl/tensor.hpp"

#include <algorithm>

#include "xfrl/error.hpp"

namespace xfrl {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    for (std::size_t d : shape)
        if (d == 0) throw shape_error("Tensor: zero-sized dimension in " + shape_str(shape));
    v.assign(shape_size(shape), 0.0);
}

void Tensor::zero() {
    std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace xfrl
