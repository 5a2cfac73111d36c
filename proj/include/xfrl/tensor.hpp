#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace xfrl {

// Dense row-major tensor of doubles. Shape is dynamic; ops validate ranks.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    std::size_t size() const { return v.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    std::size_t rank() const { return shape.size(); }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    void zero();
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Trainable tensor plus its gradient accumulator and update policy.
struct Parameter {
    Tensor value;
    Tensor grad;
    bool trainable = true;
    double lr_multiplier = 1.0;

    Parameter() = default;
    explicit Parameter(std::vector<std::size_t> s) : value(s), grad(std::move(s)) {}
};

}  // namespace xfrl
