#include "mvp/array.hpp"

#include <cmath>

#include "mvp/errors.hpp"

namespace mvp {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("shape extent must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size())
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
}

Array Array::vec(std::vector<double> v) {
    Shape s{static_cast<int>(v.size())};
    return Array(std::move(s), std::move(v));
}

int Array::dim(int i) const {
    if (i < 0) i += rank();
    if (i < 0 || i >= rank()) throw ShapeError("axis " + std::to_string(i) + " out of range for " + shape_str(shape_));
    return shape_[static_cast<std::size_t>(i)];
}

std::size_t Array::flat_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw ShapeError("index rank " + std::to_string(idx.size()) + " vs array rank " + std::to_string(rank()));
    std::size_t flat = 0;
    int axis = 0;
    for (int i : idx) {
        const int extent = shape_[static_cast<std::size_t>(axis)];
        if (i < 0 || i >= extent)
            throw ShapeError("index " + std::to_string(i) + " out of bounds for axis " + std::to_string(axis) +
                             " of " + shape_str(shape_));
        flat = flat * static_cast<std::size_t>(extent) + static_cast<std::size_t>(i);
        ++axis;
    }
    return flat;
}

double& Array::at(std::initializer_list<int> idx) { return data_[flat_index(idx)]; }
double Array::at(std::initializer_list<int> idx) const { return data_[flat_index(idx)]; }

void Array::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Array::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace mvp
