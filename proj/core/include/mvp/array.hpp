#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mvp {

using Shape = std::vector<int>;

// Number of elements; throws ShapeError on non-positive extents.
std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major array of binary64 values with value semantics.
class Array {
 public:
    Array() = default;
    Array(Shape shape, double fill);
    Array(Shape shape, std::vector<double> data);

    static Array zeros(Shape s) { return Array(std::move(s), 0.0); }
    static Array full(Shape s, double v) { return Array(std::move(s), v); }
    static Array scalar(double v) { return Array(Shape{1}, v); }
    static Array vec(std::vector<double> v);

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const;
    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Multi-index access, bounds-checked. Convenience for tests and setup
    // code; hot loops index flat.
    double& at(std::initializer_list<int> idx);
    double at(std::initializer_list<int> idx) const;

    void fill(double v);
    bool same_shape(const Array& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

 private:
    std::size_t flat_index(std::initializer_list<int> idx) const;

    Shape shape_;
    std::vector<double> data_;
};

}  // namespace mvp
