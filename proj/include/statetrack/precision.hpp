#pragma once

#include <string>
#include <vector>

#include "statetrack/linalg.hpp"

namespace statetrack {

// Finite value grid used to emulate limited-precision state storage. cast maps
// a real to the nearest grid value, breaking ties toward the smaller value,
// and clamps outside the grid range. NaN input is an error.
class CastGrid {
 public:
    static CastGrid uniform(double min, double max, double step);
    static CastGrid explicit_values(std::vector<double> values);  // strictly increasing
    // Demo default: uniform(-8, 8, 2^-10).
    static CastGrid default_demo();

    static CastGrid from_json_text(const std::string& text);
    std::string to_json_text() const;

    double cast(double x) const;

    bool is_uniform() const { return uniform_; }
    double min_value() const { return min_; }
    double max_value() const { return max_; }
    double step() const { return step_; }
    // Uniform grids: largest k such that min + k*step <= max.
    long long num_steps() const { return num_steps_; }
    const std::vector<double>& values() const { return values_; }

 private:
    CastGrid() = default;
    bool uniform_ = true;
    double min_ = 0.0, max_ = 0.0, step_ = 1.0;
    long long num_steps_ = 0;        // uniform: largest k with min + k*step <= max
    std::vector<double> values_;     // explicit grids only
};

double cast(const CastGrid& grid, double x);

// Element-wise cast over a state matrix.
void cast_state_inplace(const CastGrid& grid, DenseMatrix& h);
DenseMatrix cast_state(const CastGrid& grid, const DenseMatrix& h);

}  // namespace statetrack
