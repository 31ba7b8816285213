#include "statetrack/precision.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace statetrack {

CastGrid CastGrid::uniform(double min, double max, double step) {
    require(std::isfinite(min) && std::isfinite(max) && std::isfinite(step),
            "CastGrid: bounds and step must be finite");
    require(max > min, "CastGrid: max must exceed min");
    require(step > 0.0, "CastGrid: step must be positive");
    CastGrid g;
    g.uniform_ = true;
    g.min_ = min;
    g.max_ = max;
    g.step_ = step;
    g.num_steps_ = static_cast<long long>(std::floor((max - min) / step + 1e-9));
    return g;
}

CastGrid CastGrid::explicit_values(std::vector<double> values) {
    require(!values.empty(), "CastGrid: explicit grid needs at least one value");
    for (size_t i = 0; i < values.size(); ++i) {
        require(std::isfinite(values[i]), "CastGrid: non-finite grid value");
        if (i > 0) require(values[i] > values[i - 1], "CastGrid: values must be strictly increasing");
    }
    CastGrid g;
    g.uniform_ = false;
    g.min_ = values.front();
    g.max_ = values.back();
    g.values_ = std::move(values);
    return g;
}

CastGrid CastGrid::default_demo() { return uniform(-8.0, 8.0, 0x1.0p-10); }

double CastGrid::cast(double x) const {
    require(!std::isnan(x), "cast: NaN input");
    if (uniform_) {
        if (x <= min_) return min_;
        const double top = min_ + step_ * static_cast<double>(num_steps_);
        if (x >= top) return top;
        // Nearest index with half-way points resolved downward (toward the
        // smaller grid value).
        double k = std::ceil((x - min_) / step_ - 0.5);
        if (k < 0.0) k = 0.0;
        if (k > static_cast<double>(num_steps_)) k = static_cast<double>(num_steps_);
        return min_ + step_ * k;
    }
    auto it = std::lower_bound(values_.begin(), values_.end(), x);
    if (it == values_.end()) return values_.back();
    if (it == values_.begin()) return values_.front();
    const double hi = *it, lo = *(it - 1);
    // Tie (equidistant) goes to the smaller value.
    return (x - lo <= hi - x) ? lo : hi;
}

double cast(const CastGrid& grid, double x) { return grid.cast(x); }

void cast_state_inplace(const CastGrid& grid, DenseMatrix& h) {
    double* p = h.data();
    const size_t count = static_cast<size_t>(h.rows()) * h.cols();
    for (size_t i = 0; i < count; ++i) p[i] = grid.cast(p[i]);
}

DenseMatrix cast_state(const CastGrid& grid, const DenseMatrix& h) {
    DenseMatrix out = h;
    cast_state_inplace(grid, out);
    return out;
}

CastGrid CastGrid::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("CastGrid: bad JSON: ") + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "uniform") {
        require(j.contains("min") && j.contains("max") && j.contains("step"),
                "CastGrid: uniform grid needs min/max/step");
        return uniform(j["min"].get<double>(), j["max"].get<double>(), j["step"].get<double>());
    }
    if (kind == "explicit") {
        require(j.contains("values"), "CastGrid: explicit grid needs values");
        return explicit_values(j["values"].get<std::vector<double>>());
    }
    throw ContractError("CastGrid: unknown kind '" + kind + "'");
}

std::string CastGrid::to_json_text() const {
    nlohmann::json j;
    if (uniform_) {
        j["kind"] = "uniform";
        j["min"] = min_;
        j["max"] = max_;
        j["step"] = step_;
    } else {
        j["kind"] = "explicit";
        j["values"] = values_;
    }
    return j.dump();
}

}  // namespace statetrack
