#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace stvine {

inline constexpr double kEarthRadiusKm = 6371.0;

struct Station {
    std::string id;
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const Station&, const Station&) = default;
};

/// Great-circle distance in km.
inline double haversine_km(double lon1, double lat1, double lon2, double lat2) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * rad, dlon = (lon2 - lon1) * rad;
    const double s = std::sin(0.5 * dlat), c = std::sin(0.5 * dlon);
    const double a = s * s + std::cos(lat1 * rad) * std::cos(lat2 * rad) * c * c;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

inline double distance_km(const Station& a, const Station& b) { return haversine_km(a.lon, a.lat, b.lon, b.lat); }

/// Symmetric S x S distance matrix, row-major.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(const std::vector<Station>& st) : n_(st.size()), d_(n_ * n_, 0.0) {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) d_[i * n_ + j] = d_[j * n_ + i] = distance_km(st[i], st[j]);
    }
    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
    double max() const {
        double m = 0.0;
        for (double v : d_) m = std::max(m, v);
        return m;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> d_;
};

/// Planar point at (x, y) km from a reference longitude/latitude, for
/// building synthetic layouts.
inline Station station_at_km(std::string id, double x_km, double y_km, double lon0 = 127.0, double lat0 = 37.0) {
    constexpr double deg = 180.0 / std::numbers::pi;
    const double lat = lat0 + y_km / kEarthRadiusKm * deg;
    const double lon = lon0 + x_km / (kEarthRadiusKm * std::cos(lat0 / deg)) * deg;
    return {std::move(id), lon, lat};
}

}  // namespace stvine
