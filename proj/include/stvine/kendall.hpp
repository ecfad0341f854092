#pragma once

// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "stvine/error.hpp"

namespace stvine {

/// Kendall's tau-b of paired samples. Returns NaN when either margin is constant.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("kendall_tau: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) return std::nan("");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    std::int64_t n1 = 0, n3 = 0;
    {
        std::int64_t tx = 1, txy = 1;
        for (std::size_t i = 1; i < n; ++i) {
            const std::size_t a = order[i - 1], b = order[i];
            if (x[a] == x[b]) {
                ++tx;
                if (y[a] == y[b])
                    ++txy;
                else {
                    n3 += txy * (txy - 1) / 2;
                    txy = 1;
                }
            } else {
                n1 += tx * (tx - 1) / 2;
                n3 += txy * (txy - 1) / 2;
                tx = txy = 1;
            }
        }
        n1 += tx * (tx - 1) / 2;
        n3 += txy * (txy - 1) / 2;
    }

    // merge sort on y, counting exchanges
    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    std::int64_t swaps = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (ys[j] < ys[i]) {
                    buf[k++] = ys[j++];
                    swaps += static_cast<std::int64_t>(mid - i);
                } else {
                    buf[k++] = ys[i++];
                }
            }
            while (i < mid) buf[k++] = ys[i++];
            while (j < hi) buf[k++] = ys[j++];
        }
        std::swap(ys, buf);
    }

    std::int64_t n2 = 0;
    {
        std::int64_t ty = 1;
        for (std::size_t i = 1; i < n; ++i) {
            if (ys[i] == ys[i - 1])
                ++ty;
            else {
                n2 += ty * (ty - 1) / 2;
                ty = 1;
            }
        }
        n2 += ty * (ty - 1) / 2;
    }

    const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    const double s = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
    const double den = std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
    if (den == 0.0) return std::nan("");
    return std::clamp(s / den, -1.0, 1.0);
}

}  // namespace stvine
