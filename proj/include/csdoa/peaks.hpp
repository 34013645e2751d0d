#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <numeric>
#include <span>
#include <vector>

namespace csdoa {

struct PeakSelection {
    std::vector<std::size_t> indices; ///< accepted peaks, strongest first
    bool short_list = false;          ///< fewer than the requested count were found
};

/// Greedy separated-peak selection. Candidates are local maxima (>= both
/// neighbours), visited in descending value with ties toward the lower index;
/// a candidate is accepted when it is at least min_separation bins from every
/// accepted peak. With positive_only, zero entries are never candidates.
inline PeakSelection select_peaks(std::span<const double> values, std::size_t count,
                                  std::size_t min_separation, bool positive_only = false)
{
    PeakSelection out;
    const std::size_t n = values.size();
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        const bool left_ok = i == 0 || values[i] >= values[i - 1];
        const bool right_ok = i + 1 == n || values[i] >= values[i + 1];
        if (left_ok && right_ok && (!positive_only || values[i] > 0.0))
            candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    for (std::size_t c : candidates) {
        if (out.indices.size() == count)
            break;
        const bool separated = std::all_of(out.indices.begin(), out.indices.end(), [&](std::size_t p) {
            const auto d = c > p ? c - p : p - c;
            return d >= min_separation;
        });
        if (separated)
            out.indices.push_back(c);
    }
    out.short_list = out.indices.size() < count;
    return out;
}

struct PeakValue {
    double value = 0.0;
    std::size_t index = 0;
    bool fallback = false; ///< fewer than k separated peaks; value is the k-th largest entry
};

/// Value of the k-th (1-based) separated peak of r.
inline PeakValue kth_peak(std::span<const double> r, std::size_t k, std::size_t min_separation)
{
    if (k == 0 || r.empty())
        return {};
    const auto sel = select_peaks(r, k, min_separation);
    if (sel.indices.size() >= k) {
        const auto idx = sel.indices[k - 1];
        return {r[idx], idx, false};
    }
    std::vector<std::size_t> order(r.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
    const auto idx = order[std::min(k, r.size()) - 1];
    return {r[idx], idx, true};
}

/// Default separation of 4 bins at 0.5 degree spacing, scaled to the grid step.
inline std::size_t default_min_separation(double grid_step_deg)
{
    if (!(grid_step_deg > 0.0))
        return 4;
    const auto bins = static_cast<long>(std::lround(4.0 * 0.5 / grid_step_deg));
    return static_cast<std::size_t>(std::max(1L, bins));
}

} // namespace csdoa
