#pragma once

#include <cstddef>
#include <vector>

namespace fgfpca {

/// Bin system over grid indices. Indices are zero-based internally
/// (grid point j is index j-1).
struct BinSpec {
    std::size_t n_points = 0;
    int width = 0;
    bool overlap = false;
    bool cyclic = false;
    std::vector<std::size_t> midpoints;
    /// bins[l] lists grid indices in domain order (wrapping for cyclic bins).
    std::vector<std::vector<std::size_t>> bins;

    [[nodiscard]] std::size_t size() const { return bins.size(); }
};

/// Overlapping: one bin per grid index, S_l = {l - w/2, ..., l + w/2}, wrapped
/// (cyclic) or truncated at the ends. Non-overlapping: consecutive blocks of
/// w+1 indices; the last block takes whatever remains.
BinSpec build_bins(std::size_t n_points, int width, bool overlap, bool cyclic);

} // namespace fgfpca
