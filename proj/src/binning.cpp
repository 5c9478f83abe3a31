#include "fgfpca/binning.hpp"

#include <algorithm>
#include <string>

#include "fgfpca/errors.hpp"

namespace fgfpca {

BinSpec build_bins(std::size_t n_points, int width, bool overlap, bool cyclic)
{
    if (width < 2) throw ConfigError("width must be at least 2");
    if (width % 2 != 0) throw ConfigError("width must be even");
    if (static_cast<std::size_t>(width) >= n_points)
        throw ConfigError("width must be smaller than the number of grid points (" + std::to_string(n_points) + ")");

    BinSpec spec;
    spec.n_points = n_points;
    spec.width = width;
    spec.overlap = overlap;
    spec.cyclic = cyclic;

    const auto J = static_cast<long>(n_points);
    const long half = width / 2;
    if (overlap) {
        spec.midpoints.reserve(n_points);
        spec.bins.reserve(n_points);
        for (long m = 0; m < J; ++m) {
            std::vector<std::size_t> bin;
            if (cyclic) {
                for (long t = -half; t <= half; ++t) bin.push_back(static_cast<std::size_t>(((m + t) % J + J) % J));
            } else {
                for (long j = std::max(0L, m - half); j <= std::min(J - 1, m + half); ++j)
                    bin.push_back(static_cast<std::size_t>(j));
            }
            spec.midpoints.push_back(static_cast<std::size_t>(m));
            spec.bins.push_back(std::move(bin));
        }
        return spec;
    }

    const long block = width + 1;
    for (long start = 0; start < J; start += block) {
        const long stop = std::min(J, start + block);
        std::vector<std::size_t> bin;
        for (long j = start; j < stop; ++j) bin.push_back(static_cast<std::size_t>(j));
        spec.midpoints.push_back(static_cast<std::size_t>(start + (stop - start - 1) / 2));
        spec.bins.push_back(std::move(bin));
    }
    return spec;
}

} // namespace fgfpca
