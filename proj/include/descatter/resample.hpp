#pragma once

#include "descatter/grid.hpp"

namespace descatter {

// 4x decimation keeping samples at indices 0, 4, 8, ... after a 4x4 box
// prefilter anchored at each kept sample (offsets -2..+1, renormalized at the
// borders so constants stay constant). Requires n % 4 == 1.
Grid downsample4(const Grid& g);
int downsample4_size(int n);

// corner-aligned bilinear interpolation; exact at the kept samples when
// out_n == 4*(n-1)+1
Grid upsample_bilinear(const Grid& g, int out_n);

}  // namespace descatter
