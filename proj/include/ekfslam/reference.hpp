#pragma once

// Straightforward serial implementations used as test oracles and as the
// baseline in the benchmarks.

#include "ekfslam/image.hpp"
#include "ekfslam/vision.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ekfslam::reference {

std::int64_t rect_sum(const GrayImage& img, int x, int y, int w, int h);
std::int64_t rect_sum_sq(const GrayImage& img, int x, int y, int w, int h);

IntegralImage build_integral(const GrayImage& img);
GrayImage half_resolution(const GrayImage& img);

/// Dense Harris: derivatives and window sums evaluated directly per pixel.
std::vector<double> harris_response_map(const GrayImage& img, const Roi& roi, const HarrisParams& p);
std::optional<Corner> harris_best(const GrayImage& img, const Roi& roi, const HarrisParams& p);

/// ZNCC of every candidate in the region, first maximum in raster order.
std::optional<Match> exhaustive_search(const GrayImage& img, const GrayImage& templ, SearchRegion region,
                                       double threshold);

}  // namespace ekfslam::reference
