#pragma once

#include <cstddef>
#include <span>

namespace bumpforge {

namespace detail {

inline constexpr std::size_t kPairwiseLeaf = 16;

template <class Term>
double pairwise_range(std::size_t lo, std::size_t hi, const Term& term) {
    if (hi - lo <= kPairwiseLeaf) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_range(lo, mid, term) + pairwise_range(mid, hi, term);
}

} // namespace detail

/// Sum term(0) + ... + term(n-1) along a fixed binary tree.
///
/// The tree shape depends only on n, so the result is bit-reproducible for a
/// given input regardless of how callers schedule the work, and the rounding
/// error grows like O(log n) instead of O(n).
template <class Term>
double pairwise_sum(std::size_t n, const Term& term) {
    return detail::pairwise_range(0, n, term);
}

inline double pairwise_sum(std::span<const double> values) {
    return pairwise_sum(values.size(), [&](std::size_t i) { return values[i]; });
}

} // namespace bumpforge
