#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <span>
#include <utility>
#include <vector>

namespace cqed::numerics {

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

/// Running trapezoid integral of samples y on grid x; result[0] = 0.
std::vector<double> cumulative_trapezoid(std::span<const double> x, std::span<const double> y);

/// Evenly spaced grid of n points from a to b inclusive.
std::vector<double> linspace(double a, double b, std::size_t n);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware concurrency).
/// Exceptions from fn propagate after all workers finish (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0);

/// splitmix64 finaliser, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace cqed::numerics
