#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rssmlp/dataset.hpp"
#include "rssmlp/rng.hpp"

namespace rssmlp {

inline constexpr std::uint64_t kStreamSynthetic = 501;

namespace detail {

inline std::vector<std::string> numbered_names(const char* prefix, std::size_t count) {
    std::vector<std::string> names;
    names.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        names.push_back(std::string(prefix) + std::to_string(i));
    }
    return names;
}

}  // namespace detail

// Two unit-variance Gaussians with means at +-2/sqrt(d) per coordinate,
// balanced classes. A classic hard-margin-free binary benchmark shape.
inline Dataset make_twonorm(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n < 2 || d < 1) throw ContractViolation("make_twonorm: need n >= 2, d >= 1");
    RngStream rng = RngStream(seed, kStreamSynthetic).substream(1);
    const double shift = 2.0 / std::sqrt(static_cast<double>(d));
    Dataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.feature_names = detail::numbered_names("f", d);
    ds.label_names = {"neg", "pos"};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double center = label == 0 ? -shift : shift;
        for (std::size_t j = 0; j < d; ++j) {
            ds.features(i, j) = center + rng.next_normal();
        }
        ds.labels[i] = label;
    }
    return ds;
}

// Isotropic Gaussian blobs, one center per class, centers separated along
// distinct axes. Balanced classes in row order.
inline Dataset make_blobs(std::size_t n, std::size_t d, int classes,
                          double separation, std::uint64_t seed) {
    if (n < 2 || d < 1) throw ContractViolation("make_blobs: need n >= 2, d >= 1");
    if (classes < 2 || static_cast<std::size_t>(classes) > d) {
        throw ContractViolation("make_blobs: need 2 <= classes <= d");
    }
    RngStream rng = RngStream(seed, kStreamSynthetic).substream(2);
    Dataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.feature_names = detail::numbered_names("f", d);
    ds.label_names = detail::numbered_names("c", static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
        for (std::size_t j = 0; j < d; ++j) {
            const double center =
                j == static_cast<std::size_t>(label) ? separation : 0.0;
            ds.features(i, j) = center + rng.next_normal();
        }
        ds.labels[i] = label;
    }
    return ds;
}

}  // namespace rssmlp
