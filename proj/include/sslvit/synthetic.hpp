#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sslvit/augment.hpp"

namespace sslvit {

/// Deterministic 10-class corpus of colored geometric primitives rendered on
/// noise backgrounds. Labels cycle through the classes.
std::vector<Image> make_shape_corpus(std::size_t count, std::size_t size, std::uint64_t seed,
                                     std::vector<int>* labels = nullptr);

/// Two trivially separable classes: all-black and all-white images.
std::vector<Image> make_bw_corpus(std::size_t count, std::size_t size,
                                  std::vector<int>* labels = nullptr);

/// Writes images as 0000.ppm, 0001.ppm, ... plus labels.csv when given.
void write_corpus(const std::string& dir, const std::vector<Image>& images,
                  const std::vector<int>* labels = nullptr);

}  // namespace sslvit
