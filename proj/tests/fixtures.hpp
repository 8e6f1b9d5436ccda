#pragma once

// Schema-faithful synthetic dataset files for exercising the loaders when
// the real benchmark files are not on disk. Shapes and vocabulary sizes
// mirror the originals; values are arbitrary.

#include <fstream>
#include <string>
#include <vector>

#include "alad/rng.hpp"

namespace fixtures {

/// Writes a KDDCup99-10%-style CSV: 41 feature fields + label. The 7
/// symbolic columns carry vocabularies of sizes 3/66/11/2/2/1/2, which
/// one-hot to 87 columns and a total width of 121.
inline void write_kdd99_like(const std::string& path, std::size_t rows, std::uint64_t seed) {
  std::vector<std::string> protocols = {"tcp", "udp", "icmp"};
  std::vector<std::string> services;
  for (int i = 0; i < 66; ++i)
    services.push_back("svc" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  std::vector<std::string> flags;
  for (int i = 0; i < 11; ++i)
    flags.push_back("fl" + std::to_string(i));

  alad::Rng rng(seed);
  std::ofstream out(path);
  for (std::size_t r = 0; r < rows; ++r) {
    std::string line;
    auto num = [&] { return std::to_string(rng.below(1000)); };
    // 41 features: indices 1,2,3,6,11,20,21 are symbolic
    for (int c = 0; c < 41; ++c) {
      if (!line.empty()) line += ",";
      switch (c) {
        case 1: line += protocols[r % protocols.size()]; break;
        case 2: line += services[r % services.size()]; break;
        case 3: line += flags[r % flags.size()]; break;
        case 6: line += (r % 2) ? "1" : "0"; break;
        case 11: line += (r % 3) ? "1" : "0"; break;
        case 20: line += "0"; break;  // constant column, vocabulary of one
        case 21: line += (r % 5) ? "0" : "1"; break;
        default: line += num();
      }
    }
    line += rng.bernoulli(0.2) ? ",normal." : (rng.bernoulli(0.5) ? ",smurf." : ",neptune.");
    out << line << "\n";
  }
}

/// Writes an arrhythmia-style file: `rows` lines of 279 attributes + class,
/// with '?' markers sprinkled into the sparse columns and an anomaly rate
/// near 15% (66 of 452 rows when rows == 452).
inline void write_arrhythmia_like(const std::string& path, std::size_t rows, std::uint64_t seed) {
  const int anomalous_classes[] = {3, 4, 5, 7, 8, 9, 14, 15};
  const int nominal_classes[] = {1, 2, 6, 10, 16};
  alad::Rng rng(seed);
  std::ofstream out(path);
  const std::size_t n_anomalous = (rows * 66) / 452;
  for (std::size_t r = 0; r < rows; ++r) {
    std::string line;
    for (int c = 0; c < 279; ++c) {
      if (!line.empty()) line += ",";
      const bool sparse = (c == 10 || c == 11 || c == 12 || c == 13);
      if (sparse && rng.bernoulli(0.6)) {
        line += "?";
      } else {
        line += std::to_string(static_cast<int>(rng.below(200)) - 100);
      }
    }
    const int cls = r < n_anomalous ? anomalous_classes[r % 8] : nominal_classes[r % 5];
    line += "," + std::to_string(cls);
    out << line << "\n";
  }
}

}  // namespace fixtures
