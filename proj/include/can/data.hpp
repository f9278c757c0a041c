#pragma once

#include "can/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace can {

enum class Domain { Source, Target };

std::string to_string(Domain d);
Domain parse_domain(const std::string& s);

// Label value marking an unlabeled row.
inline constexpr int kUnlabeled = -1;

struct GeneratorInfo {
  std::string name;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
};

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  Domain domain = Domain::Source;
  GeneratorInfo generator;

  std::size_t size() const { return features.rows(); }
  std::size_t dims() const { return features.cols(); }
  // True when no row carries the unlabeled sentinel.
  bool fully_labeled() const;
  // One past the largest label (0 if unlabeled).
  int num_classes() const;
  // Throws can::Error unless rows >= 1, labels match rows, are >= -1 and features are finite.
  void validate() const;
};

struct DomainPair {
  Dataset source;
  Dataset target;
};

struct BlobShift {
  double rotation_deg = 0.0;  // rotation of the class means in the plane of dims 0 and 1
  double translation = 0.0;   // length of a seeded random translation of every mean
  double scale = 1.0;         // multiplies every class mean
  double noise = 0.5;         // per-coordinate standard deviation of each blob
};

// Gaussian blobs with means drawn from N(0, mean_spread^2 I), redrawn until every
// pair of means is at least min_separation apart. The target domain applies
// scale, rotation and translation to the means and resamples.
DomainPair gen_blobs(std::uint64_t seed, int classes, std::size_t per_class, std::size_t dims, const BlobShift& shift,
                     double mean_spread = 2.0, double min_separation = 0.0);

// Two interleaving half circles; the target is the same construction rotated by
// rotation_deg about the center of the two moons, (0.5, 0.25).
DomainPair gen_moons(std::uint64_t seed, std::size_t per_class, double rotation_deg, double noise);

// Header feature_0,...,feature_{d-1},label,domain; values printed with 17
// significant digits.
void save_csv(const Dataset& data, const std::string& path);
std::string to_csv(const Dataset& data);
Dataset load_csv(const std::string& path);
Dataset parse_csv(const std::string& text, const std::string& source_name = "<memory>");

}  // namespace can
