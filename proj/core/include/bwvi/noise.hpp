#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace bwvi {

/// Counter-based identity of a noise draw. Identical lineages produce
/// bit-identical draws regardless of call order or thread.
struct NoiseLineage {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t iteration = 0;

  friend bool operator==(const NoiseLineage&, const NoiseLineage&) = default;
};

/// Well-known streams used by the run driver and diagnostics.
namespace streams {
inline constexpr std::uint64_t kGradient = 0;
inline constexpr std::uint64_t kEvaluation = 1;
inline constexpr std::uint64_t kCoupling = 2;
inline constexpr std::uint64_t kProblem = 3;
}  // namespace streams

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Order-sensitive hash of a sequence of 64-bit words.
std::uint64_t hash_words(std::initializer_list<std::uint64_t> words);

std::mt19937_64 make_engine(const NoiseLineage& lineage);

/// M independent standard-normal vectors of length d, stored column-wise
/// (d x M).
class NoiseBatch {
 public:
  static NoiseBatch draw(const NoiseLineage& lineage, Eigen::Index dim,
                         Eigen::Index count);
  /// Wraps explicit draws (columns) with an empty lineage.
  static NoiseBatch from_draws(Eigen::MatrixXd draws);

  Eigen::Index dim() const { return draws_.rows(); }
  Eigen::Index size() const { return draws_.cols(); }
  const Eigen::MatrixXd& draws() const { return draws_; }
  auto draw_at(Eigen::Index k) const { return draws_.col(k); }
  const NoiseLineage& lineage() const { return lineage_; }

 private:
  NoiseBatch(Eigen::MatrixXd draws, NoiseLineage lineage)
      : draws_(std::move(draws)), lineage_(lineage) {}

  Eigen::MatrixXd draws_;
  NoiseLineage lineage_;
};

/// Fills a d x n matrix with standard normals from the given engine.
Eigen::MatrixXd standard_normal_matrix(std::mt19937_64& engine,
                                       Eigen::Index rows, Eigen::Index cols);

}  // namespace bwvi
