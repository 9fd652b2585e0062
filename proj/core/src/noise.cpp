#include "bwvi/noise.hpp"

namespace bwvi {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto w : words) h = mix64(h ^ mix64(w));
  return h;
}

std::mt19937_64 make_engine(const NoiseLineage& lineage) {
  return std::mt19937_64(
      hash_words({lineage.seed, lineage.stream, lineage.iteration}));
}

Eigen::MatrixXd standard_normal_matrix(std::mt19937_64& engine,
                                       Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Column-major fill so that a d x M batch is M consecutive draws.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(engine);
  return out;
}

NoiseBatch NoiseBatch::draw(const NoiseLineage& lineage, Eigen::Index dim,
                            Eigen::Index count) {
  auto engine = make_engine(lineage);
  return NoiseBatch(standard_normal_matrix(engine, dim, count), lineage);
}

NoiseBatch NoiseBatch::from_draws(Eigen::MatrixXd draws) {
  return NoiseBatch(std::move(draws), NoiseLineage{});
}

}  // namespace bwvi
