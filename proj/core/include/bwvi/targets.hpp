#pragma once

// Target potentials U = -log(unnormalized density) with value, gradient,
// Hessian and (mu, L) metadata.

#include <cstdint>
#include <filesystem>

#include "bwvi/geometry.hpp"

namespace bwvi {

struct PotentialMetadata {
  Eigen::Index dim = 0;
  double strong_convexity = 0.0;  ///< mu
  double smoothness = 0.0;        ///< L

  double condition_number() const { return smoothness / strong_convexity; }
};

/// Validates L >= mu > 0 (finite); throws InvalidParameters otherwise.
PotentialMetadata make_metadata(Eigen::Index dim, double mu, double l);

class Potential {
 public:
  virtual ~Potential() = default;

  virtual const PotentialMetadata& metadata() const = 0;
  Eigen::Index dim() const { return metadata().dim; }

  /// All evaluations throw DimensionMismatch on a wrong-length point.
  virtual double value(const Eigen::Ref<const Vector>& x) const = 0;
  virtual Vector gradient(const Eigen::Ref<const Vector>& x) const = 0;
  virtual Matrix hessian(const Eigen::Ref<const Vector>& x) const = 0;

 protected:
  void check_point(const Eigen::Ref<const Vector>& x, const char* where) const;
};

/// U(x) = 1/2 (x - b)^T A (x - b).
class QuadraticPotential final : public Potential {
 public:
  /// Throws DimensionMismatch, NotSymmetric or NotPositiveDefinite.
  QuadraticPotential(const Matrix& precision, Vector center);

  const PotentialMetadata& metadata() const override { return meta_; }
  double value(const Eigen::Ref<const Vector>& x) const override;
  Vector gradient(const Eigen::Ref<const Vector>& x) const override;
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override;

  const Matrix& precision() const { return precision_.data(); }
  const Vector& center() const { return center_; }

 private:
  CovarianceMatrix precision_;
  Vector center_;
  PotentialMetadata meta_;
};

/// Random quadratic with mu = 1 and L = condition_number. The extreme
/// eigenvalues are pinned exactly; the rest are log-uniform between them,
/// the eigenbasis is Haar-random and the center is standard normal.
QuadraticPotential make_random_quadratic(Eigen::Index dim,
                                         double condition_number,
                                         std::uint64_t seed);

/// Exact minimizer of the free energy for a quadratic target:
/// q* = N(b, A^{-1}).
GaussianVariational quadratic_optimum(const QuadraticPotential& target);

struct LogisticDataset {
  Matrix design;  ///< n x d
  Vector labels;  ///< length n, entries in {0, 1}
};

/// Reads a CSV with a header row whose last column is a 0/1 label and whose
/// other columns are numeric features. Throws IoError, ParseError or
/// LabelError.
LogisticDataset load_logistic_dataset(const std::filesystem::path& path);

/// Writes a dataset in the format accepted by load_logistic_dataset, with
/// round-trip precision.
void write_logistic_dataset(const LogisticDataset& data,
                            const std::filesystem::path& path);

/// Deterministic synthetic dataset (the bundled toy problem is
/// toy_logistic_dataset(60, 10, 20240501)).
LogisticDataset toy_logistic_dataset(Eigen::Index rows, Eigen::Index features,
                                     std::uint64_t seed);

/// Bayesian logistic regression with a Gaussian ridge prior:
///   U(x) = sum_i [log(1 + exp(z_i)) - y_i z_i] + (ridge/2) ||x||^2,
///   z = X x.
/// mu = ridge and L = ridge + lambda_max(X^T X) / 4.
class LogisticRidgePotential final : public Potential {
 public:
  LogisticRidgePotential(LogisticDataset data, double ridge);

  const PotentialMetadata& metadata() const override { return meta_; }
  double value(const Eigen::Ref<const Vector>& x) const override;
  Vector gradient(const Eigen::Ref<const Vector>& x) const override;
  Matrix hessian(const Eigen::Ref<const Vector>& x) const override;

  const LogisticDataset& data() const { return data_; }
  double ridge() const { return ridge_; }

 private:
  LogisticDataset data_;
  double ridge_;
  PotentialMetadata meta_;
};

}  // namespace bwvi
