#include "bwvi/targets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bwvi/errors.hpp"
#include "bwvi/noise.hpp"

namespace bwvi {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line_no,
                    std::size_t column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last ||
      !std::isfinite(value))
    throw ParseError("line " + std::to_string(line_no) + ", column " +
                     std::to_string(column + 1) + ": malformed number '" +
                     text + "'");
  return value;
}

}  // namespace

PotentialMetadata make_metadata(Eigen::Index dim, double mu, double l) {
  if (dim < 1) throw InvalidParameters("potential dimension must be >= 1");
  if (!(mu > 0.0) || !std::isfinite(mu) || !std::isfinite(l) || !(l >= mu))
    throw InvalidParameters("potential constants require L >= mu > 0, got mu=" +
                            std::to_string(mu) + ", L=" + std::to_string(l));
  return PotentialMetadata{dim, mu, l};
}

void Potential::check_point(const Eigen::Ref<const Vector>& x,
                            const char* where) const {
  if (x.size() != dim())
    throw DimensionMismatch(where, static_cast<long>(dim()),
                            static_cast<long>(x.size()));
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticPotential::QuadraticPotential(const Matrix& precision, Vector center)
    : precision_(precision), center_(std::move(center)) {
  if (center_.size() != precision_.dim())
    throw DimensionMismatch("QuadraticPotential",
                            static_cast<long>(precision_.dim()),
                            static_cast<long>(center_.size()));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(precision_.data(),
                                            Eigen::EigenvaluesOnly);
  meta_ = make_metadata(precision_.dim(), eig.eigenvalues().minCoeff(),
                        eig.eigenvalues().maxCoeff());
}

double QuadraticPotential::value(const Eigen::Ref<const Vector>& x) const {
  check_point(x, "QuadraticPotential::value");
  const Vector r = x - center_;
  return 0.5 * r.dot(precision_.data() * r);
}

Vector QuadraticPotential::gradient(const Eigen::Ref<const Vector>& x) const {
  check_point(x, "QuadraticPotential::gradient");
  return precision_.data() * (x - center_);
}

Matrix QuadraticPotential::hessian(const Eigen::Ref<const Vector>& x) const {
  check_point(x, "QuadraticPotential::hessian");
  return precision_.data();
}

QuadraticPotential make_random_quadratic(Eigen::Index dim,
                                         double condition_number,
                                         std::uint64_t seed) {
  if (dim < 1) throw InvalidParameters("quadratic dimension must be >= 1");
  if (!(condition_number >= 1.0) || !std::isfinite(condition_number))
    throw InvalidParameters("condition number must be >= 1");
  auto engine = make_engine({seed, streams::kProblem, 0});
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Vector eigenvalues(dim);
  eigenvalues(0) = 1.0;
  if (dim > 1) eigenvalues(dim - 1) = condition_number;
  for (Eigen::Index i = 1; i + 1 < dim; ++i)
    eigenvalues(i) = std::pow(condition_number, uniform(engine));

  // Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
  // signs of R's diagonal folded into Q.
  const Matrix g = standard_normal_matrix(engine, dim, dim);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);

  const Matrix a = symmetrize(q * eigenvalues.asDiagonal() * q.transpose());
  Vector b = standard_normal_matrix(engine, dim, 1).col(0);
  return QuadraticPotential(a, std::move(b));
}

GaussianVariational quadratic_optimum(const QuadraticPotential& target) {
  const Eigen::Index d = target.dim();
  // A = L L^T  =>  A^{-1} = L^{-T} L^{-1}.
  const Matrix l = cholesky_factor(target.precision());
  const Matrix l_inv =
      l.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  const Matrix sigma = symmetrize(l_inv.transpose() * l_inv);
  return GaussianVariational::from_covariance(target.center(), sigma);
}

// ---------------------------------------------------------------------------
// Logistic regression with ridge prior

LogisticRidgePotential::LogisticRidgePotential(LogisticDataset data,
                                               double ridge)
    : data_(std::move(data)), ridge_(ridge) {
  if (data_.design.rows() != data_.labels.size())
    throw DimensionMismatch("LogisticRidgePotential",
                            static_cast<long>(data_.design.rows()),
                            static_cast<long>(data_.labels.size()));
  if (!(ridge_ > 0.0) || !std::isfinite(ridge_))
    throw InvalidParameters("ridge must be positive");
  for (Eigen::Index i = 0; i < data_.labels.size(); ++i)
    if (data_.labels(i) != 0.0 && data_.labels(i) != 1.0)
      throw LabelError("labels must be 0 or 1");
  const Eigen::Index d = data_.design.cols();
  double gram_max = 0.0;
  if (data_.design.rows() > 0) {
    const Matrix gram = data_.design.transpose() * data_.design;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    gram_max = std::max(0.0, eig.eigenvalues().maxCoeff());
  }
  meta_ = make_metadata(d, ridge_, ridge_ + 0.25 * gram_max);
}

double LogisticRidgePotential::value(const Eigen::Ref<const Vector>& x) const {
  check_point(x, "LogisticRidgePotential::value");
  const Vector z = data_.design * x;
  double total = 0.5 * ridge_ * x.squaredNorm();
  for (Eigen::Index i = 0; i < z.size(); ++i)
    total += softplus(z(i)) - data_.labels(i) * z(i);
  return total;
}

Vector LogisticRidgePotential::gradient(
    const Eigen::Ref<const Vector>& x) const {
  check_point(x, "LogisticRidgePotential::gradient");
  const Vector z = data_.design * x;
  Vector residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    residual(i) = logistic(z(i)) - data_.labels(i);
  return data_.design.transpose() * residual + ridge_ * x;
}

Matrix LogisticRidgePotential::hessian(
    const Eigen::Ref<const Vector>& x) const {
  check_point(x, "LogisticRidgePotential::hessian");
  const Vector z = data_.design * x;
  Vector w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = logistic(z(i));
    w(i) = s * (1.0 - s);
  }
  Matrix h = data_.design.transpose() * w.asDiagonal() * data_.design;
  h.diagonal().array() += ridge_;
  return symmetrize(h);
}

// ---------------------------------------------------------------------------
// Dataset I/O

LogisticDataset load_logistic_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line))
    throw ParseError("dataset '" + path.string() + "' has no header row");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 2)
    throw ParseError("header must name at least one feature and the label");
  const std::size_t n_features = header.size() - 1;

  std::vector<double> features;
  std::vector<double> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    for (std::size_t j = 0; j < n_features; ++j)
      features.push_back(parse_number(fields[j], line_no, j));
    const double label = parse_number(fields.back(), line_no, n_features);
    if (label != 0.0 && label != 1.0)
      throw LabelError("line " + std::to_string(line_no) + ": label '" +
                       fields.back() + "' is not 0 or 1");
    labels.push_back(label);
  }
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  if (labels.empty())
    throw ParseError("dataset '" + path.string() + "' has no data rows");

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto d = static_cast<Eigen::Index>(n_features);
  LogisticDataset data;
  data.design = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                               Eigen::Dynamic, Eigen::RowMajor>>(
      features.data(), n, d);
  data.labels = Eigen::Map<const Vector>(labels.data(), n);
  return data;
}

void write_logistic_dataset(const LogisticDataset& data,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  const Eigen::Index d = data.design.cols();
  for (Eigen::Index j = 0; j < d; ++j) out << 'x' << j + 1 << ',';
  out << "y\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < data.design.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out << data.design(i, j) << ',';
    out << static_cast<int>(data.labels(i)) << '\n';
  }
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

LogisticDataset toy_logistic_dataset(Eigen::Index rows, Eigen::Index features,
                                     std::uint64_t seed) {
  if (rows < 1 || features < 1)
    throw InvalidParameters("toy dataset needs rows >= 1 and features >= 1");
  auto engine = make_engine({seed, streams::kProblem, 1});
  LogisticDataset data;
  data.design = standard_normal_matrix(engine, rows, features);
  const Vector coefficients = standard_normal_matrix(engine, features, 1).col(0);
  const Vector z = data.design * coefficients;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  data.labels.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i)
    data.labels(i) = uniform(engine) < logistic(z(i)) ? 1.0 : 0.0;
  return data;
}

}  // namespace bwvi
