#include "grasslab/measures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "grasslab/io.hpp"
#include "grasslab/lowdim.hpp"
#include "grasslab/stats.hpp"

namespace grasslab::measures {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_gaussian_density(const Vector& x) {
  return -0.5 * x.size() * kLog2Pi - 0.5 * x.squaredNorm();
}

// ------------------------------------------------------- Gauss-Legendre ----

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

GaussLegendre legendre_rule(int m) {
  GaussLegendre rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= m; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      const double dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= m; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    const double dp = m * (x * p1 - p0) / (x * x - 1.0);
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

const GaussLegendre& rule64() {
  static const GaussLegendre r = legendre_rule(64);
  return r;
}

// ------------------------------------------------------------ the impls ----

}  // namespace

class MeasureImpl {
 public:
  virtual ~MeasureImpl() = default;
  virtual int dim() const = 0;
  virtual bool centered() const { return true; }
  virtual bool has_density() const = 0;
  virtual double log_density(const Vector&) const {
    throw std::logic_error("measure has no density evaluator");
  }
  virtual std::optional<Matrix> covariance() const { return std::nullopt; }
  virtual std::optional<double> support_radius() const { return std::nullopt; }
  virtual std::optional<lowdim::Halfspaces> support_halfspaces() const {
    return std::nullopt;
  }
  virtual std::optional<double> uniform_log_density() const {
    return std::nullopt;
  }
  virtual Vector sample(RngStream& rng) const = 0;
  virtual Descriptor descriptor() const = 0;
};

namespace {

class GaussianImpl final : public MeasureImpl {
 public:
  explicit GaussianImpl(int n) : n_(n) {}
  int dim() const override { return n_; }
  bool has_density() const override { return true; }
  double log_density(const Vector& x) const override {
    return log_gaussian_density(x);
  }
  std::optional<Matrix> covariance() const override {
    return Matrix::Identity(n_, n_);
  }
  Vector sample(RngStream& rng) const override {
    Vector x(n_);
    for (int i = 0; i < n_; ++i) x(i) = rng.normal();
    return x;
  }
  Descriptor descriptor() const override {
    return {"gaussian", {static_cast<double>(n_)}, {}};
  }

 private:
  int n_;
};

class CubeImpl final : public MeasureImpl {
 public:
  explicit CubeImpl(int n) : n_(n), half_(std::sqrt(3.0)) {}
  int dim() const override { return n_; }
  bool has_density() const override { return true; }
  double log_density(const Vector& x) const override {
    for (int i = 0; i < n_; ++i)
      if (std::abs(x(i)) > half_) return kNegInf;
    return uniform_log_density().value();
  }
  std::optional<Matrix> covariance() const override {
    return Matrix::Identity(n_, n_);
  }
  std::optional<double> support_radius() const override {
    return half_ * std::sqrt(static_cast<double>(n_));
  }
  std::optional<lowdim::Halfspaces> support_halfspaces() const override {
    lowdim::Halfspaces h;
    h.a = Matrix::Zero(2 * n_, n_);
    h.b = Vector::Constant(2 * n_, half_);
    for (int i = 0; i < n_; ++i) {
      h.a(2 * i, i) = 1.0;
      h.a(2 * i + 1, i) = -1.0;
    }
    return h;
  }
  std::optional<double> uniform_log_density() const override {
    return -n_ * std::log(2.0 * half_);
  }
  Vector sample(RngStream& rng) const override {
    Vector x(n_);
    for (int i = 0; i < n_; ++i) x(i) = rng.uniform(-half_, half_);
    return x;
  }
  Descriptor descriptor() const override {
    return {"cube", {static_cast<double>(n_)}, {}};
  }

 private:
  int n_;
  double half_;
};

class L2BallImpl final : public MeasureImpl {
 public:
  explicit L2BallImpl(int n)
      : n_(n), radius_(std::sqrt(static_cast<double>(n) + 2.0)) {
    log_density_ = -(std::log(lowdim::unit_ball_volume(n)) +
                     n * std::log(radius_));
  }
  int dim() const override { return n_; }
  bool has_density() const override { return true; }
  double log_density(const Vector& x) const override {
    return x.norm() <= radius_ ? log_density_ : kNegInf;
  }
  std::optional<Matrix> covariance() const override {
    return Matrix::Identity(n_, n_);
  }
  std::optional<double> support_radius() const override { return radius_; }
  std::optional<double> uniform_log_density() const override {
    return log_density_;
  }
  Vector sample(RngStream& rng) const override {
    Vector x(n_);
    for (int i = 0; i < n_; ++i) x(i) = rng.normal();
    const double r = radius_ * std::pow(rng.uniform(), 1.0 / n_);
    const double nrm = x.norm();
    return (nrm > 0) ? Vector(x * (r / nrm)) : x;
  }
  Descriptor descriptor() const override {
    return {"lp_ball", {2.0, static_cast<double>(n_)}, {}};
  }

 private:
  int n_;
  double radius_;
  double log_density_;
};

class L1BallImpl final : public MeasureImpl {
 public:
  explicit L1BallImpl(int n)
      : n_(n),
        radius_(std::sqrt(0.5 * (n + 1.0) * (n + 2.0))) {
    // vol = 2^n R^n / n!
    log_density_ = -(n * std::log(2.0 * radius_) - std::lgamma(n + 1.0));
  }
  int dim() const override { return n_; }
  bool has_density() const override { return true; }
  double log_density(const Vector& x) const override {
    return x.lpNorm<1>() <= radius_ ? log_density_ : kNegInf;
  }
  std::optional<Matrix> covariance() const override {
    return Matrix::Identity(n_, n_);
  }
  std::optional<double> support_radius() const override { return radius_; }
  std::optional<lowdim::Halfspaces> support_halfspaces() const override {
    if (n_ > 16) return std::nullopt;
    const int m = 1 << n_;
    lowdim::Halfspaces h;
    h.a = Matrix::Zero(m, n_);
    h.b = Vector::Constant(m, radius_);
    for (int s = 0; s < m; ++s)
      for (int i = 0; i < n_; ++i) h.a(s, i) = (s >> i) & 1 ? 1.0 : -1.0;
    return h;
  }
  std::optional<double> uniform_log_density() const override {
    return log_density_;
  }
  Vector sample(RngStream& rng) const override {
    Vector e(n_ + 1);
    for (int i = 0; i <= n_; ++i) e(i) = rng.exponential();
    const double total = e.sum();
    Vector x(n_);
    for (int i = 0; i < n_; ++i) x(i) = rng.sign() * radius_ * e(i) / total;
    return x;
  }
  Descriptor descriptor() const override {
    return {"lp_ball", {1.0, static_cast<double>(n_)}, {}};
  }

 private:
  int n_;
  double radius_;
  double log_density_;
};

class SimplexImpl final : public MeasureImpl {
 public:
  explicit SimplexImpl(int n) : n_(n) {
    // Regular simplex in the hyperplane orthogonal to the all-ones vector,
    // scaled so the uniform measure has identity covariance.
    const int m = n + 1;
    Vector v = Vector::Zero(m);
    v(0) = 1.0;
    Vector ones = Vector::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
    Vector w = v - ones;
    const Matrix house =
        Matrix::Identity(m, m) - (2.0 / w.squaredNorm()) * (w * w.transpose());
    const Matrix q = house.rightCols(n);  // orthonormal basis of ones^perp
    const double scale = std::sqrt(static_cast<double>(m) * (n + 2.0));
    vertices_ = Matrix(n, m);
    for (int i = 0; i < m; ++i) {
      Vector p = -Vector::Constant(m, 1.0 / m);
      p(i) += 1.0;
      vertices_.col(i) = scale * (q.transpose() * p);
    }
    Matrix edge(n, n);
    for (int i = 0; i < n; ++i)
      edge.col(i) = vertices_.col(i + 1) - vertices_.col(0);
    edge_inv_ = edge.inverse();
    log_volume_ = std::log(std::abs(edge.determinant())) - std::lgamma(n + 1.0);
  }
  int dim() const override { return n_; }
  bool has_density() const override { return true; }
  double log_density(const Vector& x) const override {
    const Vector w = edge_inv_ * (x - vertices_.col(0));
    if (w.minCoeff() < -1e-12 || w.sum() > 1.0 + 1e-12) return kNegInf;
    return -log_volume_;
  }
  std::optional<Matrix> covariance() const override {
    return Matrix::Identity(n_, n_);
  }
  std::optional<double> support_radius() const override {
    return std::sqrt(static_cast<double>(n_) * (n_ + 2.0));
  }
  std::optional<lowdim::Halfspaces> support_halfspaces() const override {
    lowdim::Halfspaces h;
    h.a = Matrix::Zero(n_ + 1, n_);
    h.b = Vector::Zero(n_ + 1);
    // w_j(x) >= 0 for the barycentric coordinates w_1..w_n, and w_0 >= 0.
    for (int j = 0; j < n_; ++j) {
      h.a.row(j) = -edge_inv_.row(j);
      h.b(j) = -edge_inv_.row(j).dot(vertices_.col(0));
    }
    const Eigen::RowVectorXd colsum = edge_inv_.colwise().sum();
    h.a.row(n_) = colsum;
    h.b(n_) = 1.0 + colsum.dot(vertices_.col(0));
    return h;
  }
  std::optional<double> uniform_log_density() const override {
    return -log_volume_;
  }
  Vector sample(RngStream& rng) const override {
    Vector e(n_ + 1);
    for (int i = 0; i <= n_; ++i) e(i) = rng.exponential();
    e /= e.sum();
    return vertices_ * e;
  }
  Descriptor descriptor() const override {
    return {"simplex", {static_cast<double>(n_)}, {}};
  }

 private:
  int n_;
  Matrix vertices_;  // n x (n+1)
  Matrix edge_inv_;
  double log_volume_;
};

class LaplaceProductImpl final : public MeasureImpl {
 public:
  explicit LaplaceProductImpl(int n) : n_(n), b_(1.0 / std::sqrt(2.0)) {}
  int dim() const override { return n_; }
  bool has_density() const override { return true; }
  double log_density(const Vector& x) const override {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += -std::abs(x(i)) / b_;
    return s - n_ * std::log(2.0 * b_);
  }
  std::optional<Matrix> covariance() const override {
    return Matrix::Identity(n_, n_);
  }
  Vector sample(RngStream& rng) const override {
    Vector x(n_);
    for (int i = 0; i < n_; ++i) {
      const double u = rng.uniform() - 0.5;
      x(i) = -b_ * std::copysign(std::log(1.0 - 2.0 * std::abs(u)), u);
    }
    return x;
  }
  Descriptor descriptor() const override {
    return {"laplace_product", {static_cast<double>(n_)}, {}};
  }

 private:
  int n_;
  double b_;
};

class ProductImpl final : public MeasureImpl {
 public:
  ProductImpl(Measure a, Measure b) : a_(std::move(a)), b_(std::move(b)) {}
  int dim() const override { return a_.dim() + b_.dim(); }
  bool centered() const override { return a_.centered() && b_.centered(); }
  bool has_density() const override {
    return a_.has_density() && b_.has_density();
  }
  double log_density(const Vector& x) const override {
    return a_.log_density(x.head(a_.dim())) + b_.log_density(x.tail(b_.dim()));
  }
  std::optional<Matrix> covariance() const override {
    const auto ca = a_.covariance();
    const auto cb = b_.covariance();
    if (!ca || !cb) return std::nullopt;
    Matrix c = Matrix::Zero(dim(), dim());
    c.topLeftCorner(a_.dim(), a_.dim()) = *ca;
    c.bottomRightCorner(b_.dim(), b_.dim()) = *cb;
    return c;
  }
  std::optional<double> support_radius() const override {
    const auto ra = a_.support_radius();
    const auto rb = b_.support_radius();
    if (!ra || !rb) return std::nullopt;
    return std::hypot(*ra, *rb);
  }
  std::optional<lowdim::Halfspaces> support_halfspaces() const override {
    const auto ha = a_.support_halfspaces();
    const auto hb = b_.support_halfspaces();
    if (!ha || !hb) return std::nullopt;
    lowdim::Halfspaces h;
    h.a = Matrix::Zero(ha->count() + hb->count(), dim());
    h.b = Vector(ha->count() + hb->count());
    h.a.topLeftCorner(ha->count(), a_.dim()) = ha->a;
    h.a.bottomRightCorner(hb->count(), b_.dim()) = hb->a;
    h.b.head(ha->count()) = ha->b;
    h.b.tail(hb->count()) = hb->b;
    return h;
  }
  std::optional<double> uniform_log_density() const override {
    const auto ua = a_.uniform_log_density();
    const auto ub = b_.uniform_log_density();
    if (!ua || !ub) return std::nullopt;
    return *ua + *ub;
  }
  Vector sample(RngStream& rng) const override {
    Vector x(dim());
    x.head(a_.dim()) = a_.sample(rng);
    x.tail(b_.dim()) = b_.sample(rng);
    return x;
  }
  Descriptor descriptor() const override {
    return {"product", {}, {a_.descriptor(), b_.descriptor()}};
  }

 private:
  Measure a_, b_;
};

class ConvolveImpl final : public MeasureImpl {
 public:
  ConvolveImpl(Measure a, Measure b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.dim() != b_.dim())
      throw std::invalid_argument("convolve: dimension mismatch");
  }
  int dim() const override { return a_.dim(); }
  bool centered() const override { return a_.centered() && b_.centered(); }
  bool has_density() const override { return false; }
  std::optional<Matrix> covariance() const override {
    const auto ca = a_.covariance();
    const auto cb = b_.covariance();
    if (!ca || !cb) return std::nullopt;
    return *ca + *cb;
  }
  std::optional<double> support_radius() const override {
    const auto ra = a_.support_radius();
    const auto rb = b_.support_radius();
    if (!ra || !rb) return std::nullopt;
    return *ra + *rb;
  }
  Vector sample(RngStream& rng) const override {
    return a_.sample(rng) + b_.sample(rng);
  }
  Descriptor descriptor() const override {
    return {"convolve", {}, {a_.descriptor(), b_.descriptor()}};
  }

 private:
  Measure a_, b_;
};

class SmoothedImpl final : public MeasureImpl {
 public:
  SmoothedImpl(Measure base, double xi)
      : base_(std::move(base)), xi_(xi), seed_(0x5E00D) {
    if (!(xi > 0.0 && xi < 1.0))
      throw std::invalid_argument("gaussian_smoothing: xi must be in (0,1)");
  }
  int dim() const override { return base_.dim(); }
  bool has_density() const override { return base_.has_density(); }

  /// Quadrature of the defining convolution integral for dim <= 2; above
  /// that, a sample-averaged convolution against the Gaussian kernel with a
  /// seed derived from the evaluation point, so the evaluator stays a pure
  /// function.
  double log_density(const Vector& x) const override {
    if (!base_.has_density())
      throw std::logic_error("smoothed measure has no density evaluator");
    const int k = dim();
    if (k <= 2) return log_density_quadrature(x);
    return log_density_sampled(x);
  }
  std::optional<Matrix> covariance() const override {
    const auto cb = base_.covariance();
    if (!cb) return std::nullopt;
    return (1.0 - xi_ * xi_) * (*cb) +
           xi_ * xi_ * Matrix::Identity(dim(), dim());
  }
  Vector sample(RngStream& rng) const override {
    Vector x = base_.sample(rng);
    const double root = std::sqrt(1.0 - xi_ * xi_);
    for (int i = 0; i < x.size(); ++i) x(i) = root * x(i) + xi_ * rng.normal();
    return x;
  }
  Descriptor descriptor() const override {
    return {"smooth", {xi_}, {base_.descriptor()}};
  }

  double log_density_quadrature(const Vector& x) const {
    const int k = dim();
    const double root = std::sqrt(1.0 - xi_ * xi_);
    // Integration window per axis: where the Gaussian factor is alive,
    // intersected with the base support when it is bounded.
    std::vector<std::pair<double, double>> window(k);
    const auto rho = base_.support_radius();
    for (int i = 0; i < k; ++i) {
      double lo = (-9.5 - xi_ * x(i)) / root;
      double hi = (9.5 - xi_ * x(i)) / root;
      if (rho) {
        lo = std::max(lo, (root * x(i) - *rho) / xi_);
        hi = std::min(hi, (root * x(i) + *rho) / xi_);
      }
      if (lo >= hi) return kNegInf;
      window[i] = {lo, hi};
    }
    const auto& rule = rule64();
    const int m = static_cast<int>(rule.nodes.size());
    auto integrand = [&](const Vector& y) {
      const Vector u = root * x - xi_ * y;
      const double lf = base_.log_density(u);
      if (lf == kNegInf) return 0.0;
      const Vector g = xi_ * x + root * y;
      return std::exp(lf + log_gaussian_density(g));
    };
    double total = 0.0;
    if (k == 1) {
      // Panels keep the rule accurate over wide windows.
      const int panels = 12;
      const double width = (window[0].second - window[0].first) / panels;
      Vector y(1);
      for (int p = 0; p < panels; ++p) {
        const double a = window[0].first + p * width;
        for (int i = 0; i < m; ++i) {
          y(0) = a + 0.5 * width * (rule.nodes[i] + 1.0);
          total += 0.5 * width * rule.weights[i] * integrand(y);
        }
      }
    } else {
      const int panels = 3;
      const double wx = (window[0].second - window[0].first) / panels;
      const double wy = (window[1].second - window[1].first) / panels;
      Vector y(2);
      for (int px = 0; px < panels; ++px)
        for (int py = 0; py < panels; ++py) {
          const double ax = window[0].first + px * wx;
          const double ay = window[1].first + py * wy;
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
              y(0) = ax + 0.5 * wx * (rule.nodes[i] + 1.0);
              y(1) = ay + 0.5 * wy * (rule.nodes[j] + 1.0);
              total += 0.25 * wx * wy * rule.weights[i] * rule.weights[j] *
                       integrand(y);
            }
        }
    }
    return total > 0.0 ? std::log(total) : kNegInf;
  }

  double log_density_sampled(const Vector& x) const {
    const int k = dim();
    const double root = std::sqrt(1.0 - xi_ * xi_);
    const std::uint64_t point_key =
        io::fnv1a64(x.data(), sizeof(double) * x.size());
    RngStream rng(mix64(seed_ ^ point_key));
    const int n = 20000;
    std::vector<double> logs(n);
    for (int i = 0; i < n; ++i) {
      const Vector draw = base_.sample(rng);
      const Vector g = (x - root * draw) / xi_;
      logs[i] = log_gaussian_density(g) - k * std::log(xi_);
    }
    const double peak = *std::max_element(logs.begin(), logs.end());
    if (peak == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - peak);
    return peak + std::log(acc / n);
  }

 private:
  Measure base_;
  double xi_;
  std::uint64_t seed_;
};

class MarginalImpl final : public MeasureImpl {
 public:
  MarginalImpl(Measure base, grassmann::Subspace f)
      : base_(std::move(base)), f_(std::move(f)) {
    if (base_.dim() != f_.n())
      throw std::invalid_argument("marginal: dimension mismatch");
  }
  int dim() const override { return f_.k(); }
  bool centered() const override { return base_.centered(); }
  bool has_density() const override { return false; }
  std::optional<Matrix> covariance() const override {
    const auto cb = base_.covariance();
    if (!cb) return std::nullopt;
    return f_.frame().transpose() * (*cb) * f_.frame();
  }
  std::optional<double> support_radius() const override {
    return base_.support_radius();
  }
  Vector sample(RngStream& rng) const override {
    return f_.frame().transpose() * base_.sample(rng);
  }
  Descriptor descriptor() const override {
    Descriptor d{"marginal", {}, {base_.descriptor()}};
    d.params.push_back(f_.n());
    d.params.push_back(f_.k());
    for (int j = 0; j < f_.k(); ++j)
      for (int i = 0; i < f_.n(); ++i) d.params.push_back(f_.frame()(i, j));
    return d;
  }
  const grassmann::Subspace& subspace() const { return f_; }

 private:
  Measure base_;
  grassmann::Subspace f_;
};

class PushforwardImpl final : public MeasureImpl {
 public:
  PushforwardImpl(Measure base, Matrix map, Vector shift, bool centered)
      : base_(std::move(base)),
        map_(std::move(map)),
        shift_(std::move(shift)),
        centered_(centered) {
    if (map_.rows() != base_.dim() || map_.cols() != base_.dim() ||
        shift_.size() != base_.dim())
      throw std::invalid_argument("linear_pushforward: dimension mismatch");
    Eigen::FullPivLU<Matrix> lu(map_);
    if (!lu.isInvertible())
      throw std::invalid_argument("linear_pushforward: singular map");
    inverse_ = lu.inverse();
    log_abs_det_ = std::log(std::abs(lu.determinant()));
  }
  int dim() const override { return base_.dim(); }
  bool centered() const override { return centered_; }
  bool has_density() const override { return base_.has_density(); }
  double log_density(const Vector& y) const override {
    return base_.log_density(inverse_ * y + shift_) - log_abs_det_;
  }
  std::optional<Matrix> covariance() const override {
    const auto cb = base_.covariance();
    if (!cb || shift_.norm() > 0.0) return std::nullopt;
    return map_ * (*cb) * map_.transpose();
  }
  std::optional<double> support_radius() const override {
    const auto rb = base_.support_radius();
    if (!rb) return std::nullopt;
    Eigen::JacobiSVD<Matrix> svd(map_);
    return svd.singularValues()(0) * (*rb + shift_.norm());
  }
  Vector sample(RngStream& rng) const override {
    return map_ * (base_.sample(rng) - shift_);
  }
  Descriptor descriptor() const override {
    Descriptor d{"pushforward", {}, {base_.descriptor()}};
    d.params.push_back(dim());
    for (int j = 0; j < map_.cols(); ++j)
      for (int i = 0; i < map_.rows(); ++i) d.params.push_back(map_(i, j));
    for (int i = 0; i < shift_.size(); ++i) d.params.push_back(shift_(i));
    return d;
  }

 private:
  Measure base_;
  Matrix map_;
  Vector shift_;
  bool centered_;
  Matrix inverse_;
  double log_abs_det_;
};

}  // namespace

// ------------------------------------------------------------ Descriptor ---

std::string Descriptor::to_string() const {
  if (params.empty() && children.empty()) return name;
  std::ostringstream out;
  out << name << '(';
  bool first = true;
  for (double p : params) {
    if (!first) out << ", ";
    first = false;
    out << io::format_double(p);
  }
  for (const auto& c : children) {
    if (!first) out << ", ";
    first = false;
    out << c.to_string();
  }
  out << ')';
  return out.str();
}

namespace {

struct DescriptorParser {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("descriptor parse error at position " +
                                std::to_string(pos) + ": " + what);
  }
  Descriptor parse() {
    skip_ws();
    Descriptor d;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) ||
            text[pos] == '_')) {
      d.name += text[pos++];
    }
    if (d.name.empty()) fail("expected a measure name");
    skip_ws();
    if (pos < text.size() && text[pos] == '(') {
      ++pos;
      while (true) {
        skip_ws();
        if (pos >= text.size()) fail("unterminated argument list");
        if (text[pos] == ')') {
          ++pos;
          break;
        }
        const char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
            c == '+' || c == '.') {
          std::size_t used = 0;
          d.params.push_back(std::stod(text.substr(pos), &used));
          pos += used;
        } else if (c == 'i' && text.compare(pos, 3, "inf") == 0) {
          d.params.push_back(std::numeric_limits<double>::infinity());
          pos += 3;
        } else {
          d.children.push_back(parse());
        }
        skip_ws();
        if (pos < text.size() && text[pos] == ',') ++pos;
      }
    }
    return d;
  }
};

}  // namespace

Descriptor Descriptor::parse(const std::string& text) {
  DescriptorParser p{text};
  Descriptor d = p.parse();
  p.skip_ws();
  if (p.pos != text.size())
    throw std::invalid_argument("descriptor parse error: trailing characters");
  return d;
}

// --------------------------------------------------------------- Measure ---

Measure::Measure(std::shared_ptr<const MeasureImpl> impl)
    : impl_(std::move(impl)) {}

int Measure::dim() const { return impl_->dim(); }
bool Measure::centered() const { return impl_->centered(); }
bool Measure::has_density() const { return impl_->has_density(); }
double Measure::log_density(const Vector& x) const {
  if (x.size() != impl_->dim())
    throw std::invalid_argument("log_density: dimension mismatch");
  return impl_->log_density(x);
}
double Measure::density(const Vector& x) const {
  const double l = log_density(x);
  return l == kNegInf ? 0.0 : std::exp(l);
}
std::optional<Matrix> Measure::covariance() const {
  return impl_->covariance();
}
std::optional<double> Measure::support_radius() const {
  return impl_->support_radius();
}
std::optional<lowdim::Halfspaces> Measure::support_halfspaces() const {
  return impl_->support_halfspaces();
}
std::optional<double> Measure::uniform_log_density() const {
  return impl_->uniform_log_density();
}
Vector Measure::sample(RngStream& rng) const { return impl_->sample(rng); }
Descriptor Measure::descriptor() const { return impl_->descriptor(); }

// --------------------------------------------------------- constructors ----

namespace {
void require_dim(int n, const char* what) {
  if (n < 1) throw std::invalid_argument(std::string(what) + ": need n >= 1");
}
}  // namespace

Measure gaussian(int n) {
  require_dim(n, "gaussian");
  return Measure(std::make_shared<GaussianImpl>(n));
}
Measure cube(int n) {
  require_dim(n, "cube");
  return Measure(std::make_shared<CubeImpl>(n));
}
Measure lp_ball(double p, int n) {
  require_dim(n, "lp_ball");
  if (p == 1.0) return Measure(std::make_shared<L1BallImpl>(n));
  if (p == 2.0) return Measure(std::make_shared<L2BallImpl>(n));
  if (std::isinf(p)) return cube(n);
  throw std::invalid_argument("lp_ball: p must be 1, 2 or inf");
}
Measure simplex(int n) {
  require_dim(n, "simplex");
  return Measure(std::make_shared<SimplexImpl>(n));
}
Measure laplace_product(int n) {
  require_dim(n, "laplace_product");
  return Measure(std::make_shared<LaplaceProductImpl>(n));
}

Measure builtin(const std::string& name, int n) {
  if (name == "gaussian") return gaussian(n);
  if (name == "cube") return cube(n);
  if (name == "lp1") return lp_ball(1, n);
  if (name == "lp2") return lp_ball(2, n);
  if (name == "lpinf") return lp_ball(std::numeric_limits<double>::infinity(), n);
  if (name == "simplex") return simplex(n);
  if (name == "laplace_product") return laplace_product(n);
  throw std::invalid_argument("unknown builtin measure: " + name);
}

Measure from_descriptor(const Descriptor& d) {
  auto int_param = [&](std::size_t i) {
    if (i >= d.params.size())
      throw std::invalid_argument("descriptor " + d.name +
                                  ": missing parameter");
    return static_cast<int>(std::llround(d.params[i]));
  };
  if (d.name == "gaussian") return gaussian(int_param(0));
  if (d.name == "cube") return cube(int_param(0));
  if (d.name == "lp_ball") return lp_ball(d.params.at(0), int_param(1));
  if (d.name == "simplex") return simplex(int_param(0));
  if (d.name == "laplace_product") return laplace_product(int_param(0));
  if (d.name == "product")
    return product(from_descriptor(d.children.at(0)),
                   from_descriptor(d.children.at(1)));
  if (d.name == "convolve")
    return convolve(from_descriptor(d.children.at(0)),
                    from_descriptor(d.children.at(1)));
  if (d.name == "smooth")
    return gaussian_smoothing(from_descriptor(d.children.at(0)),
                              d.params.at(0));
  if (d.name == "marginal") {
    const int n = int_param(0);
    const int k = int_param(1);
    if (static_cast<int>(d.params.size()) != 2 + n * k)
      throw std::invalid_argument("marginal descriptor: bad frame data");
    Matrix frame(n, k);
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < n; ++i) frame(i, j) = d.params[2 + j * n + i];
    return marginal(from_descriptor(d.children.at(0)),
                    grassmann::Subspace(n, frame));
  }
  if (d.name == "pushforward") {
    const int n = int_param(0);
    if (static_cast<int>(d.params.size()) != 1 + n * n + n)
      throw std::invalid_argument("pushforward descriptor: bad payload");
    Matrix map(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) map(i, j) = d.params[1 + j * n + i];
    Vector shift(n);
    for (int i = 0; i < n; ++i) shift(i) = d.params[1 + n * n + i];
    return linear_pushforward(from_descriptor(d.children.at(0)), map, shift);
  }
  throw std::invalid_argument("unknown measure descriptor: " + d.name);
}

Measure from_descriptor(const std::string& text) {
  return from_descriptor(Descriptor::parse(text));
}

Measure product(const Measure& mu, const Measure& nu) {
  if (!mu.centered() || !nu.centered())
    throw std::invalid_argument("product: factors must be centered");
  return Measure(std::make_shared<ProductImpl>(mu, nu));
}

Measure gaussian_smoothing(const Measure& mu, double xi) {
  if (xi < 0.0 || xi > 1.0)
    throw std::invalid_argument("gaussian_smoothing: xi outside [0,1]");
  if (xi == 0.0) return mu;
  if (xi == 1.0) return gaussian(mu.dim());
  return Measure(std::make_shared<SmoothedImpl>(mu, xi));
}

Measure marginal(const Measure& mu, const grassmann::Subspace& f) {
  if (mu.dim() != f.n())
    throw std::invalid_argument("marginal: dimension mismatch");
  // The standard Gaussian is rotation invariant; its marginal is exact.
  if (mu.descriptor().name == "gaussian") return gaussian(f.k());
  return Measure(std::make_shared<MarginalImpl>(mu, f));
}

Measure convolve(const Measure& a, const Measure& b) {
  return Measure(std::make_shared<ConvolveImpl>(a, b));
}

Measure linear_pushforward(const Measure& mu, const Matrix& map,
                           const Vector& shift) {
  const bool centered = mu.centered() && shift.norm() == 0.0;
  return Measure(std::make_shared<PushforwardImpl>(mu, map, shift, centered));
}

SampleBatch sample_batch(const Measure& mu, std::int64_t count,
                         std::uint64_t seed) {
  SampleBatch batch;
  batch.seed = seed;
  batch.n = count;
  batch.points.resize(count, mu.dim());
  RngStream root(seed);
  for (std::int64_t i = 0; i < count; ++i) {
    RngStream row = root.child(static_cast<std::uint64_t>(i));
    batch.points.row(i) = mu.sample(row).transpose();
  }
  return batch;
}

// ------------------------------------------------- fiber density at zero ---

namespace {

EstimateWithCI fiber_exact(const Measure& mu, const grassmann::Subspace& f) {
  const auto halfspaces = mu.support_halfspaces();
  const auto log_c = mu.uniform_log_density();
  const Matrix comp = f.complement_frame();
  lowdim::Halfspaces section;
  section.a = halfspaces->a * comp;
  section.b = halfspaces->b;
  const double vol = lowdim::hpoly_volume(section);
  EstimateWithCI est;
  est.value = std::exp(*log_c) * vol;
  est.se = 0.0;
  est.n = 0;
  est.method = "fiber-exact";
  return est;
}

}  // namespace

EstimateWithCI marginal_density_at_zero_is(const Measure& mu,
                                           const grassmann::Subspace& f,
                                           std::int64_t n_samples,
                                           const RngStream& rng) {
  if (!mu.has_density())
    throw std::invalid_argument("marginal_density_at_zero: no density");
  const int n = mu.dim();
  const int m = n - f.k();
  const Matrix comp = f.complement_frame();

  // Proposal: Gaussian matched to the covariance restricted to the
  // complement. When the support is compact but reaches far outside that
  // Gaussian, mix in a wide component so the spikes keep finite weight.
  Matrix sigma = Matrix::Identity(m, m);
  if (const auto cov = mu.covariance())
    sigma = comp.transpose() * (*cov) * comp;
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("marginal_density_at_zero: degenerate proposal");
  const Matrix chol = llt.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < m; ++i) log_det += std::log(chol(i, i));

  const auto rho = mu.support_radius();
  const bool wide = rho && *rho > 2.5 * std::sqrt(static_cast<double>(m));
  const double sigma_w = wide ? *rho / std::sqrt(static_cast<double>(m)) : 1.0;

  auto log_proposal = [&](const Vector& z, const Vector& g) {
    // g is the standard-normal pre-image under the narrow component.
    const double log_narrow =
        -0.5 * m * kLog2Pi - log_det - 0.5 * g.squaredNorm();
    if (!wide) return log_narrow;
    const double log_wide = -0.5 * m * kLog2Pi - m * std::log(sigma_w) -
                            0.5 * z.squaredNorm() / (sigma_w * sigma_w);
    const double peak = std::max(log_narrow, log_wide);
    return peak + std::log(0.5 * std::exp(log_narrow - peak) +
                           0.5 * std::exp(log_wide - peak));
  };

  std::vector<double> log_ratio(n_samples, kNegInf);
  std::int64_t misses = 0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    Vector g(m);
    for (int j = 0; j < m; ++j) g(j) = sub.normal();
    Vector z;
    if (wide && sub.uniform() < 0.5) {
      z = sigma_w * g;
      g = chol.triangularView<Eigen::Lower>().solve(z);
    } else {
      z = chol * g;
    }
    const double lf = mu.log_density(comp * z);
    if (lf == kNegInf) {
      ++misses;
      continue;
    }
    log_ratio[i] = lf - log_proposal(z, g);
  }
  const double peak = *std::max_element(log_ratio.begin(), log_ratio.end());
  EstimateWithCI est;
  est.n = n_samples;
  est.seed = rng.key();
  est.method = wide ? "fiber-is-wide" : "fiber-is";
  if (peak == kNegInf) {
    est.value = 0.0;
    est.se = 0.0;
    return est;
  }
  std::vector<double> w(n_samples);
  for (std::int64_t i = 0; i < n_samples; ++i)
    w[i] = log_ratio[i] == kNegInf ? 0.0 : std::exp(log_ratio[i] - peak);
  auto [mean, se] = stats::mean_se(w);
  est.value = std::exp(peak) * mean;
  est.se = std::exp(peak) * se;
  if (misses > 0)
    est.method += ";support_misses=" + std::to_string(misses);
  return est;
}

EstimateWithCI marginal_density_at_zero(const Measure& mu,
                                        const grassmann::Subspace& f,
                                        std::int64_t n_samples,
                                        const RngStream& rng) {
  if (!mu.has_density())
    throw std::invalid_argument("marginal_density_at_zero: no density");
  if (mu.dim() != f.n())
    throw std::invalid_argument("marginal_density_at_zero: dim mismatch");
  const int m = mu.dim() - f.k();
  if (mu.uniform_log_density() && mu.support_halfspaces() && m <= 3)
    return fiber_exact(mu, f);
  return marginal_density_at_zero_is(mu, f, n_samples, rng);
}

// --------------------------------------------------- covariance / whiten ---

CovarianceEstimate covariance_estimate(const Measure& mu, std::int64_t n,
                                       const RngStream& rng) {
  if (n < 100)
    throw std::invalid_argument("covariance_estimate: need N >= 100");
  const int d = mu.dim();
  Matrix pts(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    pts.row(i) = mu.sample(sub).transpose();
  }
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  pts.rowwise() -= mean;
  CovarianceEstimate out;
  out.n = n;
  out.seed = rng.key();
  out.cov = (pts.transpose() * pts) / static_cast<double>(n);
  out.se = Matrix(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double var = 0.0;
      for (std::int64_t r = 0; r < n; ++r) {
        const double p = pts(r, i) * pts(r, j) - out.cov(i, j);
        var += p * p;
      }
      out.se(i, j) = std::sqrt(var / static_cast<double>(n - 1) /
                               static_cast<double>(n));
    }
  return out;
}

Measure isotropize(const Measure& mu, std::int64_t n, const RngStream& rng) {
  const int d = mu.dim();
  Matrix pts(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    pts.row(i) = mu.sample(sub).transpose();
  }
  const Vector mean = pts.colwise().mean().transpose();
  pts.rowwise() -= mean.transpose();
  const Matrix cov = (pts.transpose() * pts) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector lam = eig.eigenvalues();
  if (!(lam.minCoeff() > 0.0) ||
      lam.maxCoeff() / lam.minCoeff() > 1e8)
    throw std::runtime_error("isotropize: degenerate empirical covariance");
  const Matrix root_inv = eig.eigenvectors() *
                          lam.cwiseSqrt().cwiseInverse().asDiagonal() *
                          eig.eigenvectors().transpose();
  // Mean subtraction recenters, so the result is centered by construction.
  return Measure(std::make_shared<PushforwardImpl>(mu, root_inv, mean, true));
}

std::pair<Measure, Measure> special_measure_pair(int k, int n, double xi,
                                                 const std::string& base) {
  if (k < 1 || k >= n)
    throw std::invalid_argument("special_measure_pair: need 1 <= k < n");
  if (!(xi > 0.0 && xi < 1.0))
    throw std::invalid_argument("special_measure_pair: xi in (0,1)");
  const Measure mu1 = gaussian_smoothing(builtin(base, k), xi);
  const Measure mu2 = product(mu1, gaussian(n - k));
  return {mu1, mu2};
}

}  // namespace grasslab::measures
