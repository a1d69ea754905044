#pragma once

// Gaussian fields and log-Gaussian Cox process simulation on (masked) 1-D and
// 2-D unit windows, together with the uniform prior box and the logit
// transforms between constrained and unconstrained parameter coordinates.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lgcpflow/rng.hpp"

namespace lgcpflow {

enum class Coords { constrained, unconstrained };

// (mu, rho, sigma2) in either coordinate system. Simulation code accepts any
// constrained value with rho > 0 and sigma2 >= 0; the prior box is stricter.
struct ThetaParams {
  double mu = 0.0;
  double rho = 0.0;
  double sigma2 = 0.0;
  Coords coords = Coords::constrained;

  std::array<double, 3> as_array() const { return {mu, rho, sigma2}; }
  static ThetaParams from_array(const std::array<double, 3>& v, Coords c) {
    return {v[0], v[1], v[2], c};
  }
  friend bool operator==(const ThetaParams&, const ThetaParams&) = default;
};

inline constexpr double kRhoFloor = 1e-6;
inline constexpr double kTrainingUnitClamp = 1e-9;

// Uniform prior bounds: mu ~ U(3, 6), rho ~ U(1e-6, 0.15 |W|), sigma2 ~ U(0, 2).
struct PriorBox {
  std::array<double, 3> lo{3.0, kRhoFloor, 0.0};
  std::array<double, 3> hi{6.0, 0.15, 2.0};

  static PriorBox for_window_measure(double window_measure);
  bool strictly_contains(const ThetaParams& theta) const;
  double width(std::size_t k) const { return hi[k] - lo[k]; }
};

struct Window {
  int dim = 2;
  double extent = 1.0;
  int grid = 50;  // cells per axis

  Window() = default;
  Window(int dim, int grid);

  std::size_t cell_count() const;
  double cell_width() const { return extent / grid; }
  double cell_area() const;
  double measure() const;  // |W|
  static Window default_for(int dim);
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Admissible/excluded grid cells, row-major with index iy * G + ix and the
// origin at the bottom-left corner.
class DomainMask {
 public:
  DomainMask() = default;
  explicit DomainMask(Window window, bool admissible = true);
  DomainMask(Window window, std::vector<std::uint8_t> cells);

  const Window& window() const { return window_; }
  int dim() const { return window_.dim; }
  std::size_t size() const { return cells_.size(); }
  bool admissible(std::size_t cell) const { return cells_[cell] != 0; }
  void set(std::size_t cell, bool admissible);
  std::size_t admissible_count() const { return admissible_count_; }
  double admissible_area() const { return admissible_area_; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  std::size_t cell_of(const Point& p) const;
  Point cell_center(std::size_t cell) const;
  Point cell_origin(std::size_t cell) const;

  // Plain-text form: header "mask <G_x> <G_y>", rows top-to-bottom of '0'/'1'.
  // A 1-D mask is written as "mask G 1" with a single row.
  static DomainMask read(std::istream& in);
  static DomainMask read_file(const std::string& path);
  void write(std::ostream& out) const;

  friend bool operator==(const DomainMask& a, const DomainMask& b) {
    return a.window_.dim == b.window_.dim && a.window_.grid == b.window_.grid &&
           a.cells_ == b.cells_;
  }

 private:
  void recount();

  Window window_{};
  std::vector<std::uint8_t> cells_;
  std::size_t admissible_count_ = 0;
  double admissible_area_ = 0.0;
};

struct GridField {
  DomainMask mask;
  std::vector<double> values;  // one per cell, excluded cells included
};

struct PointPattern {
  int dim = 2;
  std::vector<Point> points;

  std::size_t n() const { return points.size(); }
  bool empty() const { return points.empty(); }

  // CSV with header "x" (1-D) or "x,y" (2-D).
  static PointPattern read_csv(std::istream& in);
  static PointPattern read_csv_file(const std::string& path);
  void write_csv(std::ostream& out) const;
};

// sigma2 * exp(-|si - sj| / rho).
double exp_cov(const Point& si, const Point& sj, double sigma2, double rho);

// Lower Cholesky factor of the cell-center covariance for one (rho, sigma2),
// reusable across any number of field draws.
class GaussianFieldSampler {
 public:
  GaussianFieldSampler(const Window& window, double rho, double sigma2);

  // mean + L z for z ~ N(0, I); consumes exactly cell_count() normals unless
  // sigma2 == 0, in which case no randomness is consumed.
  std::vector<double> draw(double mean, Rng& rng) const;
  // mean + L z for a caller-supplied whitened vector.
  void color(double mean, std::span<const double> whitened, std::span<double> out) const;

  const Window& window() const { return window_; }
  double jitter() const { return jitter_; }
  bool degenerate() const { return degenerate_; }
  const Eigen::MatrixXd& factor() const { return chol_; }

 private:
  Window window_;
  double rho_;
  double sigma2_;
  double jitter_ = 0.0;
  bool degenerate_ = false;
  Eigen::MatrixXd chol_;
};

Eigen::MatrixXd grid_covariance(const Window& window, double rho, double sigma2);

GridField sample_gp_grid(const ThetaParams& theta, const DomainMask& mask, std::uint64_t seed);

inline constexpr double kDefaultCountCap = 1e6;

// Holds the factorized covariance so repeated simulation at one theta pays
// for the Cholesky once.
class LgcpSimulator {
 public:
  LgcpSimulator(const ThetaParams& theta, DomainMask mask, double count_cap = kDefaultCountCap);

  PointPattern simulate(std::uint64_t seed) const;
  PointPattern simulate(std::uint64_t seed, GridField* field_out) const;

  const ThetaParams& theta() const { return theta_; }
  const DomainMask& mask() const { return mask_; }

 private:
  ThetaParams theta_;
  DomainMask mask_;
  double count_cap_;
  GaussianFieldSampler sampler_;
};

PointPattern simulate_lgcp(const ThetaParams& theta, const DomainMask& mask, std::uint64_t seed,
                           double count_cap = kDefaultCountCap);

// exp(mu + sigma2 / 2) * admissible area.
double expected_count(const ThetaParams& theta, const DomainMask& mask);

ThetaParams sample_prior(const Window& window, std::uint64_t seed);
ThetaParams sample_prior(const PriorBox& box, Rng& rng);

// Linear map onto (0, 1) by the prior bounds, then logit.
ThetaParams to_unconstrained(const ThetaParams& theta, const PriorBox& box);
// As above, with unit coordinates clamped to [1e-9, 1 - 1e-9]; used on
// simulated training parameters, which may sit arbitrarily close to a bound.
ThetaParams to_unconstrained_clamped(const ThetaParams& theta, const PriorBox& box);
// Inverse logit then linear map; the result is always strictly inside the box.
ThetaParams to_constrained(const ThetaParams& theta, const PriorBox& box);

// log(d theta / d u) summed over components, for the unconstrained point u.
double log_jacobian_unconstrained(const ThetaParams& u, const PriorBox& box);

// Per-cell point counts; throws DomainError for points in excluded cells.
std::vector<int> cell_counts(const PointPattern& pattern, const DomainMask& mask);

// sum over admissible cells of -exp(Z_c) |cell| plus sum over points of Z at
// the point's cell: the discretized Poisson log-likelihood up to a constant.
double grid_loglik(const GridField& field, const PointPattern& pattern);
double grid_loglik(std::span<const double> field, std::span<const int> counts,
                   const DomainMask& mask);

}  // namespace lgcpflow
