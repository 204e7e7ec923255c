#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "slfv/event_model.hpp"
#include "slfv/rng.hpp"
#include "slfv/torus.hpp"

namespace slfv {

/// Type distribution rho(x, .) over K types, constant on each cell of a G x G
/// grid covering T(L). Cell (ix, iy) has index iy * G + ix and covers
/// [-L/2 + ix h, -L/2 + (ix+1) h) x [-L/2 + iy h, -L/2 + (iy+1) h), h = L/G.
class TypeField {
 public:
  /// Every cell starts as the point mass on type 0.
  TypeField(double sidelength, int grid, int types);

  static TypeField monomorphic(double sidelength, int grid, int types, int type);
  /// Uniform probability vector (1/K, ..., 1/K) in every cell.
  static TypeField uniform(double sidelength, int grid, int types);
  /// Squares of `square_cells` x `square_cells` cells alternating between
  /// types 0 and 1.
  static TypeField checkerboard(double sidelength, int grid, int square_cells);

  const TorusSpec& torus() const { return torus_; }
  int grid() const { return grid_; }
  int types() const { return types_; }
  double cell_size() const { return torus_.sidelength() / grid_; }
  std::size_t cells() const { return static_cast<std::size_t>(grid_) * grid_; }

  std::size_t cell_of(TorusPoint p) const;
  TorusPoint cell_center(std::size_t cell) const;
  bool is_cell_center(TorusPoint p, double tol = 1e-9) const;

  std::span<const double> cell(std::size_t c) const {
    return {data_.data() + c * types_, static_cast<std::size_t>(types_)};
  }
  std::span<double> cell(std::size_t c) {
    return {data_.data() + c * types_, static_cast<std::size_t>(types_)};
  }
  void set_cell(std::size_t c, std::span<const double> probs);

  /// rho(p)({type}), read from the cell containing p.
  double value(TorusPoint p, int type) const { return cell(cell_of(p))[type]; }

  /// Largest |sum - 1| over cells.
  double max_normalization_error() const;
  /// Throws std::logic_error unless every cell is a probability vector
  /// (entries >= 0, sum within 1e-12 of one).
  void validate() const;

  void write_binary(std::ostream& out) const;
  static TypeField read_binary(std::istream& in);
  /// One row per cell: x, y, p_0, ..., p_{K-1}.
  void write_csv(std::ostream& out) const;

  const std::vector<double>& data() const { return data_; }
  friend bool operator==(const TypeField& a, const TypeField& b) {
    return a.torus_.sidelength() == b.torus_.sidelength() && a.grid_ == b.grid_ &&
           a.types_ == b.types_ && a.data_ == b.data_;
  }

 private:
  TorusSpec torus_;
  int grid_;
  int types_;
  std::vector<double> data_;
};

struct ReproductionEvent {
  TorusPoint center;
  double radius = 0.0;
  double impact = 0.0;
};

/// Applies one event: a parent location z uniform in the ball, a type k drawn
/// from the cell containing z, and (1-u) rho + u delta_k on every cell whose
/// centre lies in the ball. Returns false (field untouched) when the radius
/// is below one cell diagonal.
bool step_type_field(TypeField& field, const ReproductionEvent& event, Rng& rng);

struct ForwardRun {
  TypeField field;
  std::uint64_t events = 0;
  std::uint64_t skipped = 0;
};

/// Evolves the field over [0, t_end] under the small event class, with event
/// centres uniform on the torus at total rate L^2 times the radius mass.
ForwardRun run_forward(const TypeField& field0, const EventLaw& law, double t_end, Rng& rng,
                       std::uint64_t max_events = 1'000'000'000);

struct Individual {
  TorusPoint position;
  int type = 0;
};

struct IndividualPopulation {
  std::vector<Individual> individuals;
  double intensity = 1.0;  // m
};

/// Poisson(m L^2) individuals placed uniformly with uniformly random types.
IndividualPopulation poisson_population(const TorusSpec& torus, double intensity, int types,
                                        Rng& rng);

/// One event of the individual-based model: if the ball is occupied, a parent
/// is chosen uniformly among occupants, each occupant dies with probability u,
/// and Poisson(u m |B|) offspring of the parent's type are placed uniformly in
/// the ball.
void step_individual_model(IndividualPopulation& pop, const ReproductionEvent& event,
                           const TorusSpec& torus, Rng& rng);

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double lower = 0.0;  // 99% interval
  double upper = 0.0;
};

MomentEstimate estimate_moment(std::span<const double> samples);

struct DualityReport {
  MomentEstimate forward;
  MomentEstimate dual;
  bool overlap = false;
};

struct DualityRequest {
  std::vector<TorusPoint> points;  // cell centres
  std::vector<int> types;
  double time = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Estimates E[prod_i rho_t(x_i)({a_i})] by running the field forward, and the
/// same moment through the dual started from the points with labels snapped
/// to cell centres: each block contributes rho_0 at its label of the common
/// type of its members, or zero when its members ask for different types.
DualityReport duality_check(const TypeField& field0, const DualityRequest& request,
                            const EventLaw& law);

}  // namespace slfv
