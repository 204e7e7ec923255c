#include "slfv/forward.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "slfv/coalescent.hpp"
#include "slfv/errors.hpp"
#include "slfv/parallel.hpp"

namespace slfv {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'L', 'F', 'V', 'G', 'R', 'I', 'D'};

template <class U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw std::runtime_error("truncated type-field file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

// --- TypeField ----------------------------------------------------------------

TypeField::TypeField(double sidelength, int grid, int types)
    : torus_(sidelength), grid_(grid), types_(types) {
  if (grid < 1) throw std::invalid_argument("type field grid must be at least 1");
  if (types < 1 || types > 256) throw std::invalid_argument("type alphabet size must be in [1, 256]");
  data_.assign(cells() * types_, 0.0);
  for (std::size_t c = 0; c < cells(); ++c) data_[c * types_] = 1.0;
}

TypeField TypeField::monomorphic(double sidelength, int grid, int types, int type) {
  if (type < 0 || type >= types) throw std::invalid_argument("type outside the alphabet");
  TypeField f(sidelength, grid, types);
  std::fill(f.data_.begin(), f.data_.end(), 0.0);
  for (std::size_t c = 0; c < f.cells(); ++c) f.data_[c * types + type] = 1.0;
  return f;
}

TypeField TypeField::uniform(double sidelength, int grid, int types) {
  TypeField f(sidelength, grid, types);
  std::fill(f.data_.begin(), f.data_.end(), 1.0 / types);
  return f;
}

TypeField TypeField::checkerboard(double sidelength, int grid, int square_cells) {
  if (square_cells < 1) throw std::invalid_argument("checkerboard squares need at least one cell");
  TypeField f(sidelength, grid, 2);
  for (int iy = 0; iy < grid; ++iy) {
    for (int ix = 0; ix < grid; ++ix) {
      const int t = (ix / square_cells + iy / square_cells) % 2;
      const std::size_t c = static_cast<std::size_t>(iy) * grid + ix;
      f.data_[2 * c] = t == 0 ? 1.0 : 0.0;
      f.data_[2 * c + 1] = t == 1 ? 1.0 : 0.0;
    }
  }
  return f;
}

std::size_t TypeField::cell_of(TorusPoint p) const {
  const TorusPoint q = torus_.canonical(p);
  const double h = cell_size();
  const int ix = std::clamp(static_cast<int>(std::floor((q.x + torus_.half()) / h)), 0, grid_ - 1);
  const int iy = std::clamp(static_cast<int>(std::floor((q.y + torus_.half()) / h)), 0, grid_ - 1);
  return static_cast<std::size_t>(iy) * grid_ + ix;
}

TorusPoint TypeField::cell_center(std::size_t c) const {
  const double h = cell_size();
  const auto ix = static_cast<double>(c % grid_);
  const auto iy = static_cast<double>(c / grid_);
  return {-torus_.half() + (ix + 0.5) * h, -torus_.half() + (iy + 0.5) * h};
}

bool TypeField::is_cell_center(TorusPoint p, double tol) const {
  return torus_distance(p, cell_center(cell_of(p)), torus_) <= tol;
}

void TypeField::set_cell(std::size_t c, std::span<const double> probs) {
  if (probs.size() != static_cast<std::size_t>(types_)) {
    throw std::invalid_argument("cell vector has the wrong number of types");
  }
  std::copy(probs.begin(), probs.end(), cell(c).begin());
}

double TypeField::max_normalization_error() const {
  double worst = 0.0;
  for (std::size_t c = 0; c < cells(); ++c) {
    double s = 0.0;
    for (double v : cell(c)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void TypeField::validate() const {
  for (double v : data_) {
    if (!(v >= 0.0)) throw std::logic_error("type field has a negative or NaN entry");
  }
  if (max_normalization_error() > 1e-12) {
    throw std::logic_error("type field cell does not sum to one");
  }
}

void TypeField::write_binary(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put_le(out, std::bit_cast<std::uint64_t>(torus_.sidelength()));
  put_le(out, static_cast<std::uint32_t>(grid_));
  put_le(out, static_cast<std::uint32_t>(types_));
  for (double v : data_) put_le(out, std::bit_cast<std::uint64_t>(v));
}

TypeField TypeField::read_binary(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a type-field file");
  const double L = std::bit_cast<double>(get_le<std::uint64_t>(in));
  const auto G = get_le<std::uint32_t>(in);
  const auto K = get_le<std::uint32_t>(in);
  TypeField f(L, static_cast<int>(G), static_cast<int>(K));
  for (double& v : f.data_) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return f;
}

void TypeField::write_csv(std::ostream& out) const {
  out << "x,y";
  for (int k = 0; k < types_; ++k) out << ",p" << k;
  out << '\n';
  char buf[32];
  for (std::size_t c = 0; c < cells(); ++c) {
    const TorusPoint p = cell_center(c);
    std::snprintf(buf, sizeof buf, "%.17g", p.x);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", p.y);
    out << buf;
    for (double v : cell(c)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

// --- forward dynamics ---------------------------------------------------------------

bool step_type_field(TypeField& field, const ReproductionEvent& event, Rng& rng) {
  if (!(event.impact >= 0.0 && event.impact <= 1.0)) {
    throw std::invalid_argument("impact must lie in [0,1]");
  }
  const double h = field.cell_size();
  if (event.radius < h * std::numbers::sqrt2) return false;
  const auto& torus = field.torus();
  const TorusPoint z = uniform_in_ball(event.center, event.radius, torus, rng);
  const auto parent = field.cell(field.cell_of(z));
  double v = rng.uniform();
  int k = field.types() - 1;
  for (int t = 0; t < field.types(); ++t) {
    if (v < parent[t]) {
      k = t;
      break;
    }
    v -= parent[t];
  }
  const double u = event.impact;
  if (u == 0.0) return true;
  const int G = field.grid();
  // Offsets from the centre cell that can reach the ball; the whole grid when
  // that window would wrap onto itself.
  const int reach = static_cast<int>(std::ceil(event.radius / h)) + 1;
  const bool whole = 2 * reach + 1 >= G;
  const std::size_t c0 = field.cell_of(event.center);
  const int cx = whole ? 0 : static_cast<int>(c0 % G);
  const int cy = whole ? 0 : static_cast<int>(c0 / G);
  const int lo = whole ? 0 : -reach;
  const int hi = whole ? G - 1 : reach;
  const double r2 = event.radius * event.radius;
  for (int dy = lo; dy <= hi; ++dy) {
    const int iy = ((cy + dy) % G + G) % G;
    for (int dx = lo; dx <= hi; ++dx) {
      const int ix = ((cx + dx) % G + G) % G;
      const std::size_t c = static_cast<std::size_t>(iy) * G + ix;
      if (torus.distance_sq(field.cell_center(c), event.center) > r2) continue;
      auto cell = field.cell(c);
      for (int t = 0; t < field.types(); ++t) cell[t] *= 1.0 - u;
      cell[k] += u;
    }
  }
  return true;
}

ForwardRun run_forward(const TypeField& field0, const EventLaw& law, double t_end, Rng& rng,
                       std::uint64_t max_events) {
  if (law.large_active()) throw std::invalid_argument("forward runs use the small event class only");
  if (!(t_end >= 0.0)) throw std::invalid_argument("forward run needs a non-negative end time");
  const auto& torus = field0.torus();
  const double mass = law.small.radii.total_mass();
  if (!std::isfinite(mass)) throw std::invalid_argument("radius measure must have finite mass");
  if (law.small.radii.max_radius() > torus.max_distance()) {
    throw std::invalid_argument("event radius exceeds the diameter of the torus");
  }
  ForwardRun run{field0, 0, 0};
  const double rate = torus.area() * mass;
  if (!(rate > 0.0)) return run;
  double t = rng.exponential(rate);
  while (t <= t_end) {
    if (++run.events > max_events) {
      throw SimulationTimeout("forward run exceeded " + std::to_string(max_events) + " events");
    }
    ReproductionEvent e;
    e.center = uniform_on_torus(torus, rng);
    e.radius = law.small.radii.sample(rng);
    e.impact = law.small.impact.at(e.radius).sample(rng);
    if (!step_type_field(run.field, e, rng)) ++run.skipped;
    t += rng.exponential(rate);
  }
  return run;
}

// --- individual-based model ------------------------------------------------------------

IndividualPopulation poisson_population(const TorusSpec& torus, double intensity, int types,
                                        Rng& rng) {
  if (!(intensity > 0.0)) throw std::invalid_argument("intensity must be positive");
  IndividualPopulation pop;
  pop.intensity = intensity;
  const auto n = rng.poisson(intensity * torus.area());
  pop.individuals.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    pop.individuals.push_back({uniform_on_torus(torus, rng), static_cast<int>(rng.index(types))});
  }
  return pop;
}

void step_individual_model(IndividualPopulation& pop, const ReproductionEvent& event,
                           const TorusSpec& torus, Rng& rng) {
  if (!(event.impact >= 0.0 && event.impact <= 1.0)) {
    throw std::invalid_argument("impact must lie in [0,1]");
  }
  const double r2 = event.radius * event.radius;
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < pop.individuals.size(); ++i) {
    if (torus.distance_sq(pop.individuals[i].position, event.center) <= r2) inside.push_back(i);
  }
  if (inside.empty()) return;
  const int type = pop.individuals[inside[rng.index(inside.size())]].type;
  std::vector<char> dead(pop.individuals.size(), 0);
  for (std::size_t i : inside) dead[i] = rng.bernoulli(event.impact);
  std::vector<Individual> next;
  next.reserve(pop.individuals.size());
  for (std::size_t i = 0; i < pop.individuals.size(); ++i) {
    if (!dead[i]) next.push_back(pop.individuals[i]);
  }
  const auto births =
      rng.poisson(event.impact * pop.intensity * torus_ball_volume(event.radius, torus));
  for (std::uint64_t b = 0; b < births; ++b) {
    next.push_back({uniform_in_ball(event.center, event.radius, torus, rng), type});
  }
  pop.individuals = std::move(next);
}

// --- duality -------------------------------------------------------------------------

MomentEstimate estimate_moment(std::span<const double> samples) {
  MomentEstimate m;
  const auto n = static_cast<double>(samples.size());
  if (samples.empty()) return m;
  double s = 0.0, s2 = 0.0;
  for (double v : samples) {
    s += v;
    s2 += v * v;
  }
  m.mean = s / n;
  const double var = samples.size() > 1 ? std::max(0.0, (s2 - n * m.mean * m.mean) / (n - 1.0)) : 0.0;
  m.std_error = std::sqrt(var / n);
  constexpr double z99 = 2.5758293035489004;
  m.lower = m.mean - z99 * m.std_error;
  m.upper = m.mean + z99 * m.std_error;
  return m;
}

DualityReport duality_check(const TypeField& field0, const DualityRequest& request,
                            const EventLaw& law) {
  const std::size_t p = request.points.size();
  if (p == 0 || request.types.size() != p) {
    throw std::invalid_argument("duality check needs one type per sample point");
  }
  for (int a : request.types) {
    if (a < 0 || a >= field0.types()) {
      throw std::invalid_argument("sample type " + std::to_string(a) + " outside the alphabet of " +
                                  std::to_string(field0.types()) + " types");
    }
  }
  for (const auto& x : request.points) {
    if (!field0.is_cell_center(x)) throw std::invalid_argument("sample points must be cell centres");
  }
  const auto& torus = field0.torus();
  std::vector<TorusPoint> points;
  for (const auto& x : request.points) points.push_back(field0.cell_center(field0.cell_of(x)));

  std::vector<double> forward(request.replicates), dual(request.replicates);
  constexpr auto kForward = stream_id("duality-forward");
  constexpr auto kDual = stream_id("duality-dual");
  parallel_for(0, request.replicates, request.threads, [&](std::size_t rep) {
    Rng rng(derive_seed(request.seed, kForward, rep));
    const auto run = run_forward(field0, law, request.time, rng);
    double prod = 1.0;
    for (std::size_t i = 0; i < p; ++i) prod *= run.field.value(points[i], request.types[i]);
    forward[rep] = prod;
  });
  SimulationOptions opt;
  opt.horizon = request.time;
  opt.track_pairs = false;
  opt.snap_grid = field0.grid();
  parallel_for(0, request.replicates, request.threads, [&](std::size_t rep) {
    Rng rng(derive_seed(request.seed, kDual, rep));
    const auto rec = simulate_genealogy(points, law, torus, opt, rng);
    double prod = 1.0;
    for (const auto& b : rec.final_state.blocks()) {
      const int a = request.types[b.members.front()];
      const bool agree = std::all_of(b.members.begin(), b.members.end(),
                                     [&](int m) { return request.types[m] == a; });
      prod *= agree ? field0.value(b.label, a) : 0.0;
      if (prod == 0.0) break;
    }
    dual[rep] = prod;
  });
  DualityReport report;
  report.forward = estimate_moment(forward);
  report.dual = estimate_moment(dual);
  report.overlap = report.forward.lower <= report.dual.upper && report.dual.lower <= report.forward.upper;
  return report;
}

}  // namespace slfv
