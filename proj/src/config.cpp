#include "slfv/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "slfv/errors.hpp"
#include "slfv/forward.hpp"

namespace slfv {

namespace {

// --- text grammar -----------------------------------------------------------------

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : s_(text), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected text after value: '" + std::string(s_.substr(pos_)) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '[') return parse_list();
    if (c == '"') return parse_string();
    return parse_bare();
  }

  ConfigValue parse_list() {
    ++pos_;
    std::vector<ConfigValue> items;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated list");
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated list");
      if (s_[pos_] == ',') {
        ++pos_;
      } else if (s_[pos_] != ']') {
        fail("expected ',' or ']' in list");
      }
    }
    return {std::move(items), line_};
  }

  ConfigValue parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out.push_back(s_[pos_++]);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return {std::move(out), line_};
  }

  ConfigValue parse_bare() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
    const std::string tok(s_.substr(start, pos_ - start));
    if (tok == "true") return {true, line_};
    if (tok == "false") return {false, line_};
    if (tok == "inf" || tok == "+inf") return {std::numeric_limits<double>::infinity(), line_};
    std::string cleaned;
    for (char ch : tok) {
      if (ch != '_') cleaned.push_back(ch);
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cleaned, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (cleaned.empty() || used != cleaned.size()) fail("cannot parse value '" + tok + "'");
    return {v, line_};
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

// --- typed access ---------------------------------------------------------------------

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

class Reader {
 public:
  explicit Reader(const ConfigTree& tree) : tree_(tree) {}

  std::vector<std::string> errors;

  bool has_section(const std::string& s) const { return tree_.contains(s); }
  bool has(const std::string& s, const std::string& k) const {
    auto it = tree_.find(s);
    return it != tree_.end() && it->second.contains(k);
  }

  const ConfigValue* get(const std::string& s, const std::string& k) {
    used_.insert({s, k});
    auto it = tree_.find(s);
    if (it == tree_.end()) return nullptr;
    auto jt = it->second.find(k);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  void error(const ConfigValue* v, const std::string& s, const std::string& k, const std::string& msg) {
    errors.push_back((v ? "line " + std::to_string(v->line) + ": " : std::string()) + where(s, k) +
                     ": " + msg);
  }

  std::optional<double> number(const std::string& s, const std::string& k) {
    const auto* v = get(s, k);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<double>(&v->data)) return *d;
    error(v, s, k, "expected a number");
    return std::nullopt;
  }

  double number_or(const std::string& s, const std::string& k, double fallback) {
    return number(s, k).value_or(fallback);
  }

  double required_number(const std::string& s, const std::string& k) {
    if (!has(s, k)) {
      error(nullptr, s, k, "required key missing");
      get(s, k);
      return std::nan("");
    }
    return number(s, k).value_or(std::nan(""));
  }

  std::optional<long long> integer(const std::string& s, const std::string& k, long long lo, long long hi) {
    const auto* v = get(s, k);
    const auto d = number(s, k);
    if (!d) return std::nullopt;
    if (*d != std::floor(*d) || *d < static_cast<double>(lo) || *d > static_cast<double>(hi)) {
      error(v, s, k, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return static_cast<long long>(*d);
  }

  std::optional<std::string> string(const std::string& s, const std::string& k) {
    const auto* v = get(s, k);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<std::string>(&v->data)) return *d;
    error(v, s, k, "expected a string");
    return std::nullopt;
  }

  std::optional<bool> boolean(const std::string& s, const std::string& k) {
    const auto* v = get(s, k);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<bool>(&v->data)) return *d;
    error(v, s, k, "expected true or false");
    return std::nullopt;
  }

  /// A number or a flat list of numbers.
  std::optional<std::vector<double>> numbers(const std::string& s, const std::string& k) {
    const auto* v = get(s, k);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<double>(&v->data)) return std::vector<double>{*d};
    if (const auto* l = std::get_if<std::vector<ConfigValue>>(&v->data)) {
      std::vector<double> out;
      for (const auto& item : *l) {
        const auto* d = std::get_if<double>(&item.data);
        if (!d) {
          error(v, s, k, "expected a list of numbers");
          return std::nullopt;
        }
        out.push_back(*d);
      }
      return out;
    }
    error(v, s, k, "expected a number or a list of numbers");
    return std::nullopt;
  }

  /// A list of numeric lists, each of the given width (0: any).
  std::optional<std::vector<std::vector<double>>> rows(const std::string& s, const std::string& k,
                                                       std::size_t width) {
    const auto* v = get(s, k);
    if (!v) return std::nullopt;
    const auto* l = std::get_if<std::vector<ConfigValue>>(&v->data);
    std::vector<std::vector<double>> out;
    bool ok = l != nullptr;
    if (l) {
      for (const auto& item : *l) {
        const auto* row = std::get_if<std::vector<ConfigValue>>(&item.data);
        if (!row || (width > 0 && row->size() != width)) {
          ok = false;
          break;
        }
        std::vector<double> r;
        for (const auto& x : *row) {
          const auto* d = std::get_if<double>(&x.data);
          if (!d) {
            ok = false;
            break;
          }
          r.push_back(*d);
        }
        out.push_back(std::move(r));
      }
    }
    if (!ok) {
      error(v, s, k,
            width > 0 ? "expected a list of " + std::to_string(width) + "-element numeric lists"
                      : "expected a list of numeric lists");
      return std::nullopt;
    }
    return out;
  }

  std::optional<PowerLaw> power_law(const std::string& s, const std::string& k) {
    const auto* v = get(s, k);
    const auto xs = numbers(s, k);
    if (!xs) return std::nullopt;
    if (xs->empty() || xs->size() > 3) {
      error(v, s, k, "expected coef or [coef, power, log_power]");
      return std::nullopt;
    }
    PowerLaw p;
    p.coef = (*xs)[0];
    if (xs->size() > 1) p.power = (*xs)[1];
    if (xs->size() > 2) p.log_power = (*xs)[2];
    return p;
  }

  void report_unknown() {
    for (const auto& [section, keys] : tree_) {
      for (const auto& [key, value] : keys) {
        if (!used_.contains({section, key})) error(&value, section, key, "unknown key");
      }
    }
  }

 private:
  const ConfigTree& tree_;
  std::set<std::pair<std::string, std::string>> used_;
};

std::optional<EventClass> read_class(Reader& r, const std::string& s) {
  if (!r.has_section(s)) return std::nullopt;
  const std::size_t before = r.errors.size();
  std::vector<RadiusAtom> atoms;
  std::optional<RadiusDensity> density;
  if (r.has(s, "radius")) {
    const double radius = r.number(s, "radius").value_or(std::nan(""));
    atoms.push_back({radius, r.number_or(s, "radius_weight", 1.0)});
  } else {
    r.get(s, "radius_weight");
  }
  if (auto rows = r.rows(s, "radius_atoms", 2)) {
    for (const auto& row : *rows) atoms.push_back({row[0], row[1]});
  }
  if (auto rows = r.rows(s, "radius_density", 2)) {
    RadiusDensity d;
    for (const auto& row : *rows) {
      d.radii.push_back(row[0]);
      d.values.push_back(row[1]);
    }
    density = std::move(d);
  }
  if (atoms.empty() && !density && !r.has(s, "radius_atoms") && !r.has(s, "radius_density")) {
    r.error(nullptr, s, "radius", "give radius, radius_atoms or radius_density");
  }

  const int impact_forms = r.has(s, "impact") + r.has(s, "impact_beta") + r.has(s, "impact_table");
  if (impact_forms != 1) {
    r.error(nullptr, s, "impact", "give exactly one of impact, impact_beta, impact_table");
  }
  std::optional<ImpactDistribution> impact;
  const auto* iv = r.get(s, "impact");
  const auto* bv = r.get(s, "impact_beta");
  const auto* tv = r.get(s, "impact_table");
  try {
    if (auto u = r.number(s, "impact")) impact = ImpactDistribution::point(*u);
  } catch (const std::exception& e) {
    r.error(iv, s, "impact", e.what());
  }
  if (auto ab = r.numbers(s, "impact_beta")) {
    if (ab->size() != 2) {
      r.error(bv, s, "impact_beta", "expected [a, b]");
    } else {
      try {
        impact = ImpactDistribution::beta((*ab)[0], (*ab)[1]);
      } catch (const std::exception& e) {
        r.error(bv, s, "impact_beta", e.what());
      }
    }
  }
  if (auto rows = r.rows(s, "impact_table", 2)) {
    std::vector<double> grid, dens;
    for (const auto& row : *rows) {
      grid.push_back(row[0]);
      dens.push_back(row[1]);
    }
    try {
      impact = ImpactDistribution::table(std::move(grid), std::move(dens));
    } catch (const std::exception& e) {
      r.error(tv, s, "impact_table", e.what());
    }
  }
  if (r.errors.size() != before || !impact) return std::nullopt;
  try {
    return EventClass{RadiusMeasure(std::move(atoms), std::move(density)), *impact};
  } catch (const std::exception& e) {
    r.error(nullptr, s, "radius", e.what());
    return std::nullopt;
  }
}

}  // namespace

ConfigTree parse_config_tree(std::string_view text) {
  ConfigTree tree;
  tree[""];
  std::vector<std::string> errors;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view content = trim(strip_comment(raw));
    if (content.empty()) continue;
    const std::string prefix = "line " + std::to_string(line) + ": ";
    if (content.front() == '[') {
      if (content.back() != ']') {
        errors.push_back(prefix + "malformed section header");
        continue;
      }
      const std::string_view name = trim(content.substr(1, content.size() - 2));
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_key_char)) {
        errors.push_back(prefix + "invalid section name");
        continue;
      }
      section = std::string(name);
      if (tree.contains(section)) errors.push_back(prefix + "duplicate section [" + section + "]");
      tree[section];
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(prefix + "expected 'key = value'");
      continue;
    }
    const std::string key(trim(content.substr(0, eq)));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char)) {
      errors.push_back(prefix + "invalid key '" + key + "'");
      continue;
    }
    try {
      ConfigValue v = ValueParser(trim(content.substr(eq + 1)), line).parse_all();
      auto& table = tree[section];
      if (table.contains(key)) {
        errors.push_back(prefix + "duplicate key " + where(section, key));
      } else {
        table.emplace(key, std::move(v));
      }
    } catch (const std::invalid_argument& e) {
      errors.push_back(prefix + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return tree;
}

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::genealogy:
      return "genealogy";
    case ExperimentKind::pair_time:
      return "pair-time";
    case ExperimentKind::block_count:
      return "block-count";
    case ExperimentKind::first_merger:
      return "first-merger";
    case ExperimentKind::hitting_time:
      return "hitting-time";
    case ExperimentKind::short_window:
      return "short-window";
    case ExperimentKind::duality:
      return "duality";
    case ExperimentKind::forward_run:
      return "forward-run";
    case ExperimentKind::limit_sample:
      return "limit-sample";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  for (auto k : {ExperimentKind::genealogy, ExperimentKind::pair_time, ExperimentKind::block_count,
                 ExperimentKind::first_merger, ExperimentKind::hitting_time,
                 ExperimentKind::short_window, ExperimentKind::duality, ExperimentKind::forward_run,
                 ExperimentKind::limit_sample}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

EventLaw ExperimentConfig::law(double L) const { return law_at(regime, L, small, large); }

ExperimentConfig parse_config(std::string_view text) {
  const ConfigTree tree = parse_config_tree(text);
  Reader r(tree);
  ExperimentConfig cfg;
  cfg.text = std::string(text);
  using K = ExperimentKind;

  const auto* kind_value = r.get("", "kind");
  if (auto name = r.string("", "kind")) {
    if (auto k = parse_kind(*name)) {
      cfg.kind = *k;
    } else {
      r.error(kind_value, "", "kind", "unknown experiment kind '" + *name + "'");
    }
  } else if (!kind_value) {
    r.error(nullptr, "", "kind", "required key missing");
  }
  if (r.errors.size() > 0) {
    r.report_unknown();
    throw ConfigError(std::move(r.errors));
  }
  const K kind = cfg.kind;

  if (auto s = r.integer("", "seed", 0, (1LL << 53))) cfg.seed = static_cast<std::uint64_t>(*s);
  if (auto n = r.integer("", "replicates", 0, 1LL << 40)) cfg.replicates = static_cast<std::size_t>(*n);
  if (auto t = r.integer("", "threads", 0, 4096)) cfg.threads = static_cast<unsigned>(*t);
  cfg.out = r.string("", "out");
  if (auto e = r.boolean("", "event_logs")) cfg.event_logs = *e;
  if (auto h = r.number("", "horizon")) {
    if (!(*h > 0.0)) r.error(r.get("", "horizon"), "", "horizon", "must be positive");
    cfg.horizon = *h;
  }

  // Sidelengths.
  const bool needs_l = kind != K::limit_sample;
  if (auto ls = r.numbers("", "L")) {
    cfg.ls = *ls;
    for (double L : cfg.ls) {
      if (!(L > std::exp(1.0)) || !std::isfinite(L)) {
        r.error(r.get("", "L"), "", "L", "sidelengths must be finite and exceed e");
        break;
      }
    }
    if (cfg.ls.empty()) r.error(r.get("", "L"), "", "L", "empty list");
  } else if (needs_l && !r.has("", "L")) {
    r.error(nullptr, "", "L", "required key missing");
  }
  const bool single_l = kind == K::first_merger || kind == K::duality || kind == K::forward_run;
  if (single_l && cfg.ls.size() > 1) r.error(r.get("", "L"), "", "L", "this kind takes a single sidelength");

  // Laws.
  const bool needs_small = kind != K::first_merger && kind != K::limit_sample;
  if (auto s = read_class(r, "small")) {
    cfg.small = *s;
  } else if (needs_small && !r.has_section("small")) {
    r.error(nullptr, "small", "", "section required");
  } else if (!r.has_section("small")) {
    cfg.small = EventClass{RadiusMeasure(), ImpactDistribution::point(0.0)};
  }
  cfg.large = read_class(r, "large");
  const bool large_needed = kind == K::first_merger ||
                            (kind == K::limit_sample && r.has("", "process") &&
                             r.string("", "process").value_or("") != "kingman");
  if (large_needed && !r.has_section("large")) r.error(nullptr, "large", "", "section required");

  if (auto psi = r.power_law("regime", "psi")) cfg.regime.psi = *psi;
  const auto* rho_value = r.get("regime", "rho");
  if (rho_value) {
    if (const auto* d = std::get_if<double>(&rho_value->data); d && std::isinf(*d)) {
      cfg.regime.rho.reset();
    } else {
      cfg.regime.rho = r.power_law("regime", "rho");
    }
  }
  if (cfg.large && !cfg.regime.rho && kind != K::first_merger && kind != K::limit_sample) {
    r.error(nullptr, "regime", "rho", "large events need a finite rate divisor rho");
  }
  if (cfg.regime.rho && !cfg.large) {
    r.error(rho_value, "regime", "rho", "rho given without a [large] section");
  }

  // Sample.
  if (auto n = r.integer("sample", "n", 1, 1 << 20)) cfg.sample.n = static_cast<std::size_t>(*n);
  if (auto pl = r.string("sample", "placement")) {
    if (*pl == "well-separated") {
      cfg.sample.placement = Placement::well_separated;
    } else if (*pl == "uniform") {
      cfg.sample.placement = Placement::uniform;
    } else if (*pl == "points") {
      cfg.sample.placement = Placement::explicit_points;
    } else {
      r.error(r.get("sample", "placement"), "sample", "placement",
              "expected well-separated, uniform or points");
    }
  }
  if (auto pts = r.rows("sample", "points", 2)) {
    for (const auto& p : *pts) cfg.sample.points.push_back({p[0], p[1]});
    if (!r.has("sample", "placement")) cfg.sample.placement = Placement::explicit_points;
    if (!r.has("sample", "n")) cfg.sample.n = cfg.sample.points.size();
  }
  if (cfg.sample.placement == Placement::explicit_points && cfg.sample.points.size() != cfg.sample.n) {
    r.error(r.get("sample", "points"), "sample", "points", "needs exactly n points");
  }

  // Kind-specific keys.
  if (auto ts = r.numbers("", "times")) {
    cfg.times = *ts;
    for (double t : cfg.times) {
      if (!(t >= 0.0) || !std::isfinite(t)) r.error(r.get("", "times"), "", "times", "times must be finite and >= 0");
    }
  }
  if (auto c = r.number("", "c")) cfg.c = *c;
  if (auto rho = r.number("", "rho")) cfg.rho = *rho;
  if (auto t = r.power_law("", "target")) cfg.target = *t;
  if (auto R = r.number("", "R")) cfg.window_radius = *R;
  if (auto w = r.power_law("", "window_end")) cfg.window_end = *w;
  if (auto w = r.power_law("", "window_length")) cfg.window_length = *w;
  if (auto g = r.integer("", "grid", 1, 4096)) cfg.grid = static_cast<int>(*g);
  if (auto k = r.integer("", "types", 1, 64)) cfg.types = static_cast<int>(*k);
  if (auto init = r.string("", "init")) {
    if (*init == "monomorphic") {
      cfg.init = FieldInit::monomorphic;
    } else if (*init == "uniform") {
      cfg.init = FieldInit::uniform;
    } else if (*init == "checkerboard") {
      cfg.init = FieldInit::checkerboard;
    } else {
      r.error(r.get("", "init"), "", "init", "expected monomorphic, uniform or checkerboard");
    }
  }
  if (auto t = r.integer("", "init_type", 0, 63)) cfg.init_type = static_cast<int>(*t);
  if (auto s = r.integer("", "square_cells", 1, 4096)) cfg.square_cells = static_cast<int>(*s);
  if (auto pts = r.rows("", "points", 2)) {
    for (const auto& p : *pts) cfg.points.push_back({p[0], p[1]});
  }
  if (auto pats = r.rows("", "patterns", 0)) {
    for (const auto& row : *pats) {
      std::vector<int> pat;
      for (double a : row) {
        if (a != std::floor(a) || a < 0) {
          r.error(r.get("", "patterns"), "", "patterns", "types must be non-negative integers");
          break;
        }
        pat.push_back(static_cast<int>(a));
      }
      cfg.patterns.push_back(std::move(pat));
    }
  }
  if (auto t = r.number("", "time")) cfg.time = *t;
  if (auto p = r.string("", "process")) {
    if (*p == "kingman") {
      cfg.process = LimitProcess::kingman;
    } else if (*p == "lambda") {
      cfg.process = LimitProcess::lambda;
    } else if (*p == "spatial") {
      cfg.process = LimitProcess::spatial;
    } else {
      r.error(r.get("", "process"), "", "process", "expected kingman, lambda or spatial");
    }
  }
  if (auto b = r.number("", "beta")) cfg.beta = *b;
  if (auto b = r.number("", "b")) cfg.b = *b;
  if (auto s = r.number("", "sigma_s2")) cfg.sigma_s2 = *s;

  r.report_unknown();
  if (!r.errors.empty()) throw ConfigError(std::move(r.errors));

  // Semantic validation: laws, regime and kind requirements.
  auto& errors = r.errors;
  const double max_half_diag = TorusSpec(1.0).max_distance();
  auto check_law = [&](const EventLaw& law, const std::string& label) {
    try {
      check_admissibility(law);
    } catch (const InadmissibleLaw& e) {
      errors.push_back(label + ": inadmissible event law: " + e.what());
    }
  };
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };

  const bool regime_kind = kind == K::pair_time || kind == K::block_count || kind == K::genealogy;
  if (regime_kind) {
    try {
      cfg.classification = classify(cfg.regime);
      if (std::abs(cfg.classification->alpha - 1.0) < 1e-12 && cfg.large) {
        require(cfg.regime.psi.coef * cfg.large->radii.max_radius() <= max_half_diag * (1 + 1e-12),
                "alpha = 1 requires c R^B <= 1/sqrt(2) so large events fit in T(1)");
        require(cfg.large->radii.max_radius() <= max_half_diag * (1 + 1e-12),
                "alpha = 1 requires R^B <= 1/sqrt(2)");
      }
    } catch (const UncoveredRegime& e) {
      if (kind != K::genealogy) errors.push_back(std::string("regime: ") + e.what());
    }
    for (double L : cfg.ls) check_law(cfg.law(L), "L = " + std::to_string(L));
  }

  switch (kind) {
    case K::pair_time:
      cfg.sample.n = 2;
      break;
    case K::block_count:
      require(cfg.sample.n >= 1 && cfg.sample.n <= 8, "[sample] n: block-count takes 1 <= n <= 8");
      require(!cfg.times.empty(), "times: block-count needs observation times");
      break;
    case K::genealogy:
      break;
    case K::first_merger:
      require(cfg.sample.n >= 2, "[sample] n: first-merger needs n >= 2");
      if (cfg.large && !cfg.ls.empty()) {
        const double L = cfg.ls.front();
        require(cfg.c > 0.0, "c: must be positive");
        require(cfg.c * cfg.large->radii.max_radius() <= max_half_diag * (1 + 1e-12),
                "alpha = 1 requires c R^B <= 1/sqrt(2)");
        require(std::isfinite(cfg.rho) && cfg.rho > L * L, "rho: first-merger needs L^2 < rho < infinity");
        require(cfg.large->radii.total_mass() > 0.0 && std::isfinite(cfg.large->radii.total_mass()),
                "[large]: radius measure needs finite positive mass");
      }
      break;
    case K::hitting_time:
      require(r.has("", "target"), "target: required key missing");
      for (double L : cfg.ls) check_law(cfg.law(L), "L = " + std::to_string(L));
      require(cfg.target.power < 1.0, "target: radius must grow slower than L");
      break;
    case K::short_window:
      require(r.has("", "R") && r.has("", "window_end") && r.has("", "window_length"),
              "short-window needs R, window_end and window_length");
      for (double L : cfg.ls) {
        check_law(cfg.law(L), "L = " + std::to_string(L));
        const double u = cfg.window_length(L), end = cfg.window_end(L);
        require(u >= 0.0 && u <= end, "window_length must lie in [0, window_end]");
        require(2.0 * u <= L * L / std::sqrt(std::log(L)) * (1 + 1e-12),
                "window_length must satisfy 2 u_L <= L^2 (log L)^(-1/2)");
      }
      break;
    case K::duality:
    case K::forward_run: {
      require(cfg.grid > 0, "grid: required key missing");
      require(cfg.time > 0.0 && std::isfinite(cfg.time), "time: must be positive and finite");
      require(!cfg.large, "[large]: forward simulation supports small events only");
      if (!cfg.ls.empty()) check_law(cfg.law(cfg.ls.front()), "L = " + std::to_string(cfg.ls.front()));
      if (cfg.init == FieldInit::checkerboard) require(cfg.types >= 2, "types: checkerboard needs two types");
      if (cfg.init == FieldInit::monomorphic) require(cfg.init_type < cfg.types, "init_type: outside the alphabet");
      if (kind == K::duality) {
        require(!cfg.points.empty(), "points: duality needs sample points");
        require(!cfg.patterns.empty(), "patterns: duality needs type patterns");
        for (const auto& p : cfg.patterns) {
          require(p.size() == cfg.points.size(), "patterns: each pattern needs one type per point");
          for (int a : p) require(a < cfg.types, "patterns: type outside the alphabet");
        }
        if (cfg.grid > 0 && !cfg.ls.empty()) {
          const TypeField probe(cfg.ls.front(), cfg.grid, 1);
          for (const auto& x : cfg.points) {
            require(probe.is_cell_center(x), "points: sample points must be cell centres");
          }
        }
      }
      break;
    }
    case K::limit_sample:
      require(cfg.sample.n >= 1, "[sample] n: must be positive");
      if (cfg.process != LimitProcess::kingman && cfg.large) {
        require(cfg.c > 0.0 && cfg.c * cfg.large->radii.max_radius() <= max_half_diag * (1 + 1e-12),
                "alpha = 1 requires c R^B <= 1/sqrt(2)");
      }
      if (cfg.process == LimitProcess::spatial) {
        require(cfg.b >= 0.0, "b: must be non-negative");
        if (cfg.sigma_s2 == 0.0 && r.has_section("small")) {
          EventLaw law;
          law.small = cfg.small;
          cfg.sigma_s2 = dispersal_variance(law, EventScale::small);
        }
      }
      require(cfg.beta >= 0.0, "beta: must be non-negative");
      break;
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace slfv
