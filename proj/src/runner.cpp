#include "slfv/runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "slfv/errors.hpp"
#include "slfv/forward.hpp"
#include "slfv/limits.hpp"
#include "slfv/parallel.hpp"

namespace slfv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

using Row = std::vector<std::string>;

std::vector<Row> read_csv(const fs::path& path, std::string* header = nullptr) {
  std::vector<Row> rows;
  std::ifstream in(path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (header) *header = line;
      first = false;
      continue;
    }
    if (line.empty()) continue;
    Row row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_d(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json trend_json(const Trend& t) {
  json values = json::array();
  for (double v : t.values) values.push_back(finite_or_null(v));
  return {{"values", values}, {"band", t.band}, {"weakly_decreasing", t.weakly_decreasing}};
}

TypeField initial_field(const ExperimentConfig& cfg) {
  const double L = cfg.ls.front();
  switch (cfg.init) {
    case FieldInit::monomorphic:
      return TypeField::monomorphic(L, cfg.grid, cfg.types, cfg.init_type);
    case FieldInit::uniform:
      return TypeField::uniform(L, cfg.grid, cfg.types);
    case FieldInit::checkerboard:
      break;
  }
  TypeField two = TypeField::checkerboard(L, cfg.grid, cfg.square_cells);
  if (cfg.types == 2) return two;
  TypeField field(L, cfg.grid, cfg.types);
  std::vector<double> probs(cfg.types);
  for (std::size_t c = 0; c < field.cells(); ++c) {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[0] = two.cell(c)[0];
    probs[1] = two.cell(c)[1];
    field.set_cell(c, probs);
  }
  return field;
}

/// How one experiment kind produces and summarises its rows.
struct Plan {
  std::string header;
  std::size_t units = 0;
  bool inner_parallel = false;  // units run one at a time and parallelise internally
  std::function<std::vector<std::string>(std::size_t unit, unsigned threads)> rows;
  std::function<json(const std::vector<Row>&)> summarize;
};

std::size_t count_inf(const std::vector<Row>& rows, std::size_t col) {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const Row& r) {
    return !std::isfinite(to_d(r[col]));
  }));
}

Plan make_plan(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  using K = ExperimentKind;
  Plan plan;
  const std::size_t reps = cfg.replicates;
  const std::size_t nl = cfg.ls.size();
  auto l_of = [reps](std::size_t unit) { return unit / reps; };
  auto rep_of = [reps](std::size_t unit) { return unit % reps; };

  switch (cfg.kind) {
    case K::genealogy: {
      plan.header = "L,replicate,n,end_time,reached_mrca,candidate_events,accepted_events,mergers";
      plan.units = nl * reps;
      plan.rows = [&cfg, seed, dir, l_of, rep_of](std::size_t unit, unsigned) {
        const std::size_t g = l_of(unit), rep = rep_of(unit);
        const double L = cfg.ls[g];
        const TorusSpec torus(L);
        Rng rng(genealogy_seed(seed, L, rep));
        SimulationOptions opt;
        opt.horizon = cfg.horizon;
        opt.until_mrca = true;
        try {
          const auto rec = simulate_genealogy(cfg.sample, cfg.law(L), torus, opt, rng);
          if (cfg.event_logs) {
            std::ofstream log(dir / "events" / ("L" + std::to_string(g) + "_rep" + std::to_string(rep) + ".jsonl"));
            write_event_log(log, rec);
          }
          return std::vector<std::string>{join({num(L), std::to_string(rep), std::to_string(rec.n),
                                                num(rec.end_time), rec.reached_mrca ? "1" : "0",
                                                std::to_string(rec.candidate_events),
                                                std::to_string(rec.accepted_events),
                                                std::to_string(rec.events.size())})};
        } catch (const SimulationTimeout&) {
          return std::vector<std::string>{join({num(L), std::to_string(rep), std::to_string(cfg.sample.n),
                                                num(kNever), "0", "-1", "-1", "-1"})};
        }
      };
      plan.summarize = [&cfg](const std::vector<Row>& rows) {
        json per = json::array();
        for (double L : cfg.ls) {
          std::size_t count = 0, mrca = 0, timeouts = 0;
          double sum = 0.0;
          for (const auto& r : rows) {
            if (to_d(r[0]) != L) continue;
            ++count;
            if (r[5] == "-1") ++timeouts;
            if (r[4] == "1") {
              ++mrca;
              sum += to_d(r[3]);
            }
          }
          per.push_back({{"L", L}, {"replicates", count}, {"reached_mrca", mrca}, {"timeouts", timeouts},
                         {"mean_mrca_time", mrca ? json(sum / mrca) : json(nullptr)}});
        }
        return json{{"per_L", per}};
      };
      break;
    }
    case K::pair_time: {
      plan.header = "L,replicate,phi,gathering,coalescence,gathering_normalized,coalescence_normalized";
      plan.units = nl * reps;
      auto setups = std::make_shared<std::vector<PairTimeSetup>>();
      for (double L : cfg.ls) setups->push_back(make_pair_time_setup(cfg.regime, L, cfg.small, cfg.large, seed));
      plan.rows = [setups, l_of, rep_of](std::size_t unit, unsigned) {
        const auto& s = (*setups)[l_of(unit)];
        const auto sample = pair_time_replicate(s, rep_of(unit));
        return std::vector<std::string>{join({num(s.L), std::to_string(rep_of(unit)), num(s.phi),
                                              num(sample.gathering), num(sample.coalescence),
                                              num(sample.gathering / s.phi), num(sample.coalescence / s.phi)})};
      };
      plan.summarize = [setups, reps](const std::vector<Row>& rows) {
        json per = json::array();
        std::vector<double> kg, kc;
        for (const auto& s : *setups) {
          std::vector<PairTimeSample> raw;
          for (const auto& r : rows) {
            if (to_d(r[0]) == s.L) raw.push_back({to_d(r[3]), to_d(r[4])});
          }
          const auto res = summarize_pair_times(s, raw);
          kg.push_back(res.ks_gathering);
          kc.push_back(res.ks_coalescence);
          per.push_back({{"L", s.L},
                         {"phi", finite_or_null(s.phi)},
                         {"case", std::string(to_string(s.regime.kind))},
                         {"threshold", s.threshold},
                         {"replicates", raw.size()},
                         {"censored", res.censored},
                         {"non_coalescing", res.non_coalescing},
                         {"ks_gathering", finite_or_null(res.ks_gathering)},
                         {"ks_coalescence", finite_or_null(res.ks_coalescence)},
                         {"mean_coalescence", finite_or_null(res.mean_coalescence)}});
        }
        return json{{"per_L", per},
                    {"gathering_trend", trend_json(weak_trend(kg, ks_noise_band(reps)))},
                    {"coalescence_trend", trend_json(weak_trend(kc, ks_noise_band(reps)))}};
      };
      break;
    }
    case K::block_count: {
      plan.header = "L,replicate,t,blocks";
      plan.units = nl * reps;
      auto setups = std::make_shared<std::vector<BlockCountSetup>>();
      for (double L : cfg.ls) {
        setups->push_back(make_block_count_setup(cfg.sample.n, cfg.regime, L, cfg.times, cfg.small, cfg.large, seed));
      }
      plan.rows = [setups, l_of, rep_of](std::size_t unit, unsigned) {
        const auto& s = (*setups)[l_of(unit)];
        const auto counts = block_count_replicate(s, rep_of(unit));
        std::vector<std::string> out;
        for (std::size_t i = 0; i < s.times.size(); ++i) {
          out.push_back(join({num(s.base.L), std::to_string(rep_of(unit)), num(s.times[i]), std::to_string(counts[i])}));
        }
        return out;
      };
      plan.summarize = [setups](const std::vector<Row>& rows) {
        json per = json::array();
        for (const auto& s : *setups) {
          std::map<std::size_t, std::vector<int>> by_rep;
          for (const auto& r : rows) {
            if (to_d(r[0]) == s.base.L) by_rep[std::stoul(r[1])].push_back(std::stoi(r[3]));
          }
          std::vector<std::vector<int>> counts;
          for (auto& [rep, c] : by_rep) counts.push_back(std::move(c));
          const auto res = summarize_block_counts(s, counts);
          json times = json::array();
          for (std::size_t i = 0; i < res.times.size(); ++i) {
            json probs = json::array();
            for (std::size_t j = 0; j < res.n; ++j) {
              json entry = {{"blocks", j + 1},
                            {"empirical", res.empirical[i][j].estimate},
                            {"std_error", res.empirical[i][j].std_error}};
              entry["limit"] = res.overlay.empty() ? json(nullptr) : json(res.overlay[i][j]);
              probs.push_back(entry);
            }
            times.push_back({{"t", res.times[i]}, {"distribution", probs}});
          }
          per.push_back({{"L", s.base.L}, {"phi", finite_or_null(s.base.phi)}, {"n", res.n},
                         {"case", std::string(to_string(s.base.regime.kind))},
                         {"replicates", counts.size()}, {"censored", res.censored}, {"times", times}});
        }
        return json{{"per_L", per}};
      };
      break;
    }
    case K::first_merger: {
      plan.header = "L,replicate,k";
      plan.units = reps;
      auto setup = std::make_shared<FirstMergerSetup>(
          make_first_merger_setup(cfg.sample.n, cfg.ls.front(), cfg.c, cfg.rho, *cfg.large, seed));
      plan.rows = [setup](std::size_t unit, unsigned) {
        return std::vector<std::string>{
            join({num(setup->L), std::to_string(unit), std::to_string(first_merger_replicate(*setup, unit))})};
      };
      plan.summarize = [setup](const std::vector<Row>& rows) {
        std::vector<int> sizes;
        for (const auto& r : rows) sizes.push_back(std::stoi(r[2]));
        const auto res = summarize_first_mergers(*setup, sizes);
        json bins = json::array();
        for (std::size_t i = 0; i < res.expected.size(); ++i) {
          bins.push_back({{"k", i + 2}, {"observed", res.observed[i]}, {"expected_probability", res.expected[i]}});
        }
        return json{{"L", setup->L}, {"n", setup->n}, {"c", setup->c}, {"mergers", res.mergers},
                    {"timeouts", sizes.size() - res.mergers}, {"chi_square", res.chi_square},
                    {"dof", res.dof}, {"p_value", res.p_value}, {"inconclusive", res.inconclusive},
                    {"bins", bins}};
      };
      break;
    }
    case K::hitting_time: {
      plan.header = "L,replicate,t_normalized";
      plan.units = nl * reps;
      auto setups = std::make_shared<std::vector<HittingSetup>>();
      for (double L : cfg.ls) setups->push_back(make_hitting_setup(cfg.small, L, cfg.target, std::nullopt, seed));
      plan.rows = [setups, l_of, rep_of](std::size_t unit, unsigned) {
        const auto& s = (*setups)[l_of(unit)];
        return std::vector<std::string>{
            join({num(s.L), std::to_string(rep_of(unit)), num(hitting_replicate(s, rep_of(unit)))})};
      };
      plan.summarize = [setups, reps](const std::vector<Row>& rows) {
        json per = json::array();
        std::vector<double> ks;
        for (const auto& s : *setups) {
          std::vector<double> t;
          for (const auto& r : rows) {
            if (to_d(r[0]) == s.L) t.push_back(to_d(r[2]));
          }
          const auto res = summarize_hitting(s, t);
          ks.push_back(res.ks);
          per.push_back({{"L", s.L}, {"radius", s.radius}, {"normalization", s.normalization},
                         {"replicates", t.size()}, {"censored", res.censored}, {"ks", finite_or_null(res.ks)}});
        }
        return json{{"per_L", per}, {"trend", trend_json(weak_trend(ks, ks_noise_band(reps)))}};
      };
      break;
    }
    case K::short_window: {
      plan.header = "L,replicate,hit";
      plan.units = nl * reps;
      auto setups = std::make_shared<std::vector<WindowSetup>>();
      for (double L : cfg.ls) {
        setups->push_back(make_window_setup(cfg.small, L, cfg.window_radius, cfg.window_end(L),
                                            cfg.window_length(L), std::nullopt, seed));
      }
      plan.rows = [setups, l_of, rep_of](std::size_t unit, unsigned) {
        const auto& s = (*setups)[l_of(unit)];
        return std::vector<std::string>{
            join({num(s.L), std::to_string(rep_of(unit)), std::to_string(window_replicate(s, rep_of(unit)))})};
      };
      plan.summarize = [setups](const std::vector<Row>& rows) {
        json per = json::array();
        for (const auto& s : *setups) {
          std::vector<int> hits;
          for (const auto& r : rows) {
            if (to_d(r[0]) == s.L) hits.push_back(std::stoi(r[2]));
          }
          const auto res = summarize_window(s, hits);
          per.push_back({{"L", s.L}, {"window_end", s.window_end}, {"window_length", s.window_length},
                         {"replicates", hits.size()}, {"probability", res.probability.estimate},
                         {"std_error", res.probability.std_error}, {"bound_scale", res.bound_scale},
                         {"ratio", res.ratio}});
        }
        return json{{"per_L", per}};
      };
      break;
    }
    case K::duality: {
      plan.header = "pattern,types,side,mean,std_error,lower,upper,overlap";
      plan.units = reps == 0 ? 0 : cfg.patterns.size();
      plan.inner_parallel = true;
      auto field = std::make_shared<TypeField>(initial_field(cfg));
      plan.rows = [&cfg, field, seed, reps](std::size_t unit, unsigned threads) {
        DualityRequest req;
        req.points = cfg.points;
        req.types = cfg.patterns[unit];
        req.time = cfg.time;
        req.replicates = reps;
        req.seed = derive_seed(seed, stream_id("duality-pattern"), unit);
        req.threads = threads;
        const auto rep = duality_check(*field, req, cfg.law(cfg.ls.front()));
        std::string types;
        for (std::size_t i = 0; i < req.types.size(); ++i) types += (i ? " " : "") + std::to_string(req.types[i]);
        std::vector<std::string> out;
        for (const auto& [side, est] : {std::pair{"forward", rep.forward}, std::pair{"dual", rep.dual}}) {
          out.push_back(join({std::to_string(unit), types, side, num(est.mean), num(est.std_error),
                              num(est.lower), num(est.upper), rep.overlap ? "1" : "0"}));
        }
        return out;
      };
      plan.summarize = [](const std::vector<Row>& rows) {
        json patterns = json::array();
        bool all = true;
        for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
          const bool overlap = rows[i][7] == "1";
          all = all && overlap;
          patterns.push_back({{"pattern", std::stoi(rows[i][0])}, {"types", rows[i][1]},
                              {"forward_mean", to_d(rows[i][3])}, {"dual_mean", to_d(rows[i + 1][3])},
                              {"overlap", overlap}});
        }
        return json{{"patterns", patterns}, {"all_overlap", all}};
      };
      break;
    }
    case K::forward_run: {
      std::string header = "L,replicate,events,skipped";
      for (int k = 0; k < cfg.types; ++k) header += ",mean_p" + std::to_string(k);
      plan.header = header;
      plan.units = reps;
      auto field = std::make_shared<TypeField>(initial_field(cfg));
      plan.rows = [&cfg, field, seed, dir](std::size_t unit, unsigned) {
        Rng rng(derive_seed(seed, stream_id("forward-run"), unit));
        const auto run = run_forward(*field, cfg.law(cfg.ls.front()), cfg.time, rng);
        if (cfg.event_logs) {
          std::ofstream bin(dir / "fields" / ("field_rep" + std::to_string(unit) + ".bin"), std::ios::binary);
          run.field.write_binary(bin);
        }
        std::vector<std::string> cols{num(cfg.ls.front()), std::to_string(unit), std::to_string(run.events),
                                      std::to_string(run.skipped)};
        for (int k = 0; k < run.field.types(); ++k) {
          double sum = 0.0;
          for (std::size_t c = 0; c < run.field.cells(); ++c) sum += run.field.cell(c)[k];
          cols.push_back(num(sum / static_cast<double>(run.field.cells())));
        }
        return std::vector<std::string>{join(cols)};
      };
      plan.summarize = [&cfg](const std::vector<Row>& rows) {
        json means = json::array();
        for (int k = 0; k < cfg.types; ++k) {
          double sum = 0.0;
          for (const auto& r : rows) sum += to_d(r[4 + k]);
          means.push_back(rows.empty() ? json(nullptr) : json(sum / rows.size()));
        }
        std::size_t skipped = 0;
        for (const auto& r : rows) skipped += std::stoul(r[3]);
        return json{{"replicates", rows.size()}, {"mean_type_frequency", means}, {"skipped_events", skipped}};
      };
      break;
    }
    case K::limit_sample: {
      plan.header = "replicate,time,blocks";
      plan.units = reps;
      plan.rows = [&cfg, seed](std::size_t unit, unsigned) {
        Rng rng(derive_seed(seed, stream_id("limit-sample"), unit));
        std::vector<std::pair<double, std::size_t>> path;
        const std::size_t n = cfg.sample.n;
        if (cfg.process == LimitProcess::spatial) {
          const TorusSpec unit_torus(1.0);
          std::vector<TorusPoint> pts;
          for (std::size_t i = 0; i < n; ++i) pts.push_back(uniform_on_torus(unit_torus, rng));
          const auto rec = sample_spatial_limit(pts, cfg.b, cfg.c, *cfg.large, cfg.sigma_s2, cfg.horizon, rng);
          std::size_t blocks = n;
          path.push_back({0.0, blocks});
          for (const auto& e : rec.events) {
            blocks -= e.merged.size() - 1;
            path.push_back({e.time, blocks});
          }
        } else {
          const auto p = cfg.process == LimitProcess::kingman
                             ? sample_kingman(n, 1.0, cfg.horizon, rng)
                             : sample_lambda_beta_c(n, cfg.c, cfg.beta, *cfg.large, cfg.horizon, rng);
          for (const auto& s : p.steps) path.push_back({s.time, s.partition.size()});
        }
        std::vector<std::string> out;
        for (const auto& [t, b] : path) out.push_back(join({std::to_string(unit), num(t), std::to_string(b)}));
        return out;
      };
      plan.summarize = [](const std::vector<Row>& rows) {
        std::map<std::string, double> mrca;
        for (const auto& r : rows) {
          if (r[2] == "1") mrca[r[0]] = to_d(r[1]);
        }
        double sum = 0.0;
        for (const auto& [rep, t] : mrca) sum += t;
        return json{{"reached_mrca", mrca.size()},
                    {"mean_mrca_time", mrca.empty() ? json(nullptr) : json(sum / mrca.size())}};
      };
      break;
    }
  }
  return plan;
}

std::size_t timeouts_in(const ExperimentConfig& cfg, const std::vector<Row>& rows) {
  switch (cfg.kind) {
    case ExperimentKind::genealogy:
      return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const Row& r) { return r[5] == "-1"; }));
    case ExperimentKind::pair_time:
      return count_inf(rows, 4);
    case ExperimentKind::hitting_time:
      return count_inf(rows, 2);
    case ExperimentKind::block_count:
      return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const Row& r) { return r[3] == "-1"; }));
    case ExperimentKind::first_merger:
      return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const Row& r) { return r[2] == "-1"; }));
    default:
      return 0;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t seed = options.seed.value_or(cfg.seed);
  const unsigned threads = resolve_threads(options.threads.value_or(cfg.threads.value_or(1)));
  const fs::path dir = options.out;
  const std::string config_hash = sha256_hex(cfg.text);
  fs::create_directories(dir);

  RunOutcome outcome;
  outcome.dir = dir;
  const fs::path progress_path = dir / "progress.json";
  const fs::path csv_path = dir / "results.csv";

  if (cfg.replicates == 0) {
    fs::remove(progress_path);
    fs::remove(csv_path);
    fs::remove(dir / "summary.json");
  }

  const Plan plan = cfg.replicates == 0 ? Plan{} : make_plan(cfg, seed, dir);
  outcome.units = plan.units;
  if (cfg.replicates > 0) {
    if (cfg.kind == ExperimentKind::genealogy && cfg.event_logs) fs::create_directories(dir / "events");
    if (cfg.kind == ExperimentKind::forward_run && cfg.event_logs) fs::create_directories(dir / "fields");

    std::size_t done = 0;
    std::uintmax_t csv_bytes = 0;
    bool resumed = false;
    if (options.resume && fs::exists(progress_path)) {
      std::ifstream in(progress_path);
      const json p = json::parse(in);
      if (p.at("config_sha256") != config_hash || p.at("seed").get<std::uint64_t>() != seed) {
        throw std::runtime_error("progress.json in " + dir.string() +
                                 " belongs to a different config or seed; refusing to resume");
      }
      done = p.at("units_done").get<std::size_t>();
      csv_bytes = p.at("csv_bytes").get<std::uintmax_t>();
      if (!fs::exists(csv_path) || fs::file_size(csv_path) < csv_bytes) {
        throw std::runtime_error("results.csv is shorter than progress.json records");
      }
      fs::resize_file(csv_path, csv_bytes);
      resumed = true;
    } else if (options.resume && fs::exists(dir / "manifest.json") && fs::exists(csv_path)) {
      std::ifstream in(dir / "manifest.json");
      const json m = json::parse(in);
      if (m.value("config_sha256", "") == config_hash && m.value("seed", std::uint64_t{0}) == seed &&
          m.value("complete", false)) {
        outcome.complete = true;
        outcome.units_done = plan.units;
        return outcome;
      }
    }
    fs::remove(dir / "manifest.json");
    if (!resumed) {
      std::ofstream csv(csv_path, std::ios::trunc);
      csv << plan.header << '\n';
      csv.flush();
      if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
      csv_bytes = fs::file_size(csv_path);
    }

    std::size_t chunks = 0;
    while (done < plan.units) {
      if (options.stop_after && chunks >= *options.stop_after) {
        outcome.units_done = done;
        return outcome;
      }
      const std::size_t end = std::min(plan.units, done + std::max<std::size_t>(1, options.chunk));
      std::vector<std::vector<std::string>> rows(end - done);
      if (plan.inner_parallel) {
        for (std::size_t u = done; u < end; ++u) rows[u - done] = plan.rows(u, threads);
      } else {
        parallel_for(done, end, threads, [&](std::size_t u) { rows[u - done] = plan.rows(u, 1); });
      }
      {
        std::ofstream csv(csv_path, std::ios::app);
        for (const auto& unit_rows : rows) {
          for (const auto& line : unit_rows) csv << line << '\n';
        }
        csv.flush();
        if (!csv) throw std::runtime_error("write failed: " + csv_path.string());
      }
      csv_bytes = fs::file_size(csv_path);
      done = end;
      ++chunks;
      const json p = {{"config_sha256", config_hash}, {"seed", seed}, {"units", plan.units},
                      {"units_done", done}, {"csv_bytes", csv_bytes}};
      write_text(progress_path, p.dump(2) + "\n");
    }
    outcome.units_done = done;

    const auto rows = read_csv(csv_path);
    outcome.timeouts = timeouts_in(cfg, rows);
    json summary = plan.summarize(rows);
    summary["kind"] = std::string(to_string(cfg.kind));
    summary["seed"] = seed;
    summary["timeouts"] = outcome.timeouts;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    fs::remove(progress_path);
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json outputs = json::array();
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir);
    if (rel == "manifest.json" || rel == "progress.json" || rel.extension() == ".tmp") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  for (const auto& rel : files) {
    outputs.push_back({{"path", rel.generic_string()}, {"sha256", sha256_file(dir / rel)},
                       {"bytes", fs::file_size(dir / rel)}});
  }
  const json manifest = {{"version", std::string(kVersion)},
                         {"kind", std::string(to_string(cfg.kind))},
                         {"config_sha256", config_hash},
                         {"seed", seed},
                         {"threads", threads},
                         {"replicates", cfg.replicates},
                         {"units", plan.units},
                         {"timeouts", outcome.timeouts},
                         {"wall_time_seconds", wall},
                         {"complete", true},
                         {"outputs", outputs}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  outcome.complete = true;
  return outcome;
}

void emit_plotdata(const fs::path& dir, std::string_view view, std::ostream& out) {
  static const std::map<std::string, std::pair<std::string, std::vector<std::string>>, std::less<>> views = {
      {"survival", {"L,t_normalized,empirical_survival,exp_minus_t", {"pair-time", "hitting-time"}}},
      {"ks-trend", {"L,ks_stat,n_replicates", {"pair-time", "hitting-time"}}},
      {"block-count", {"L,t,blocks,empirical,std_error,limit", {"block-count"}}},
      {"merger-hist", {"k,observed,expected", {"first-merger"}}},
  };
  const auto it = views.find(view);
  if (it == views.end()) {
    throw std::invalid_argument("unknown view '" + std::string(view) +
                                "' (expected survival, ks-trend, block-count or merger-hist)");
  }
  const auto& [header, kinds] = it->second;
  std::string kind;
  if (fs::exists(dir / "manifest.json")) {
    std::ifstream in(dir / "manifest.json");
    kind = json::parse(in).value("kind", "");
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
      throw std::invalid_argument("view '" + std::string(view) + "' needs a " + kinds.front() +
                                  (kinds.size() > 1 ? " or " + kinds.back() : std::string()) +
                                  " artifact, found '" + kind + "'");
    }
  }
  out << header << '\n';
  if (kind.empty() || !fs::exists(dir / "summary.json")) return;
  json summary;
  {
    std::ifstream in(dir / "summary.json");
    summary = json::parse(in);
  }
  if (view == "survival") {
    const auto rows = read_csv(dir / "results.csv");
    const std::size_t col = kind == "pair-time" ? 6 : 2;
    std::map<double, std::vector<double>> by_l;
    for (const auto& r : rows) by_l[to_d(r[0])].push_back(to_d(r[col]));
    for (auto& [L, ts] : by_l) {
      std::sort(ts.begin(), ts.end());
      const double n = static_cast<double>(ts.size());
      for (std::size_t i = 0; i < ts.size() && std::isfinite(ts[i]); ++i) {
        out << num(L) << ',' << num(ts[i]) << ',' << num((n - static_cast<double>(i + 1)) / n) << ','
            << num(std::exp(-ts[i])) << '\n';
      }
    }
  } else if (view == "ks-trend") {
    const char* key = kind == "pair-time" ? "ks_coalescence" : "ks";
    for (const auto& e : summary.at("per_L")) {
      out << num(e.at("L").get<double>()) << ','
          << (e.at(key).is_null() ? std::string("nan") : num(e.at(key).get<double>())) << ','
          << e.at("replicates").get<std::size_t>() << '\n';
    }
  } else if (view == "block-count") {
    for (const auto& e : summary.at("per_L")) {
      for (const auto& t : e.at("times")) {
        for (const auto& d : t.at("distribution")) {
          out << num(e.at("L").get<double>()) << ',' << num(t.at("t").get<double>()) << ','
              << d.at("blocks").get<int>() << ',' << num(d.at("empirical").get<double>()) << ','
              << num(d.at("std_error").get<double>()) << ','
              << (d.at("limit").is_null() ? std::string() : num(d.at("limit").get<double>())) << '\n';
        }
      }
    }
  } else if (view == "merger-hist") {
    const double total = summary.at("mergers").get<double>();
    for (const auto& b : summary.at("bins")) {
      out << b.at("k").get<int>() << ',' << num(b.at("observed").get<double>()) << ','
          << num(b.at("expected_probability").get<double>() * total) << '\n';
    }
  }
}

}  // namespace slfv
