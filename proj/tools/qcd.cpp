// qcd: command-line front end for channel discrimination tools.

#include "qcd/qcd.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace qcd;
using io::json;

namespace {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string tol = "1e-9";
  int threads = 1;
  std::string config;
  std::string out;

  double tolerance() const {
    const double t = io::parse_number(tol);
    if (!(t >= 1e-12 && t <= 1e-4)) throw std::invalid_argument("--tol must lie in [1e-12, 1e-4]");
    return t;
  }
  sdp::Options solver() const {
    sdp::Options o;
    o.tol = tolerance();
    return o;
  }
};

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(cfg.out);
  if (!f) throw io::FormatError("cannot open output file", cfg.out);
  f << text;
}

void emit(const RunConfig& cfg, const json& j) { emit(cfg, j.dump(2) + "\n"); }

[[noreturn]] void fail(const std::string& type, const std::string& message, const std::string& where = {},
                       std::size_t offset = 0, int code = 1) {
  json e = {{"type", type}, {"message", message}};
  if (!where.empty()) e["where"] = where;
  if (offset) e["offset"] = offset;
  std::cerr << json{{"error", e}}.dump() << std::endl;
  std::exit(code);
}

// Flags present on the command line win over values from --config.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t k = 1; k + 1 < args.size(); ++k)
    if (args[k] == "--config") path = args[k + 1];
  if (path.empty()) return args;
  const json cfg = io::load_file(path);
  if (!cfg.is_object()) throw io::FormatError("config must be a JSON object", path);
  auto present = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  std::vector<std::string> globals, locals;
  static const std::vector<std::string> kSubcommands = {"divergence", "dh", "channel-dh", "orbits",
                                                        "adaptive-sim", "bound", "figure3", "selftest"};
  std::string sub;
  for (std::size_t k = 1; k < args.size() && sub.empty(); ++k)
    if (std::find(kSubcommands.begin(), kSubcommands.end(), args[k]) != kSubcommands.end()) sub = args[k];
  for (const auto& [key, value] : cfg.items()) {
    if (value.is_object()) {
      if (key != sub) continue;
      for (const auto& [k2, v2] : value.items()) {
        const std::string flag = "--" + k2;
        if (present(flag)) continue;
        if (v2.is_boolean()) {
          if (v2.get<bool>()) locals.push_back(flag);
        } else {
          locals.insert(locals.end(), {flag, as_text(v2)});
        }
      }
    } else if (!present("--" + key)) {
      globals.insert(globals.end(), {"--" + key, as_text(value)});
    }
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), globals.begin(), globals.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  out.insert(out.end(), locals.begin(), locals.end());
  return out;
}

json divergence_json(const DensityMatrix& rho, const DensityMatrix& sigma, const std::string& alpha,
                     const std::string& gamma) {
  const PositiveOperator s(sigma);
  json j = {{"relative_entropy", io::number(relative_entropy(rho, s))},
            {"dmax", io::number(dmax(rho, s))},
            {"fidelity", fidelity(rho, sigma)},
            {"sine_distance", sine_distance(rho, sigma)}};
  if (!alpha.empty()) {
    const double a = io::parse_number(alpha);
    j["alpha"] = a;
    j["petz_renyi"] = io::number(petz_renyi(a, rho, s));
    j["geometric_renyi"] = io::number(geometric_renyi(a, rho, s));
  }
  if (!gamma.empty()) {
    const double g = io::parse_number(gamma);
    j["gamma"] = g;
    j["c_gamma"] = io::number(c_gamma(g, rho, s));
  }
  if (relative_entropy(rho, s) < kInf) {
    auto st = state_pair_stats(rho, s);
    j["variance"] = st.V;
    j["third_moment"] = st.T3;
  }
  return j;
}

std::vector<example::Figure3Row> figure3_rows(double kappa, double alpha_p, const std::vector<long long>& grid,
                                              int threads) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(grid.size())));
  if (workers == 1) return example::figure3_data(kappa, alpha_p, grid);
  std::vector<std::vector<example::Figure3Row>> parts(static_cast<std::size_t>(workers));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      std::vector<long long> chunk;
      for (std::size_t k = static_cast<std::size_t>(w); k < grid.size(); k += static_cast<std::size_t>(workers))
        chunk.push_back(grid[k]);
      try {
        parts[static_cast<std::size_t>(w)] = example::figure3_data(kappa, alpha_p, chunk);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  // interleave back into input order
  std::vector<example::Figure3Row> rows;
  for (std::size_t k = 0; k < grid.size(); ++k)
    rows.push_back(parts[k % static_cast<std::size_t>(workers)][k / static_cast<std::size_t>(workers)]);
  return rows;
}

struct Check {
  std::string name;
  std::function<std::pair<bool, std::string>()> run;
};

json selftest(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.seed;
  std::vector<Check> checks = {
      {"constants",
       [] {
         auto k = bound_constants();
         return std::pair{k.K <= 0.29 && k.K1 <= 2.72 && k.K2 <= 2.36, "K=" + std::to_string(k.K)};
       }},
      {"example_delta",
       [] {
         bool ok = true;
         for (double kappa : {0.1, 0.25, 0.5, 0.9}) {
           auto t = example::exact_two_step(kappa);
           ok = ok && t.delta == example::delta_exact(example::Rational(kappa));
         }
         return std::pair{ok, std::string("exact on 4 points")};
       }},
      {"example_black_line",
       [] {
         const double v = example::black_line(std::ldexp(1.0, -50));
         return std::pair{std::abs(v - 25.2075187) < 1e-6, std::to_string(v)};
       }},
      {"oracle_equivalence",
       [&] {
         Rng rng(seed);
         double worst = 0;
         for (int k = 0; k < 5; ++k) {
           auto r = random_density(3, rng), s = random_density(3, rng);
           HypothesisOptions o;
           o.solver = cfg.solver();
           worst = std::max(worst, std::abs(dh_state(r, s, 0.3, o).beta - dh_neyman_pearson(r, s, 0.3).beta));
         }
         return std::pair{worst < 1e-6, "max gap " + std::to_string(worst)};
       }},
      {"symmetric_reduction",
       [&] {
         Rng rng(seed + 1);
         auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
         const double a = channel_dh_parallel(e, f, 2, 0.3).value, b = reduced_channel_dh(e, f, 2, 0.3).value;
         return std::pair{std::abs(a - b) < 1e-5, "gap " + std::to_string(std::abs(a - b))};
       }},
      {"amortization_chain",
       [&] {
         Rng rng(seed + 2);
         bool ok = true;
         for (int k = 0; k < 3; ++k) {
           auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
           AdaptiveStrategy s;
           s.n = 3;
           s.rho1 = random_density(4, rng).with_layout({{"R", 2}, {"A", 2}});
           for (int i = 0; i < 2; ++i) s.preps.push_back(random_channel(4, 4, rng));
           ok = ok && amortization_report(simulate(s, e, f)).chain_holds;
         }
         return std::pair{ok, std::string("3 random strategies")};
       }},
      {"figure3_ordering",
       [] {
         auto rows = example::figure3_data(std::ldexp(1.0, -50), 1.0 / 32, example::log_grid(100, 1e7, 8));
         bool ok = true;
         for (const auto& r : rows) {
           if (std::isfinite(r.green)) ok = ok && r.green <= r.red;
           if (r.yellow && std::isfinite(r.green)) ok = ok && *r.yellow <= r.green + 1e-6;
         }
         return std::pair{ok, std::to_string(rows.size()) + " rows"};
       }},
  };
  json out = json::array();
  bool all = true;
  for (const auto& c : checks) {
    bool pass = false;
    std::string detail;
    try {
      std::tie(pass, detail) = c.run();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    all = all && pass;
    out.push_back({{"name", c.name}, {"pass", pass}, {"detail", detail}});
  }
  return {{"checks", out}, {"pass", all}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrimination of quantum channels: divergences, tests and adaptive-to-parallel bounds"};
  app.require_subcommand(1);
  RunConfig cfg;
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_option("--tol", cfg.tol, "Solver tolerance in [1e-12, 1e-4]");
  app.add_option("--threads", cfg.threads, "Worker threads for row sweeps")->check(CLI::PositiveNumber);
  app.add_option("--config", cfg.config, "JSON file with default flag values");

  std::string rho_f, sigma_f, e_f, f_f, eps_s, alpha_s, gamma_s, method = "sdp";
  std::string strategy_f, trace_f, m_s, alpha_p_s = "2^-5", alpha_a_s = "0", dh_s;
  std::string kappa_s = "2^-50", m_min_s = "100", m_max_s = "1e7";
  int n = 1, d = 2, points = 60;
  bool reduced = false, corollary = false, list = false;

  auto* div = app.add_subcommand("divergence", "Divergences between two states");
  div->add_option("--rho", rho_f, "State file")->required();
  div->add_option("--sigma", sigma_f, "State file")->required();
  div->add_option("--alpha", alpha_s, "Renyi order");
  div->add_option("--gamma", gamma_s, "Order offset for c_gamma");
  div->add_option("--out", cfg.out, "Output file");

  auto* dh = app.add_subcommand("dh", "Hypothesis-testing relative entropy between two states");
  dh->add_option("--rho", rho_f, "State file")->required();
  dh->add_option("--sigma", sigma_f, "State file")->required();
  dh->add_option("--eps", eps_s, "Type I error")->required();
  dh->add_option("--method", method, "sdp or neyman-pearson")->check(CLI::IsMember({"sdp", "neyman-pearson"}));
  dh->add_option("--out", cfg.out, "Output file");

  auto* cdh = app.add_subcommand("channel-dh", "Best parallel test with n channel uses");
  cdh->add_option("--E", e_f, "Channel file")->required();
  cdh->add_option("--F", f_f, "Channel file")->required();
  cdh->add_option("--n", n, "Channel uses")->check(CLI::PositiveNumber);
  cdh->add_option("--eps", eps_s, "Type I error")->required();
  cdh->add_flag("--reduced", reduced, "Use the permutation-reduced program");
  cdh->add_option("--out", cfg.out, "Output file");

  auto* orb = app.add_subcommand("orbits", "Orbits of index pairs under copy permutations");
  orb->add_option("--d", d, "Local dimension")->check(CLI::PositiveNumber);
  orb->add_option("--n", n, "Copies")->check(CLI::PositiveNumber);
  orb->add_flag("--list", list, "List representatives and sizes");
  orb->add_option("--out", cfg.out, "Output file");

  auto* sim = app.add_subcommand("adaptive-sim", "Simulate an adaptive strategy under both hypotheses");
  sim->add_option("--strategy", strategy_f, "Strategy file")->required();
  sim->add_option("--E", e_f, "Channel file")->required();
  sim->add_option("--F", f_f, "Channel file")->required();
  sim->add_option("--out", cfg.out, "Output file");

  auto* bnd = app.add_subcommand("bound", "Parallel-rate lower bounds from an adaptive trace");
  bnd->add_option("--trace", trace_f, "Trace file written by adaptive-sim")->required();
  bnd->add_option("--E", e_f, "Channel file")->required();
  bnd->add_option("--F", f_f, "Channel file")->required();
  bnd->add_option("--m", m_s, "Parallel channel uses")->required();
  bnd->add_option("--alpha-p", alpha_p_s, "Parallel type I error");
  bnd->add_option("--alpha-a", alpha_a_s, "Adaptive type I error");
  bnd->add_option("--dh", dh_s, "Adaptive D_H in bits (default: computed from the final step)");
  bnd->add_flag("--corollary4", corollary, "Report only the simple-version bound");
  bnd->add_option("--out", cfg.out, "Output file");

  auto* fig = app.add_subcommand("figure3", "Rates of the two-step example against parallel strategies");
  fig->add_option("--kappa", kappa_s, "Depolarizing weight");
  fig->add_option("--alpha-p", alpha_p_s, "Parallel type I error");
  fig->add_option("--m-min", m_min_s, "Smallest m");
  fig->add_option("--m-max", m_max_s, "Largest m");
  fig->add_option("--points", points, "Grid points")->check(CLI::PositiveNumber);
  fig->add_option("--out", cfg.out, "CSV file");

  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    std::vector<std::string> args(argv, argv + argc);
    for (std::size_t k = 1; k < args.size(); ++k) {
      if (args[k].rfind("-", 0) == 0) {
        if (args[k] != "--help" && args[k] != "-h" && args[k].find('=') == std::string::npos) ++k;  // skip value
        continue;
      }
      if (!app.get_subcommand_no_throw(args[k])) throw CLI::ParseError("unknown subcommand '" + args[k] + "'", 2);
      break;
    }
    args = merge_config(args);
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
    cfg.tolerance();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what(), {}, 0, 2);
  } catch (const io::FormatError& e) {
    fail("input", e.what(), e.where(), e.offset(), 2);
  } catch (const std::invalid_argument& e) {
    fail("usage", e.what(), {}, 0, 2);
  }

  try {
    if (*div) {
      emit(cfg, divergence_json(io::density_from_json(io::load_file(rho_f), rho_f),
                                io::density_from_json(io::load_file(sigma_f), sigma_f), alpha_s, gamma_s));
    } else if (*dh) {
      auto rho = io::density_from_json(io::load_file(rho_f), rho_f);
      auto sigma = io::density_from_json(io::load_file(sigma_f), sigma_f);
      const double eps = io::parse_number(eps_s);
      HypothesisOptions o;
      o.solver = cfg.solver();
      auto r = method == "sdp" ? dh_state(rho, sigma, eps, o) : dh_neyman_pearson(rho, sigma, eps, o);
      json j = io::to_json(r);
      j["eps"] = eps;
      j["method"] = method;
      emit(cfg, j);
    } else if (*cdh) {
      auto e = io::channel_from_json(io::load_file(e_f), e_f);
      auto f = io::channel_from_json(io::load_file(f_f), f_f);
      const double eps = io::parse_number(eps_s);
      ChannelTestResult r;
      if (reduced) {
        ReducedOptions o;
        o.solver = cfg.solver();
        r = reduced_channel_dh(e, f, n, eps, o);
      } else {
        ChannelTestOptions o;
        o.solver = cfg.solver();
        r = channel_dh_parallel(e, f, n, eps, o);
      }
      emit(cfg, json{{"n", n},
                     {"eps", eps},
                     {"reduced", reduced},
                     {"value", io::number(r.value)},
                     {"rate", io::number(r.value / n)},
                     {"beta", r.beta},
                     {"alpha_achieved", r.alpha_achieved},
                     {"variables", r.solution.y.size()},
                     {"iterations", r.solution.iterations},
                     {"input_state", io::to_json(r.input_state)}});
    } else if (*orb) {
      auto basis = orbit_enumerate(d, n);
      json j = {{"d", d},
                {"n", n},
                {"count", basis.size()},
                {"expected", detail::multiset_count(static_cast<std::uint64_t>(d * d), n)}};
      if (list) {
        json arr = json::array();
        for (const auto& o : basis.orbits) arr.push_back({{"i", o.rep.i}, {"j", o.rep.j}, {"size", o.size}});
        j["orbits"] = arr;
      }
      emit(cfg, j);
    } else if (*sim) {
      auto s = io::strategy_from_json(io::load_file(strategy_f), strategy_f);
      auto e = io::channel_from_json(io::load_file(e_f), e_f);
      auto f = io::channel_from_json(io::load_file(f_f), f_f);
      emit(cfg, io::to_json(simulate(s, e, f)));
    } else if (*bnd) {
      auto t = io::trace_from_json(io::load_file(trace_f), trace_f);
      auto e = io::channel_from_json(io::load_file(e_f), e_f);
      auto f = io::channel_from_json(io::load_file(f_f), f_f);
      const double m = io::parse_number(m_s), ap = io::parse_number(alpha_p_s), aa = io::parse_number(alpha_a_s);
      double dh_bits = 0.0;
      if (!dh_s.empty()) {
        dh_bits = io::parse_number(dh_s);
      } else {
        HypothesisOptions o;
        o.solver = cfg.solver();
        dh_bits = dh_state(t.e_out.back(), t.f_out.back(), aa, o).dh;
      }
      auto r = theorem7_rhs(e, f, t, m, ap, aa, dh_bits);
      if (corollary)
        emit(cfg, json{{"n", t.n()},
                       {"m", m},
                       {"alpha_p", ap},
                       {"alpha_a", aa},
                       {"dh_adaptive", io::number(dh_bits)},
                       {"C", io::number(r.C_corollary)},
                       {"rhs_eq28", io::number(r.rhs_eq28)}});
      else {
        json j = io::to_json(r);
        j["dh_adaptive"] = io::number(dh_bits);
        emit(cfg, j);
      }
    } else if (*fig) {
      const double kappa = io::parse_number(kappa_s), ap = io::parse_number(alpha_p_s);
      auto grid = example::log_grid(io::parse_number(m_min_s), io::parse_number(m_max_s), points);
      std::ostringstream os;
      example::write_figure3_csv(os, figure3_rows(kappa, ap, grid, cfg.threads));
      emit(cfg, os.str());
    } else if (*self) {
      json j = selftest(cfg);
      emit(cfg, j);
      return j.at("pass").get<bool>() ? 0 : 1;
    }
  } catch (const io::FormatError& e) {
    fail("input", e.what(), e.where(), e.offset(), 2);
  } catch (const json::exception& e) {
    fail("input", e.what(), {}, 0, 2);
  } catch (const sdp::SolverError& e) {
    fail("solver", e.what());
  } catch (const std::domain_error& e) {
    fail("domain", e.what());
  } catch (const std::invalid_argument& e) {
    fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    fail("runtime", e.what());
  }
  return 0;
}
