#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cwqed/master_equation.hpp"

namespace cwqed::cli {

namespace {

using json = nlohmann::ordered_json;

std::string num(double x) { return io::format_double(x); }

template <class F>
std::vector<double> cached(const io::Cache& cache, const std::string& key, const json& meta, std::ostream& log, bool& hit,
                           F compute) {
  std::string diag;
  if (auto e = cache.load(key, &diag)) {
    hit = true;
    log << "cache hit " << key.substr(0, 16) << '\n';
    return e->payload;
  }
  if (!diag.empty()) log << "cache entry rejected (" << diag << "), recomputing\n";
  hit = false;
  auto v = compute();
  cache.store(key, meta, v);
  return v;
}

std::filesystem::path with_suffix(const io::RunConfig& cfg, const std::string& suffix) {
  return cfg.text("output") + suffix;
}

void write_text(const std::filesystem::path& p, const std::string& s, Outcome& out) {
  io::write_file_atomic(p, s);
  out.files.push_back(p);
}

json physics_json(const PhysParams& prm) {
  json j;
  j["beta"] = num(prm.beta);
  j["atoms"] = prm.num_atoms;
  j["p_in"] = num(prm.p_in);
  j["theta"] = num(prm.theta);
  return j;
}

}  // namespace

PhysParams resolve_params(const io::RunConfig& cfg, bool need_atoms) {
  PhysParams p;
  p.beta = cfg.real("beta");
  p.p_in = cfg.real("p_in");
  p.theta = cfg.real("theta");
  const bool has_atoms = cfg.values().count("atoms") > 0;
  const bool has_od = cfg.values().count("od") > 0;
  if (has_atoms && has_od) throw io::config_error("atoms and od are mutually exclusive");
  if (has_atoms) {
    p.num_atoms = cfg.integer("atoms");
  } else if (has_od) {
    if (!(p.beta > 0.0)) throw io::config_error("od requires beta > 0");
    p.num_atoms = int(std::lround(cfg.real("od") / (4.0 * p.beta)));
  } else if (need_atoms) {
    throw io::config_error("one of atoms or od is required");
  }
  try {
    p.validate();
  } catch (const precondition_violation& e) {
    throw io::config_error(e.what());
  }
  return p;
}

Order resolve_order(const io::RunConfig& cfg) {
  const auto o = cfg.text("order");
  if (o == "tree") return Order::tree;
  if (o == "tree+loop") return Order::tree_loop;
  throw io::config_error("order must be tree or tree+loop, got '" + o + "'");
}

std::vector<int> resolve_atom_range(const io::RunConfig& cfg) {
  const int a = cfg.integer("atoms_min"), b = cfg.integer("atoms_max");
  if (a < 1) throw io::config_error("atoms_min must be >= 1");
  if (b < a) throw io::config_error("empty atom range [" + std::to_string(a) + ", " + std::to_string(b) + "]");
  std::vector<int> r;
  for (int m = a; m <= b; ++m) r.push_back(m);
  return r;
}

Outcome cmd_grid(const io::RunConfig& cfg, std::ostream& log) {
  const auto prm = resolve_params(cfg);
  const auto order = resolve_order(cfg);
  const auto obs = cfg.text("observable");
  if (obs != "g3c" && obs != "cumulant3" && obs != "g3" && obs != "phi3")
    throw io::config_error("grid observable must be g3c, cumulant3, g3 or phi3");
  const double ext = cfg.real("extent");
  const int n = cfg.integer("points");
  if (!(ext > 0.0)) throw io::config_error("extent must be positive");
  if (n < 2) throw io::config_error("points must be >= 2");
  if ((obs == "g3c" || obs == "g3") && prm.t0() == 0.0) throw io::config_error("g3c and g3 are undefined at beta = 0.5");

  json phys = physics_json(prm);
  if (obs != "cumulant3") {
    phys.erase("p_in");
    phys.erase("theta");
  }
  phys["order"] = to_string(order);
  phys["observable"] = obs;
  phys["extent"] = num(ext);
  phys["points"] = n;
  const auto key = io::Cache::key("grid", phys);
  io::Cache cache(io::Cache::default_dir(cfg));
  const auto axis = linspace(-ext, ext, n);

  Outcome out;
  const auto values = cached(cache, key, phys, log, out.cache_hit, [&] {
    log << "building " << to_string(order) << " field for beta=" << prm.beta << " M=" << prm.num_atoms << '\n';
    const ThreePhotonField f(prm, order);
    JacobiField j;
    if (obs == "g3c")
      j = sample_jacobi([&](double u, double v) { return g3c(u, v, 0.0, f); }, axis, axis);
    else if (obs == "g3")
      j = sample_jacobi([&](double u, double v) { return g3(u, v, 0.0, f); }, axis, axis);
    else if (obs == "cumulant3")
      j = sample_jacobi([&](double u, double v) { return cumulant3(u, v, 0.0, prm.theta, f); }, axis, axis);
    else
      j = sample_jacobi([&](double u, double v) { return f.phi3(u, v); }, axis, axis);
    return j.values;
  });

  std::vector<std::pair<std::string, std::string>> meta;
  for (const auto& [k, v] : phys.items()) meta.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
  meta.emplace_back("od", num(prm.od()));
  meta.emplace_back("p_in_over_p_sat", num(prm.beta * prm.p_in));
  meta.emplace_back("cache_key", key);
  std::vector<std::vector<double>> rows;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) rows.push_back({axis[a], axis[b], values[std::size_t(a) * n + b]});
  std::ostringstream csv;
  io::write_csv(csv, meta, {"eta", "zeta", obs}, rows);
  write_text(with_suffix(cfg, ".csv"), csv.str(), out);

  json m = phys;
  m["od"] = num(prm.od());
  m["p_in_over_p_sat"] = num(prm.beta * prm.p_in);
  m["cache_key"] = key;
  m["rows"] = rows.size();
  m["columns"] = {"eta", "zeta", obs};
  write_text(with_suffix(cfg, ".json"), m.dump(2) + "\n", out);
  return out;
}

Outcome cmd_scan(const io::RunConfig& cfg, std::ostream& log) {
  const auto base = resolve_params(cfg, false);
  const auto order = resolve_order(cfg);
  const auto atoms = resolve_atom_range(cfg);
  const auto obs = cfg.text("observable");
  const bool with_rate = obs == "count_rate";
  if (!with_rate && obs != "g3c") throw io::config_error("scan observable must be g3c or count_rate");
  if (base.t0() == 0.0) throw io::config_error("origin correlations are undefined at beta = 0.5");
  const double window = cfg.real("window");
  io::Cache cache(io::Cache::default_dir(cfg));

  Outcome out;
  out.cache_hit = true;
  std::ostringstream lines;
  json first = nullptr;
  for (const int M : atoms) {
    PhysParams prm = base;
    prm.num_atoms = M;
    json phys = physics_json(prm);
    phys.erase("p_in");
    phys.erase("theta");
    phys["order"] = to_string(order);
    if (with_rate) phys["window"] = num(window);
    bool hit = false;
    const auto key = io::Cache::key(with_rate ? "scan-rate" : "scan", phys);
    const auto v = cached(cache, key, phys, log, hit, [&] {
      log << "scan M=" << M << '\n';
      const ThreePhotonField f(prm, order);
      std::vector<double> r = {g2(0.0, 0.0, f), g3(0.0, 0.0, 0.0, f), g3c(0.0, 0.0, 0.0, f)};
      if (with_rate) r.push_back(count_rate(f, window).S_tilde);
      return r;
    });
    out.cache_hit = out.cache_hit && hit;
    json j;
    j["atoms"] = M;
    j["od"] = prm.od();
    j["beta_M"] = prm.beta * M;
    j["p_in_over_p_sat"] = prm.beta * prm.p_in;
    j["g2_origin"] = v[0];
    j["g3_origin"] = v[1];
    j["g3c_origin"] = v[2];
    j["abs_g3c_origin"] = std::abs(v[2]);
    if (with_rate) {
      j["S_tilde"] = v[3];
      const bool above = std::abs(v[2]) >= 0.1;
      j["g3c_above_0.1"] = above;
      if (above && first.is_null()) first = {{"atoms", M}, {"beta_M", prm.beta * M}};
    }
    lines << io::json_line(j) << '\n';
  }
  if (with_rate) {
    json s;
    s["first_g3c_above_0.1"] = first;
    lines << io::json_line(s) << '\n';
  }
  write_text(with_suffix(cfg, ".jsonl"), lines.str(), out);
  return out;
}

VerifyThresholds verify_thresholds(const io::RunConfig& cfg, double p_in) {
  const bool has_tc = cfg.values().count("tol_cumulant") > 0;
  const bool has_tg = cfg.values().count("tol_g3c") > 0;
  VerifyThresholds t{0.0, 0.0};
  if (std::abs(p_in - 0.02) < 1e-12)
    t = {0.012, 0.020};
  else if (std::abs(p_in - 0.06) < 1e-12)
    t = {0.028, 0.062};
  else if (!has_tc || !has_tg)
    throw io::config_error("no default thresholds at this p_in; set tol_cumulant and tol_g3c");
  if (has_tc) t.cumulant = cfg.real("tol_cumulant");
  if (has_tg) t.g3c = cfg.real("tol_g3c");
  return t;
}

Outcome cmd_verify(const io::RunConfig& cfg, std::ostream& log) {
  const auto base = resolve_params(cfg, false);
  std::vector<int> atoms;
  if (cfg.values().count("atoms") || cfg.values().count("od"))
    atoms = {base.num_atoms};
  else
    atoms = resolve_atom_range(cfg);
  if (!(base.p_in > 0.0)) throw io::config_error("verify requires p_in > 0");
  if (base.t0() == 0.0) throw io::config_error("verify is undefined at beta = 0.5");
  const auto tol = verify_thresholds(cfg, base.p_in);
  const int nt = cfg.integer("time_points");
  const double tmax = cfg.real("time_max");
  const int n_max = cfg.integer("n_max");
  if (nt < 2 || !(tmax > 0.0)) throw io::config_error("time grid needs time_points >= 2 and time_max > 0");
  if (n_max < 1) throw io::config_error("n_max must be >= 1");
  const auto ts = linspace(0.0, tmax, nt);
  io::Cache cache(io::Cache::default_dir(cfg));

  Outcome out;
  out.cache_hit = true;
  bool all_pass = true;
  std::ostringstream report;
  for (const int M : atoms) {
    if (M > 8) log << "warning: M=" << M << " exceeds the advised range M <= 8\n";
    PhysParams prm = base;
    prm.num_atoms = M;
    json phys = physics_json(prm);
    phys["time_max"] = num(tmax);
    phys["time_points"] = nt;
    json pa = phys;
    pa["order"] = to_string(Order::tree_loop);
    json pm = phys;
    pm["n_max"] = n_max;
    bool h1 = false, h2 = false;
    const auto an = cached(cache, io::Cache::key("verify-analytic", pa), pa, log, h1, [&] {
      log << "analytic M=" << M << '\n';
      const ThreePhotonField f(prm, Order::tree_loop);
      auto v = cumulant3_grid(f, ts, prm.theta).values;
      const auto g = g3c_grid(f, ts).values;
      v.insert(v.end(), g.begin(), g.end());
      return v;
    });
    const auto me = cached(cache, io::Cache::key("verify-me", pm), pm, log, h2, [&] {
      log << "master equation M=" << M << '\n';
      const auto eq = build_liouvillian(prm, n_max);
      const auto rho = steady_state(eq);
      auto v = qrt_cumulant3(eq, rho, ts, prm.theta).values;
      const auto g = qrt_g3c(eq, rho, ts).values;
      v.insert(v.end(), g.begin(), g.end());
      return v;
    });
    out.cache_hit = out.cache_hit && h1 && h2;
    const std::size_t n2 = ts.size() * ts.size();
    const std::vector<double> ac(an.begin(), an.begin() + n2), ag(an.begin() + n2, an.end());
    const std::vector<double> mc(me.begin(), me.begin() + n2), mg(me.begin() + n2, me.end());
    const double ec = frobenius_relative_error(ac, mc);
    const double eg = frobenius_relative_error(ag, mg);
    const bool pass = ec < tol.cumulant && eg < tol.g3c;
    all_pass = all_pass && pass;
    log << "M=" << M << " cumulant3 err=" << ec << " (< " << tol.cumulant << ") g3c err=" << eg << " (< " << tol.g3c
        << ") " << (pass ? "PASS" : "FAIL") << '\n';

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = 0; j < ts.size(); ++j) {
        const std::size_t k = i * ts.size() + j;
        rows.push_back({ts[i], ts[j], ac[k], mc[k], ag[k], mg[k]});
      }
    std::vector<std::pair<std::string, std::string>> meta = {
        {"beta", num(prm.beta)}, {"atoms", std::to_string(M)}, {"p_in", num(prm.p_in)},
        {"theta", num(prm.theta)}, {"n_max", std::to_string(n_max)}, {"cumulant3_error", num(ec)},
        {"g3c_error", num(eg)}};
    std::ostringstream csv;
    io::write_csv(csv, meta, {"t1", "t2", "cumulant3_analytic", "cumulant3_me", "g3c_analytic", "g3c_me"}, rows);
    write_text(with_suffix(cfg, "_M" + std::to_string(M) + ".csv"), csv.str(), out);

    json j;
    j["atoms"] = M;
    j["p_in"] = prm.p_in;
    j["p_in_over_p_sat"] = prm.beta * prm.p_in;
    j["cumulant3_error"] = ec;
    j["cumulant3_threshold"] = tol.cumulant;
    j["g3c_error"] = eg;
    j["g3c_threshold"] = tol.g3c;
    j["pass"] = pass;
    report << io::json_line(j) << '\n';
  }
  write_text(with_suffix(cfg, "_report.jsonl"), report.str(), out);
  log << (all_pass ? "PASS" : "FAIL") << '\n';
  out.exit_code = all_pass ? 0 : 1;
  return out;
}

Outcome cmd_countrate(const io::RunConfig& cfg, std::ostream& log) {
  const auto base = resolve_params(cfg, false);
  const auto order = resolve_order(cfg);
  std::vector<int> atoms;
  if (cfg.values().count("atoms") || cfg.values().count("od"))
    atoms = {base.num_atoms};
  else
    atoms = resolve_atom_range(cfg);
  const double window = cfg.real("window");
  if (!(window > 0.0)) throw io::config_error("window must be positive");
  io::Cache cache(io::Cache::default_dir(cfg));

  Outcome out;
  out.cache_hit = true;
  std::ostringstream lines;
  for (const int M : atoms) {
    PhysParams prm = base;
    prm.num_atoms = M;
    json phys = physics_json(prm);
    phys.erase("p_in");
    phys.erase("theta");
    phys["order"] = to_string(order);
    phys["window"] = num(window);
    bool hit = false;
    const auto v = cached(cache, io::Cache::key("countrate", phys), phys, log, hit, [&] {
      log << "count rate M=" << M << '\n';
      const ThreePhotonField f(prm, order);
      return std::vector<double>{count_rate(f, window).S_tilde};
    });
    out.cache_hit = out.cache_hit && hit;
    json j;
    j["atoms"] = M;
    j["od"] = prm.od();
    j["S_tilde"] = v[0];
    j["S"] = std::pow(prm.p_in, 3) * v[0];
    j["p_in"] = prm.p_in;
    lines << io::json_line(j) << '\n';
    log << "M=" << M << " S_tilde=" << num(v[0]) << '\n';
  }
  write_text(with_suffix(cfg, ".jsonl"), lines.str(), out);
  return out;
}

Outcome cmd_cache_gc(const io::RunConfig& cfg, bool all, std::ostream& log) {
  io::Cache cache(io::Cache::default_dir(cfg));
  const auto r = cache.collect(all);
  log << "cache " << cache.dir().string() << ": removed " << r.removed << ", kept " << r.kept << '\n';
  return {};
}

}  // namespace cwqed::cli
