#include "doseins_tools/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "doseins_tools/audit.hpp"
#include "doseins_tools/server.hpp"
#include "doseins_tools/simulate.hpp"

namespace doseins {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void row(std::ostringstream& os, const std::vector<std::string>& cells, bool csv) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (csv) {
      os << (i ? "," : "") << cells[i];
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, i ? "%17s" : "%4s", cells[i].c_str());
      os << buf;
    }
  }
  os << '\n';
}

HttpServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

std::string boundary_table(const BoundaryTableOptions& o) {
  o.targets.validate();
  if (o.efficacy) o.efficacy->validate();
  if (o.n_max < 1) throw std::domain_error("--n-max must be >= 1");
  const bool informative = o.s.has_value();
  if (informative && !o.r) throw std::domain_error("--r is required with --s");
  if (informative && o.efficacy && !o.v) throw std::domain_error("--v is required with --s for efficacy tables");
  PriorStrength strength;
  if (informative) {
    strength.s = *o.s;
    strength.r = *o.r;
    strength.v = o.v;
    strength.s_efficacy = o.s_eff;
  }
  std::ostringstream os;
  if (o.efficacy) {
    row(os, {"n", "lambda1", "lambda2", "eta", "escalate_t_le", "deescalate_t_ge"}, o.csv);
    const auto prior = informative ? iboinet_hypothesis_prior(strength, o.targets, *o.efficacy) : JointPrior::uniform();
    for (int n = 1; n <= o.n_max; ++n) {
      const auto b = iboinet_boundaries(prior, n, o.targets, *o.efficacy);
      const int esc = static_cast<int>(std::floor(n * b.lambda1 + 1e-12));
      const int de = static_cast<int>(std::ceil(n * b.lambda2 - 1e-12));
      row(os, {std::to_string(n), fmt(b.lambda1), fmt(b.lambda2), fmt(b.eta), esc >= 0 ? std::to_string(esc) : "-",
               de <= n ? std::to_string(de) : "-"},
          o.csv);
    }
  } else {
    row(os, {"n", "lambda_e", "lambda_d", "escalate_t_le", "deescalate_t_ge"}, o.csv);
    const auto prior = informative ? iboin_hypothesis_prior(strength, o.targets) : ToxicityPrior::uniform();
    for (int n = 1; n <= o.n_max; ++n) {
      const auto b = informative ? iboin_boundaries(prior, n, o.targets) : boin_boundaries(o.targets);
      const int esc = static_cast<int>(std::floor(n * b.lambda_e + 1e-12));
      const int de = static_cast<int>(std::ceil(n * b.lambda_d - 1e-12));
      row(os, {std::to_string(n), fmt(b.lambda_e), fmt(b.lambda_d), esc >= 0 ? std::to_string(esc) : "-",
               de <= n ? std::to_string(de) : "-"},
          o.csv);
    }
  }
  return os.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dose-insertion designs: boundaries, simulation and trial conduct"};
  app.require_subcommand(1);
  app.set_version_flag("--version", project_version());

  // boundaries
  auto* b = app.add_subcommand("boundaries", "Print decision boundary tables");
  double phi1 = 0.30;
  std::optional<double> phi2, phi3, r, v;
  std::optional<int> s, s_eff;
  bool efficacy = false;
  double delta1 = 0.5, delta2 = 0.3;
  int n_max = 12;
  bool csv = false;
  b->add_option("--phi1", phi1, "Target DLT probability");
  b->add_option("--phi2", phi2, "Highest under-dosing DLT probability (default 0.6 phi1, or 0.1 phi1 with --efficacy)");
  b->add_option("--phi3", phi3, "Lowest over-dosing DLT probability (default 1.4 phi1)");
  b->add_flag("--efficacy", efficacy, "BOIN-ET tables (lambda1, lambda2, eta)");
  b->add_option("--delta1", delta1, "Target efficacy probability");
  b->add_option("--delta2", delta2, "Highest sub-therapeutic efficacy probability");
  b->add_option("--s", s, "Prior effective sample size (informative table)");
  b->add_option("--s-eff", s_eff, "Efficacy prior effective sample size (defaults to --s)");
  b->add_option("--r", r, "Toxicity skeleton");
  b->add_option("--v", v, "Efficacy skeleton");
  b->add_option("--n-max", n_max, "Largest n in the table");
  b->add_flag("--csv", csv, "Comma-separated output");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run simulation batches from a JSON config");
  std::string config_path;
  std::optional<int> replicates, workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  sim->add_option("config", config_path, std::string("Config file (default: $") + kConfigEnvVar + ")");
  sim->add_option("--replicates", replicates, "Override replicates");
  sim->add_option("--seed", seed, "Override master seed");
  sim->add_option("--workers", workers, "Override worker threads");
  sim->add_option("--output-dir", output_dir, "Override output directory");
  bool quiet = false;
  sim->add_flag("--quiet", quiet, "No per-cell progress");

  // scenarios
  auto* sc = app.add_subcommand("scenarios", "Print scenario fixtures as JSON");
  int n_random = 0;
  std::uint64_t sc_seed = 1;
  std::string shape = "monotone";
  sc->add_option("--random", n_random, "Draw this many random scenarios instead of the fixed table");
  sc->add_option("--seed", sc_seed, "Master seed for random scenarios");
  sc->add_option("--shape", shape, "Efficacy shape: monotone or unimodal");
  sc->add_option("--phi1", phi1, "Target DLT probability");

  // serve
  auto* sv = app.add_subcommand("serve", "Run the HTTP/JSON trial-conduct service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store = "sessions";
  std::optional<std::string> static_dir, token;
  sv->add_option("--host", host, "Bind address");
  sv->add_option("--port", port, "Port (0 picks a free one)");
  sv->add_option("--store", store, "Session store directory");
  sv->add_option("--static-dir", static_dir, "Serve UI assets from this directory");
  sv->add_option("--token", token, "Operator token required on mutations");

  // replay
  auto* rp = app.add_subcommand("replay", "Replay an audit log and compare every decision record");
  std::string audit_path;
  std::optional<std::string> url;
  rp->add_option("audit", audit_path, "Audit log (JSON lines)")->required();
  rp->add_option("--url", url, "Replay against a running service instead of in-process");
  rp->add_option("--token", token, "Operator token for --url");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (*b) {
      BoundaryTableOptions o;
      o.targets.phi1 = phi1;
      o.targets.phi2 = phi2.value_or((efficacy ? 0.1 : 0.6) * phi1);
      o.targets.phi3 = phi3.value_or(1.4 * phi1);
      if (efficacy) o.efficacy = EfficacyTargets{delta1, delta2};
      o.s = s;
      o.s_eff = s_eff;
      o.r = r;
      o.v = v;
      o.n_max = n_max;
      o.csv = csv;
      out << boundary_table(o);
      return 0;
    }
    if (*sim) {
      if (config_path.empty()) {
        const char* env = std::getenv(kConfigEnvVar);
        if (!env || !*env) {
          err << "error: no config file given and " << kConfigEnvVar << " is not set\n";
          return 2;
        }
        config_path = env;
      }
      RunConfig cfg = load_run_config(config_path);
      if (replicates) cfg.replicates = *replicates;
      if (seed) cfg.seed = *seed;
      if (workers) cfg.workers = *workers;
      if (output_dir) cfg.output_dir = *output_dir;
      if (cfg.replicates < 1 || cfg.workers < 1) {
        err << "error: replicates and workers must be >= 1\n";
        return 2;
      }
      try {
        const auto res = run_simulation(cfg, quiet ? nullptr : &err);
        for (const auto& f : res.files) out << f.string() << '\n';
      } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
      }
      return 0;
    }
    if (*sc) {
      json doc;
      if (n_random > 0) {
        auto params = RandomGenParams::for_target(phi1);
        params.shape = parse_efficacy_shape(shape);
        doc = json::array();
        for (int i = 0; i < n_random; ++i) {
          RngStream rng(sc_seed, static_cast<std::uint64_t>(i) * 4);
          json entry = random_scenario(rng, params);
          entry["replicate"] = i;
          doc.push_back(entry);
        }
      } else {
        doc = fixed_scenarios(phi1);
      }
      out << doc.dump(2) << '\n';
      return 0;
    }
    if (*sv) {
      ServiceOptions opts;
      opts.store = store;
      opts.operator_token = token;
      TrialService service(opts);
      std::optional<std::filesystem::path> assets;
      if (static_dir) assets = *static_dir;
      HttpServer server(service, assets);
      const int bound = server.bind(host, port);
      if (bound < 0) {
        err << "error: cannot bind " << host << ":" << port << '\n';
        return 1;
      }
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      out << "listening on http://" << host << ":" << bound << kApiPrefix << " (" << service.session_count()
          << " sessions restored)" << std::endl;
      server.listen();
      g_server = nullptr;
      return 0;
    }
    if (*rp) {
      const auto lines = read_jsonl(audit_path);
      ReplayReport rep;
      if (url) {
        rep = replay_audit(lines, http_transport(*url, token));
      } else {
        TrialService service;
        rep = replay_audit(lines, [&](const HttpCall& c) { return service.call(c); });
      }
      for (const auto& m : rep.mismatches) err << m << '\n';
      out << "replayed " << rep.events << " events into " << rep.trial_id << ": " << rep.matched << " records match"
          << '\n';
      return rep.ok() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace doseins
