// qgtree: spectra, characteristic functions, Diophantine ladders and the
// uniqueness experiment for Sturm-Liouville operators on metric trees.
//
// Exit codes: 0 success / verdict pass, 2 verdict fail, 1 error.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qgtree/qgtree.hpp"

namespace {

using namespace qgtree;

struct Common {
  std::string tree_path;
  std::string config_path;
  std::string out_path;
  std::string window;
  double step = 0.0;
  int dirichlet_leaf = -1;
  long long count = 0;
  std::vector<long long> n;
  std::uint64_t budget = 10'000'000;
  double h = 0.0;
  bool determinant = false;
};

struct Loaded {
  TreeProblem problem;
  nlohmann::json config = nlohmann::json::object();
};

Loaded load(const Common& c) {
  Loaded l;
  if (!c.config_path.empty()) {
    try {
      l.config = nlohmann::json::parse(read_file(c.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, c.config_path + ": " + e.what());
    }
  }
  if (!c.tree_path.empty())
    l.problem = load_tree(c.tree_path);
  else if (!c.config_path.empty())
    l.problem = tree_from_config(l.config);
  else
    throw Error(Errc::invalid_argument, "give --tree or --config");
  return l;
}

template <class T>
T pick(const T& flag, const T& unset, const nlohmann::json& cfg, const char* key, const T& fallback) {
  if (flag != unset) return flag;
  if (cfg.contains(key)) return cfg.at(key).get<T>();
  return fallback;
}

std::optional<Window> parse_window(std::string text, const nlohmann::json& cfg) {
  if (text.empty() && cfg.contains("window")) {
    const auto& w = cfg.at("window");
    if (w.is_array()) return Window{w.at(0).get<double>(), w.at(1).get<double>()};
    text = w.get<std::string>();
  }
  if (text.empty()) return std::nullopt;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_argument, "window must be lo:hi");
  try {
    return Window{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "window must be lo:hi, got '" + text + "'");
  }
}

std::optional<VertexId> leaf_option(const Common& c, const nlohmann::json& cfg) {
  const int v = pick(c.dirichlet_leaf, -1, cfg, "dirichlet_leaf", -1);
  if (v < 0) return std::nullopt;
  return v;
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(Errc::invalid_argument, "cannot write " + path);
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int run_spectrum(const Common& c) {
  const Loaded l = load(c);
  const auto& [tree, q] = l.problem;
  Window w = parse_window(c.window, l.config).value_or(Window{default_lower_bound(q), 100.0});
  ScanOptions o;
  o.step = pick(c.step, 0.0, l.config, "step", 0.0);
  o.dirichlet_leaf = leaf_option(c, l.config);
  o.use_determinant = c.determinant;
  const Spectrum s = scan_spectrum(tree, q, w, o);
  Output out(c.out_path);
  out.get() << std::setprecision(15) << "lambda,multiplicity\n";
  for (const auto& e : s.entries) out.get() << e.lambda << ',' << e.multiplicity << "\n";
  if (s.weyl_checked && !s.weyl_ok)
    std::cerr << "warning: " << s.count() << " eigenvalues found, Weyl range [" << s.weyl.low << ", " << s.weyl.high
              << "]\n";
  return 0;
}

int run_charfn(const Common& c) {
  const Loaded l = load(c);
  const auto& [tree, q] = l.problem;
  const Window w = parse_window(c.window, l.config).value_or(Window{0.0, 100.0});
  const auto count = pick<long long>(c.count, 0, l.config, "count", 101);
  Output out(c.out_path);
  charfn_samples(out.get(), tree, q, w, static_cast<std::size_t>(count), leaf_option(c, l.config));
  return 0;
}

int run_approx(const Common& c) {
  const Loaded l = load(c);
  const auto& tree = l.problem.tree;
  std::vector<long long> ns = c.n;
  if (ns.empty() && l.config.contains("n")) {
    const auto& j = l.config.at("n");
    ns = j.is_array() ? j.get<std::vector<long long>>() : std::vector<long long>{j.get<long long>()};
  }
  if (ns.empty()) throw Error(Errc::invalid_argument, "give --n");
  ApproxOptions o;
  o.budget = pick<std::uint64_t>(c.budget, 10'000'000, l.config, "budget", 10'000'000);
  const auto alphas = length_ratios(tree);
  Output out(c.out_path);
  auto& os = out.get();
  os << "n,m";
  for (std::size_t i = 0; i < alphas.size(); ++i) os << ",k" << i;
  for (std::size_t i = 0; i < alphas.size(); ++i) os << ",err" << i;
  os << ",bound,sum_k,mu,rational\n" << std::setprecision(15);
  for (long long n : ns) {
    const SimultaneousApprox s = m_sequence(alphas, {n}, o).front();
    os << s.n << ',' << s.m;
    for (long long k : s.k) os << ',' << k;
    for (double e : s.errors) os << ',' << e;
    os << ',' << s.bound << ',' << sum_k(s) << ',' << mu_sequence(tree, {s.m}).mu_values[0] << ','
       << (s.rational ? "yes" : "no") << "\n";
  }
  return 0;
}

int run_verify(const Common& c) {
  const Loaded l = load(c);
  const auto& [tree, q] = l.problem;
  const auto N = pick<long long>(c.count, 0, l.config, "count", 10);
  if (N < 1) throw Error(Errc::invalid_argument, "count must be >= 1");
  const ExperimentReport r = ambarzumyan_experiment(tree, q, static_cast<std::size_t>(N));
  Output out(c.out_path);
  write_report(out.get(), r);
  if (!c.out_path.empty()) std::cout << "verdict: " << r.verdict << "\n";
  return r.pass ? 0 : 2;
}

int run_oracle(const Common& c) {
  const Loaded l = load(c);
  const auto& [tree, q] = l.problem;
  const double h = pick(c.h, 0.0, l.config, "h", 1e-3);
  const auto N = pick<long long>(c.count, 0, l.config, "count", 5);
  if (N < 1) throw Error(Errc::invalid_argument, "count must be >= 1");
  const OracleComparison cmp = oracle_compare(tree, q, h, static_cast<std::size_t>(N));
  Output out(c.out_path);
  auto& os = out.get();
  os << std::setprecision(15) << "index,scan,fd,diff,tolerance\n";
  for (std::size_t i = 0; i < cmp.scan.size(); ++i)
    os << i << ',' << cmp.scan[i] << ',' << cmp.fd[i] << ',' << cmp.diffs[i] << ',' << cmp.tolerances[i] << "\n";
  std::cerr << (cmp.agree ? "agree" : "disagree") << ", max diff " << cmp.max_diff << "\n";
  return cmp.agree ? 0 : 2;
}

void add_input(CLI::App* sub, Common& c) {
  sub->add_option("--tree", c.tree_path, "tree description (line format or JSON)")->check(CLI::ExistingFile);
  sub->add_option("--config", c.config_path, "JSON config embedding the tree")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out_path, "output file (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral computations on metric trees"};
  app.require_subcommand(1);
  Common c;

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues in a window as lambda,multiplicity CSV");
  add_input(spectrum, c);
  spectrum->add_option("--window", c.window, "lo:hi (use --window=-1:25 for negative lo)");
  spectrum->add_option("--step", c.step, "scan step in lambda");
  spectrum->add_option("--dirichlet-leaf", c.dirichlet_leaf, "pendant vertex with the Dirichlet condition");
  spectrum->add_flag("--det", c.determinant, "use the determinant instead of the recursion");

  auto* charfn = app.add_subcommand("charfn", "sample phi_N, phi_D, psi_N, psi_D on a lambda grid");
  add_input(charfn, c);
  charfn->add_option("--window", c.window, "lo:hi");
  charfn->add_option("--count", c.count, "number of samples");
  charfn->add_option("--dirichlet-leaf", c.dirichlet_leaf, "pendant vertex with the Dirichlet condition");

  auto* approx = app.add_subcommand("approx", "pigeonhole approximation of the length ratios");
  add_input(approx, c);
  approx->add_option("--n", c.n, "grid parameter(s), increasing")->expected(1, -1);
  approx->add_option("--budget", c.budget, "maximum number of scanned points");

  auto* verify = app.add_subcommand("verify", "compare sigma(Q) with sigma(0)");
  add_input(verify, c);
  verify->add_option("--count", c.count, "number of eigenvalues compared");

  auto* oracle = app.add_subcommand("oracle", "compare the scan with finite differences");
  oracle->set_help_flag("--help", "Print this help message and exit");
  add_input(oracle, c);
  oracle->add_option("--h", c.h, "mesh width");
  oracle->add_option("--count", c.count, "number of eigenvalues compared");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*spectrum) return run_spectrum(c);
    if (*charfn) return run_charfn(c);
    if (*approx) return run_approx(c);
    if (*verify) return run_verify(c);
    if (*oracle) return run_oracle(c);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
