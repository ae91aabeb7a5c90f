// Robustness verification CLI: certify l2/linf robustness of dense ReLU
// networks, sweep margin curves, compute verified accuracy, or run attacks.

#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "sdpcrown/adversary.hpp"
#include "sdpcrown/network.hpp"
#include "sdpcrown/optimizer.hpp"

namespace {

using json = nlohmann::json;
using namespace sdpcrown;

struct CommonOpts {
  std::string model_path;
  std::string input_csv;     // "v0,v1,..."
  std::string dataset_path;  // alternative to --input
  int row = 0;
  int label = -1;
  double rho = 0.0;
  std::string norm = "l2";
  std::string method = "sdp-crown";
  std::string out_path;
  OptimizerConfig opt;
  int pgd_steps = 200;
  int pgd_restarts = 10;
  double pgd_step_factor = 0.1;
};

Vector parse_vector(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

// Resolves the input point (and label, when it comes from a dataset row).
Vector resolve_input(const CommonOpts& o, int* label) {
  if (!o.input_csv.empty()) return parse_vector(o.input_csv);
  if (o.dataset_path.empty())
    throw std::runtime_error("provide --input or --dataset");
  auto samples = load_dataset(o.dataset_path);
  if (o.row < 0 || static_cast<std::size_t>(o.row) >= samples.size())
    throw std::runtime_error("--row out of range");
  if (label && *label < 0) *label = samples[static_cast<std::size_t>(o.row)].label;
  return samples[static_cast<std::size_t>(o.row)].input;
}

PerturbationSet make_set(const CommonOpts& o, const Vector& x) {
  if (o.rho < 0) throw std::runtime_error("rho must be >= 0");
  if (o.norm == "linf") return Box{x, Vector::Constant(x.size(), o.rho)};
  if (o.norm == "l2") return Ball{x, o.rho};
  throw std::runtime_error("unknown norm: " + o.norm);
}

std::vector<Vector> margin_functionals(Index out_dim, int label) {
  std::vector<Vector> cs;
  if (out_dim == 1) {
    cs.push_back(Vector::Ones(1));
    return cs;
  }
  if (label < 0 || label >= out_dim) throw std::runtime_error("label required and in range");
  for (Index j = 0; j < out_dim; ++j) {
    if (j == label) continue;
    Vector c = Vector::Zero(out_dim);
    c[label] = 1.0;
    c[j] = -1.0;
    cs.push_back(c);
  }
  return cs;
}

double lower_bound_for(const Network& net, const Vector& c, const PerturbationSet& set,
                       const CommonOpts& o) {
  if (o.method == "lipnaive") {
    if (o.norm != "l2") throw std::runtime_error("lipnaive requires --norm l2");
    const auto& ball = std::get<Ball>(set);
    return lip_naive_bound(net, c, ball.center, ball.radius);
  }
  Method m = parse_method(o.method);
  if (o.norm == "linf" && m != Method::lirpa_box)
    throw std::runtime_error("--norm linf requires --method lirpa-box");
  return optimize_lower_bound(net, c, set, m, o.opt).lower_bound;
}

json config_echo(const CommonOpts& o) {
  return json{{"model", o.model_path},
              {"rho", o.rho},
              {"norm", o.norm},
              {"method", o.method},
              {"seed", o.opt.seed},
              {"optimizer",
               {{"iterations", o.opt.iterations},
                {"lr_alpha", o.opt.lr_alpha},
                {"lr_lambda", o.opt.lr_lambda},
                {"decay", o.opt.decay}}},
              {"pgd",
               {{"steps", o.pgd_steps},
                {"restarts", o.pgd_restarts},
                {"step_size_factor", o.pgd_step_factor}}}};
}

struct InstanceReport {
  int id = 0;
  int label = -1;
  std::vector<double> margins;
  double pgd_upper = 0.0;
  VerifyStatus status = VerifyStatus::unknown;
  double ms = 0.0;
};

json to_json(const InstanceReport& r) {
  return json{{"id", r.id},           {"label", r.label},
              {"margins", r.margins}, {"pgd_upper", r.pgd_upper},
              {"status", status_name(r.status)}, {"ms", r.ms}};
}

InstanceReport run_instance(const Network& net, const Vector& x, int label, int id,
                            const CommonOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  InstanceReport rep;
  rep.id = id;
  rep.label = label;
  const PerturbationSet set = make_set(o, x);
  const auto cs = margin_functionals(net.output_dim(), label);

  double min_lower = std::numeric_limits<double>::infinity();
  double min_upper = std::numeric_limits<double>::infinity();
  for (const auto& c : cs) {
    const double lb = lower_bound_for(net, c, set, o);
    rep.margins.push_back(lb);
    min_lower = std::min(min_lower, lb);
    const auto atk =
        pgd_upper_bound(net, c, x, o.norm == "l2" ? o.rho : 0.0, o.pgd_steps, o.pgd_restarts,
                        o.pgd_step_factor, o.opt.seed);
    min_upper = std::min(min_upper, atk.value);
  }
  rep.pgd_upper = min_upper;
  if (min_lower >= 0)
    rep.status = VerifyStatus::verified;
  else if (min_upper < 0)
    rep.status = VerifyStatus::falsified;
  else
    rep.status = VerifyStatus::unknown;
  rep.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void emit(const std::string& text, const std::string& out_path) {
  std::cout << text << "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot open output file: " + out_path);
    f << text << "\n";
  }
}

int cmd_verify(const CommonOpts& o) {
  Network net = load_network(o.model_path);
  int label = o.label;
  const Vector x = resolve_input(o, &label);
  const InstanceReport rep = run_instance(net, x, label, o.row, o);

  json report{{"schema", 1},
              {"config", config_echo(o)},
              {"instances", json::array({to_json(rep)})},
              {"verified_accuracy", rep.status == VerifyStatus::verified ? 1.0 : 0.0}};
  emit(report.dump(1), o.out_path);
  switch (rep.status) {
    case VerifyStatus::verified: return 0;
    case VerifyStatus::falsified: return 1;
    case VerifyStatus::unknown: return 2;
  }
  return 2;
}

int cmd_curve(const CommonOpts& o, const std::string& rho_grid, const std::string& methods) {
  Network net = load_network(o.model_path);
  int label = o.label;
  const Vector x = resolve_input(o, &label);

  const Vector grid = parse_vector(rho_grid);
  if (grid.size() == 0) throw std::runtime_error("--rho-grid must be nonempty");
  for (Index i = 1; i < grid.size(); ++i)
    if (grid[i] < grid[i - 1]) throw std::runtime_error("--rho-grid must be ascending");
  std::vector<std::string> method_list;
  {
    std::stringstream ss(methods);
    std::string tok;
    while (std::getline(ss, tok, ',')) method_list.push_back(tok);
  }
  if (method_list.empty()) throw std::runtime_error("--methods must be nonempty");

  const auto cs = margin_functionals(net.output_dim(), label);
  std::ostringstream csv;
  csv << "rho,method,lower_bound,pgd_upper\n";
  csv.precision(17);
  for (const auto& method : method_list) {
    CommonOpts mo = o;
    mo.method = method;
    for (Index i = 0; i < grid.size(); ++i) {
      mo.rho = grid[i];
      const PerturbationSet set = make_set(mo, x);
      double lower = std::numeric_limits<double>::infinity();
      double upper = std::numeric_limits<double>::infinity();
      for (const auto& c : cs) {
        lower = std::min(lower, lower_bound_for(net, c, set, mo));
        upper = std::min(upper, pgd_upper_bound(net, c, x, mo.norm == "l2" ? mo.rho : 0.0,
                                                mo.pgd_steps, mo.pgd_restarts,
                                                mo.pgd_step_factor, mo.opt.seed)
                                    .value);
      }
      csv << grid[i] << "," << method << "," << lower << "," << upper << "\n";
    }
  }
  std::string text = csv.str();
  text.pop_back();  // emit() appends the final newline
  emit(text, o.out_path);
  return 0;
}

int cmd_accuracy(const CommonOpts& o, int limit, int jobs) {
  Network net = load_network(o.model_path);
  if (o.dataset_path.empty()) throw std::runtime_error("--dataset required");
  auto samples = load_dataset(o.dataset_path);
  std::size_t n = samples.size();
  if (limit > 0) n = std::min(n, static_cast<std::size_t>(limit));
  if (n == 0) throw std::runtime_error("empty dataset");
  for (std::size_t i = 0; i < n; ++i)
    if (samples[i].label < 0 || samples[i].label >= net.output_dim())
      throw std::runtime_error("dataset label out of range at row " + std::to_string(i));

  std::vector<InstanceReport> reports(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const auto& s = samples[i];
      InstanceReport rep = run_instance(net, s.input, s.label, static_cast<int>(i), o);
      // not robust unless also correctly classified at the clean input
      const Vector logits = forward(net, s.input);
      Index pred;
      logits.maxCoeff(&pred);
      if (net.output_dim() > 1 && pred != s.label) rep.status = VerifyStatus::unknown;
      reports[i] = rep;  // input order preserved by indexed writes
    }
  };
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int nthreads = std::max(1, std::min<int>(jobs > 0 ? jobs : hw, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::size_t verified = 0;
  json inst = json::array();
  for (const auto& r : reports) {
    if (r.status == VerifyStatus::verified) ++verified;
    inst.push_back(to_json(r));
  }
  json report{{"schema", 1},
              {"config", config_echo(o)},
              {"instances", inst},
              {"verified_accuracy", static_cast<double>(verified) / static_cast<double>(n)}};
  emit(report.dump(1), o.out_path);
  return 0;
}

int cmd_attack(const CommonOpts& o) {
  Network net = load_network(o.model_path);
  int label = o.label;
  const Vector x = resolve_input(o, &label);
  if (o.norm != "l2") throw std::runtime_error("attack supports --norm l2 only");
  const auto cs = margin_functionals(net.output_dim(), label);

  AttackResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& c : cs) {
    const auto atk = pgd_upper_bound(net, c, x, o.rho, o.pgd_steps, o.pgd_restarts,
                                     o.pgd_step_factor, o.opt.seed);
    if (atk.value < best.value) best = atk;
  }
  json report{{"schema", 1},
              {"config", config_echo(o)},
              {"value", best.value},
              {"point", std::vector<double>(best.point.data(), best.point.data() + best.point.size())},
              {"feasible", best.feasible}};
  emit(report.dump(1), o.out_path);
  return 0;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_method = true) {
  cmd->add_option("model", o.model_path, "model JSON file")->required();
  cmd->add_option("--input", o.input_csv, "input vector as comma-separated values");
  cmd->add_option("--dataset", o.dataset_path, "dataset CSV (label,v0,v1,...)");
  cmd->add_option("--row", o.row, "dataset row to use (default 0)");
  cmd->add_option("--label", o.label, "true label (defaults to dataset row label)");
  cmd->add_option("--rho", o.rho, "perturbation radius");
  cmd->add_option("--norm", o.norm, "perturbation norm: l2 or linf (default l2)");
  if (needs_method)
    cmd->add_option("--method", o.method,
                    "lirpa-box, sdp-crown, sdp-crown-ext or lipnaive (default sdp-crown)");
  cmd->add_option("--iterations", o.opt.iterations, "optimizer iterations");
  cmd->add_option("--lr-alpha", o.opt.lr_alpha, "optimizer slope learning rate");
  cmd->add_option("--lr-lambda", o.opt.lr_lambda, "optimizer multiplier learning rate");
  cmd->add_option("--decay", o.opt.decay, "optimizer learning-rate decay");
  cmd->add_option("--seed", o.opt.seed, "random seed");
  cmd->add_option("--pgd-steps", o.pgd_steps, "PGD steps per restart");
  cmd->add_option("--pgd-restarts", o.pgd_restarts, "PGD restarts");
  cmd->add_option("--pgd-step-factor", o.pgd_step_factor, "PGD step size as a fraction of rho");
  cmd->add_option("--out", o.out_path, "also write the report to this file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l2/linf robustness verification for dense ReLU networks"};
  app.require_subcommand(1);

  CommonOpts vo, co, ao, ko;
  std::string rho_grid, methods = "lirpa-box,sdp-crown";
  int limit = 0, jobs = 0;

  auto* verify = app.add_subcommand("verify", "certify one input");
  add_common(verify, vo);
  auto* curve = app.add_subcommand("curve", "margin lower bounds over a rho grid (CSV)");
  add_common(curve, co);
  curve->add_option("--rho-grid", rho_grid, "ascending comma-separated radii")->required();
  curve->add_option("--methods", methods, "comma-separated method list");
  auto* accuracy = app.add_subcommand("accuracy", "verified accuracy over a dataset");
  add_common(accuracy, ao);
  accuracy->add_option("--limit", limit, "use only the first N rows");
  accuracy->add_option("--jobs", jobs, "worker threads (default: hardware)");
  auto* attack = app.add_subcommand("attack", "PGD attack on one input");
  add_common(attack, ko, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (verify->parsed()) return cmd_verify(vo);
    if (curve->parsed()) return cmd_curve(co, rho_grid, methods);
    if (accuracy->parsed()) return cmd_accuracy(ao, limit, jobs);
    if (attack->parsed()) return cmd_attack(ko);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
