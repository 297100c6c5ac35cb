// SPDX-License-Identifier: Apache-2.0
// Run configuration parsing, the instrumented step loop, JSONL trajectory
// output and optimizer checkpointing.

#include "mtopt/run.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mtopt/errors.hpp"
#include "mtopt/toy2d.hpp"

namespace mtopt {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument(std::string("config: unknown key \"") +
                                  it.key() + "\" in " + ctx);
    }
  }
}

Eigen::VectorXd vec_from_json(const json& j, const char* ctx) {
  if (!j.is_array()) {
    throw std::invalid_argument(std::string("config: ") + ctx +
                                " must be an array of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number()) {
      throw std::invalid_argument(std::string("config: ") + ctx +
                                  " must be an array of numbers");
    }
    v[i++] = x.get<double>();
  }
  return v;
}

std::vector<double> std_vec_from_json(const json& j, const char* ctx) {
  const Eigen::VectorXd v = vec_from_json(j, ctx);
  return std::vector<double>(v.data(), v.data() + v.size());
}

ordered_json vec_to_ojson(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return ordered_json(out);
}

ProblemConfig parse_problem_config(const json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: \"problem\" must be an object");
  }
  ProblemConfig pc;
  pc.kind = j.at("kind").get<std::string>();
  if (pc.kind == "toy2d") {
    check_keys(j, {"kind"}, "problem (toy2d)");
    return pc;
  }
  if (pc.kind != "quadratic_bank") {
    throw std::invalid_argument("config: unknown problem kind \"" + pc.kind +
                                "\"");
  }
  check_keys(j, {"kind", "tasks", "dim", "seed", "scales", "offsets",
                 "curvature"},
             "problem (quadratic_bank)");
  if (j.contains("tasks")) pc.bank.tasks = j.at("tasks").get<Eigen::Index>();
  if (j.contains("dim")) pc.bank.dim = j.at("dim").get<Eigen::Index>();
  if (j.contains("seed")) pc.bank.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("scales")) {
    pc.bank.scales = std_vec_from_json(j.at("scales"), "problem.scales");
  }
  if (j.contains("offsets")) {
    pc.bank.offsets = std_vec_from_json(j.at("offsets"), "problem.offsets");
  }
  if (j.contains("curvature")) {
    const auto c = j.at("curvature").get<std::string>();
    if (c == "dense") {
      pc.bank.curvature = Curvature::kDense;
    } else if (c == "diagonal") {
      pc.bank.curvature = Curvature::kDiagonal;
    } else {
      throw std::invalid_argument("config: curvature must be \"dense\" or "
                                  "\"diagonal\", got \"" + c + "\"");
    }
  }
  return pc;
}

const char* curvature_name(Curvature c) {
  return c == Curvature::kDense ? "dense" : "diagonal";
}

ModelUpdater updater_from_name(const std::string& s) {
  if (s == "plain") return ModelUpdater::kPlainGd;
  if (s == "moment") return ModelUpdater::kMoment;
  throw std::invalid_argument(
      "config: model_updater must be \"plain\" or \"moment\", got \"" + s +
      "\"");
}

LogitMode logit_mode_from_name(const std::string& s) {
  if (s == "plain") return LogitMode::kPlainGd;
  if (s == "moment") return LogitMode::kMoment;
  throw std::invalid_argument(
      "config: logit_mode must be \"plain\" or \"moment\", got \"" + s +
      "\"");
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kLs: return "ls";
    case Method::kSi: return "si";
    case Method::kRlw: return "rlw";
    case Method::kMgda: return "mgda";
    case Method::kPcgrad: return "pcgrad";
    case Method::kCagrad: return "cagrad";
    case Method::kImtlg: return "imtlg";
    case Method::kNashmtl: return "nashmtl";
    case Method::kFixedWeights: return "fixed_weights";
    case Method::kFamo: return "famo";
    case Method::kFamoExactDual: return "famo_exact_dual";
  }
  throw std::invalid_argument("unknown method enum value");
}

Method method_from_name(const std::string& name) {
  static const std::pair<const char*, Method> kTable[] = {
      {"ls", Method::kLs},
      {"si", Method::kSi},
      {"rlw", Method::kRlw},
      {"mgda", Method::kMgda},
      {"pcgrad", Method::kPcgrad},
      {"cagrad", Method::kCagrad},
      {"imtlg", Method::kImtlg},
      {"nashmtl", Method::kNashmtl},
      {"fixed_weights", Method::kFixedWeights},
      {"famo", Method::kFamo},
      {"famo_exact_dual", Method::kFamoExactDual},
  };
  for (const auto& [n, m] : kTable) {
    if (name == n) return m;
  }
  throw std::invalid_argument("config: unknown method \"" + name + "\"");
}

RunConfig parse_run_config(const json& j) {
  try {
    if (!j.is_object()) {
      throw std::invalid_argument("config: document must be a JSON object");
    }
    check_keys(j,
               {"problem", "method", "theta0", "steps", "alpha",
                "model_updater", "beta", "gamma", "epsilon", "logit_mode",
                "cagrad_c", "solver_tol", "solver_max_iter", "update_every",
                "seed", "fixed_weights", "output", "record_time"},
               "top level");
    RunConfig cfg;
    cfg.problem = parse_problem_config(j.at("problem"));
    cfg.method = method_from_name(j.at("method").get<std::string>());
    cfg.theta0 = vec_from_json(j.at("theta0"), "theta0");
    if (j.contains("steps")) cfg.steps = j.at("steps").get<std::int64_t>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("model_updater")) {
      cfg.model_updater =
          updater_from_name(j.at("model_updater").get<std::string>());
    }
    if (j.contains("beta")) cfg.beta = j.at("beta").get<double>();
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    if (j.contains("logit_mode")) {
      cfg.logit_mode =
          logit_mode_from_name(j.at("logit_mode").get<std::string>());
    }
    if (j.contains("cagrad_c")) cfg.cagrad_c = j.at("cagrad_c").get<double>();
    if (j.contains("solver_tol")) {
      cfg.solver_tol = j.at("solver_tol").get<double>();
    }
    if (j.contains("solver_max_iter")) {
      cfg.solver_max_iter = j.at("solver_max_iter").get<int>();
    }
    if (j.contains("update_every")) {
      cfg.update_every = j.at("update_every").get<int>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fixed_weights")) {
      cfg.fixed_weights = vec_from_json(j.at("fixed_weights"),
                                        "fixed_weights");
    }
    if (j.contains("output")) {
      cfg.output_path = j.at("output").get<std::string>();
    }
    if (j.contains("record_time")) {
      cfg.record_time = j.at("record_time").get<bool>();
    }
    if (cfg.steps < 0) {
      throw std::invalid_argument("config: steps must be nonnegative");
    }
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("config: cannot open \"" + path + "\"");
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return parse_run_config(j);
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json pj;
  pj["kind"] = cfg.problem.kind;
  if (cfg.problem.kind == "quadratic_bank") {
    const auto& b = cfg.problem.bank;
    pj["tasks"] = b.tasks;
    pj["dim"] = b.dim;
    pj["seed"] = b.seed;
    if (!b.scales.empty()) pj["scales"] = ordered_json(b.scales);
    if (!b.offsets.empty()) pj["offsets"] = ordered_json(b.offsets);
    pj["curvature"] = curvature_name(b.curvature);
  }
  ordered_json j;
  j["problem"] = pj;
  j["method"] = method_name(cfg.method);
  j["theta0"] = vec_to_ojson(cfg.theta0);
  j["steps"] = cfg.steps;
  j["alpha"] = cfg.alpha;
  j["model_updater"] =
      cfg.model_updater == ModelUpdater::kMoment ? "moment" : "plain";
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["epsilon"] = cfg.epsilon;
  j["logit_mode"] = cfg.logit_mode == LogitMode::kMoment ? "moment" : "plain";
  j["cagrad_c"] = cfg.cagrad_c;
  j["solver_tol"] = cfg.solver_tol;
  j["solver_max_iter"] = cfg.solver_max_iter;
  j["update_every"] = cfg.update_every;
  j["seed"] = cfg.seed;
  if (cfg.fixed_weights.size() > 0) {
    j["fixed_weights"] = vec_to_ojson(cfg.fixed_weights);
  }
  if (!cfg.output_path.empty()) j["output"] = cfg.output_path;
  j["record_time"] = cfg.record_time;
  return j;
}

std::unique_ptr<MultiTaskProblem> make_problem(const ProblemConfig& pc) {
  if (pc.kind == "toy2d") return std::make_unique<Toy2d>();
  if (pc.kind == "quadratic_bank") return make_quadratic_bank(pc.bank);
  throw std::invalid_argument("config: unknown problem kind \"" + pc.kind +
                              "\"");
}

nlohmann::ordered_json run_summary_to_json(const RunSummary& s) {
  ordered_json j;
  j["steps_completed"] = s.steps_completed;
  j["final_losses"] = vec_to_ojson(s.final_losses);
  j["final_theta"] = vec_to_ojson(s.final_theta);
  j["grad_evals"] = s.counters.grad_evals;
  j["loss_evals"] = s.counters.loss_evals;
  j["peak_live_vectors"] = s.peak_live_vectors;
  j["wall_seconds"] = s.wall_seconds;
  j["failed"] = s.failed;
  if (s.failed) j["failure"] = s.failure;
  return j;
}

RunSummary run(const RunConfig& cfg) {
  auto problem = make_problem(cfg.problem);
  if (cfg.theta0.size() != problem->dim()) {
    throw std::invalid_argument("config: theta0 length does not match the "
                                "problem dimension");
  }
  auto& gauge = VecGauge::instance();
  gauge.track(problem->dim());

  const bool is_famo =
      cfg.method == Method::kFamo || cfg.method == Method::kFamoExactDual;
  std::optional<FamoOptimizer> famo;
  std::optional<BaselineOptimizer> base;
  if (is_famo) {
    FamoOptions fo;
    fo.alpha = cfg.alpha;
    fo.beta = cfg.beta;
    fo.gamma = cfg.gamma;
    fo.epsilon = cfg.epsilon;
    fo.logit_mode = cfg.logit_mode;
    fo.model_updater = cfg.model_updater;
    fo.dual_tol = cfg.solver_tol;
    fo.dual_max_iter = cfg.solver_max_iter;
    famo.emplace(cfg.theta0, problem->tasks(), fo);
  } else {
    BaselineOptions bo;
    bo.method = cfg.method;
    bo.alpha = cfg.alpha;
    bo.model_updater = cfg.model_updater;
    bo.epsilon = cfg.epsilon;
    bo.cagrad_c = cfg.cagrad_c;
    bo.solver_tol = cfg.solver_tol;
    bo.solver_max_iter = cfg.solver_max_iter;
    bo.seed = cfg.seed;
    bo.update_every = cfg.update_every;
    bo.fixed_weights = cfg.fixed_weights;
    base.emplace(cfg.theta0, problem->tasks(), bo);
  }

  InstrumentedProblem iprob(*problem);
  std::ofstream out;
  if (!cfg.output_path.empty()) {
    out.open(cfg.output_path, std::ios::trunc);
    if (!out) {
      throw std::invalid_argument("config: cannot open output \"" +
                                  cfg.output_path + "\" for writing");
    }
  }

  RunSummary s;
  Eigen::VectorXd losses(problem->tasks());
  Eigen::VectorXd weights;
  using clock = std::chrono::steady_clock;
  for (std::int64_t t = 1; t <= cfg.steps; ++t) {
    double d_norm = 0.0;
    std::int64_t t_ns = 0;
    try {
      const auto t0 = clock::now();
      if (is_famo) {
        const FamoStepInfo info = cfg.method == Method::kFamo
                                      ? famo->step(iprob)
                                      : famo->exact_dual_step(iprob);
        const auto t1 = clock::now();
        t_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                   .count();
        weights = info.weights;
        losses = info.new_losses;  // already evaluated by the step itself
        d_norm = info.d_norm;
      } else {
        const BaselineStepInfo info = base->step(iprob);
        const auto t1 = clock::now();
        t_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                   .count();
        weights = info.weights;
        // observability readout, deliberately outside the counters
        problem->eval_losses(base->theta(), losses);
        d_norm = info.d_norm;
      }
    } catch (const NumericalError& e) {
      s.failed = true;
      s.failure = e.what();
      break;
    }
    s.wall_seconds += static_cast<double>(t_ns) * 1e-9;
    s.steps_completed = t;
    if (out.is_open()) {
      ordered_json line;
      line["step"] = t;
      line["losses"] = vec_to_ojson(losses);
      line["weights"] = vec_to_ojson(weights);
      line["d_norm"] = d_norm;
      line["grad_evals"] = iprob.counters().grad_evals;
      line["loss_evals"] = iprob.counters().loss_evals;
      line["t_ns"] = cfg.record_time ? t_ns : 0;
      out << line.dump() << '\n';
    }
  }

  const Eigen::VectorXd& theta = is_famo ? famo->theta() : base->theta();
  s.final_theta = theta;
  s.final_losses.resize(problem->tasks());
  problem->eval_losses(theta, s.final_losses);
  s.counters = iprob.counters();
  s.peak_live_vectors = gauge.peak();

  if (!cfg.output_path.empty()) {
    std::ofstream sum(cfg.output_path + ".summary.json", std::ios::trunc);
    if (!sum) {
      throw std::invalid_argument("config: cannot open summary file next to "
                                  "\"" + cfg.output_path + "\"");
    }
    sum << run_summary_to_json(s).dump(2) << '\n';
  }
  return s;
}

nlohmann::ordered_json famo_checkpoint(const FamoOptimizer& opt) {
  ordered_json j;
  j["theta"] = vec_to_ojson(opt.theta());
  j["xi"] = vec_to_ojson(opt.logits());
  j["prev_shifted"] = vec_to_ojson(opt.prev_shifted_losses());
  j["step"] = opt.step_count();
  auto dump_adam = [](const AdamUpdater& a) {
    ordered_json aj;
    aj["m"] = vec_to_ojson(a.exp_avg());
    aj["v"] = vec_to_ojson(a.exp_avg_sq());
    aj["t"] = a.step_count();
    return aj;
  };
  if (const AdamUpdater* a = opt.model_adam()) {
    j["model_adam"] = dump_adam(*a);
  }
  if (const AdamUpdater* a = opt.logit_adam()) {
    j["logit_adam"] = dump_adam(*a);
  }
  return j;
}

void famo_restore(FamoOptimizer& opt, const nlohmann::json& j) {
  try {
    check_keys(j, {"theta", "xi", "prev_shifted", "step", "model_adam",
                   "logit_adam"},
               "checkpoint");
    const Eigen::VectorXd theta = vec_from_json(j.at("theta"), "theta");
    const Eigen::VectorXd xi = vec_from_json(j.at("xi"), "xi");
    const Eigen::VectorXd prev =
        vec_from_json(j.at("prev_shifted"), "prev_shifted");
    const auto step = j.at("step").get<std::int64_t>();
    if (theta.size() != opt.theta().size() || xi.size() != opt.tasks() ||
        (prev.size() != 0 && prev.size() != opt.tasks())) {
      throw std::invalid_argument(
          "checkpoint: state sizes do not match the optimizer");
    }
    auto load_adam = [&](const char* key, AdamUpdater* a) {
      if (j.contains(key) != (a != nullptr)) {
        throw std::invalid_argument(
            std::string("checkpoint: moment state mismatch for ") + key);
      }
      if (a == nullptr) return;
      const auto& aj = j.at(key);
      check_keys(aj, {"m", "v", "t"}, key);
      a->restore(vec_from_json(aj.at("m"), "m"),
                 vec_from_json(aj.at("v"), "v"),
                 aj.at("t").get<std::int64_t>());
    };
    load_adam("model_adam", opt.model_adam());
    load_adam("logit_adam", opt.logit_adam());
    opt.restore(theta, xi, prev, step);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace mtopt
