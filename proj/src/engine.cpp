#include "fedprox/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "fedprox/errors.hpp"

namespace fedprox {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

struct DeviceOutcome {
  Vec solution;
  Vec direction;  // batch gradient at the solution
  double certificate = 0.0;
  bool certified = false;
  double local_step = 0.0;
  double step_residual = kNaN;
};

}  // namespace

std::vector<int> sample_devices(RngStream& rng, int M, int I) {
  if (I < 1 || I > M) throw ConfigError("devices_per_round must satisfy 1 <= I <= M");
  std::vector<int> pool(static_cast<std::size_t>(M));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < I; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   rng.next_below(static_cast<std::uint64_t>(M - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(I));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<Example> sample_minibatch_empirical(RngStream& rng, const DeviceDataset& device,
                                                int b) {
  if (b < 1) throw ConfigError("minibatch size must be >= 1");
  if (device.examples.empty()) throw ConfigError("device dataset is empty");
  std::vector<Example> batch;
  batch.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    batch.push_back(device.examples[rng.next_below(device.examples.size())]);
  }
  return batch;
}

std::vector<Example> sample_minibatch_population(RngStream& rng, const PopulationSpec& spec,
                                                 LossKind kind, int device, int b) {
  if (b < 1) throw ConfigError("minibatch size must be >= 1");
  std::vector<Example> batch;
  batch.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    batch.push_back(sample_population_example(spec, kind, device, rng));
  }
  return batch;
}

double schedule_eta(ScheduleKind kind, double L, double nu, int T, int I, int b, double rho,
                    double manual_eta) {
  if (T < 1) throw ConfigError("rounds must be >= 1");
  const double t = static_cast<double>(T);
  switch (kind) {
    case ScheduleKind::SmoothFedProx:
      if (L <= 0.0) throw ConfigError("SmoothFedProx schedule requires L > 0");
      return (1.0 / (3.0 * L)) *
             std::min(1.0 / std::cbrt(t), std::sqrt(static_cast<double>(I) / t));
    case ScheduleKind::SmoothFedMSPP:
      if (L <= 0.0) throw ConfigError("SmoothFedMSPP schedule requires L > 0");
      return (1.0 / (8.0 * L)) *
             std::min(1.0 / std::cbrt(t), std::sqrt(static_cast<double>(b) * I / t));
    case ScheduleKind::NonsmoothRho:
      if (rho <= 0.0) throw ConfigError("NonsmoothRho schedule requires rho > 0");
      if (nu > 0.0 && rho >= 1.0 / (2.0 * nu)) {
        throw ConfigError("NonsmoothRho schedule requires rho < 1/(2*nu)");
      }
      return rho / std::sqrt(t);
    case ScheduleKind::Manual:
      if (manual_eta <= 0.0) throw ConfigError("manual eta must be > 0");
      return manual_eta;
  }
  throw ConfigError("unknown schedule kind");
}

double epsilon_budget(Algorithm alg, double G, double L, double eta, int I, int b) {
  if (G <= 0.0 || L <= 0.0 || eta <= 0.0) {
    throw ConfigError("epsilon_budget requires positive G, L, eta");
  }
  if (alg == Algorithm::FedProx) {
    return std::min(G / (2.0 * L * std::sqrt(static_cast<double>(I))),
                    G * eta / static_cast<double>(I));
  }
  if (alg == Algorithm::FedMSPP) {
    const double bb = static_cast<double>(b);
    return std::min({G / (2.0 * L), G * G * eta / (8.0 * bb * bb),
                     G * eta / (2.0 * bb * static_cast<double>(I))});
  }
  throw ConfigError("epsilon_budget is defined for FedProx and FedMSPP only");
}

namespace {

double resolved_eta(const FederatedInstance& inst, const RunConfig& cfg) {
  return schedule_eta(cfg.schedule, inst.constants.L.value_or(0.0),
                      inst.constants.nu.value_or(0.0), cfg.rounds, cfg.devices_per_round,
                      cfg.batch_size, cfg.rho, cfg.manual_eta);
}

}  // namespace

void validate_run(const FederatedInstance& inst, const RunConfig& cfg) {
  const int M = inst.num_devices();
  if (M < 1) throw ConfigError("instance has no devices");
  if (cfg.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (cfg.devices_per_round < 1 || cfg.devices_per_round > M) {
    throw ConfigError("devices_per_round must satisfy 1 <= I <= M (M=" + std::to_string(M) +
                      ")");
  }
  if (cfg.algorithm == Algorithm::CentralPPA && cfg.devices_per_round != M) {
    throw ConfigError("central_ppa pools all devices; set devices_per_round = M");
  }
  if (cfg.algorithm == Algorithm::FedMSPP && cfg.batch_size < 1) {
    throw ConfigError("batch_size must be >= 1");
  }
  if (cfg.sampling_mode == SamplingMode::Population) {
    if (cfg.algorithm != Algorithm::FedMSPP) {
      throw ConfigError("population sampling is only meaningful for fedmspp");
    }
    if (!inst.population) throw ConfigError("instance has no population spec");
    if (cfg.full_batch) throw ConfigError("full_batch requires empirical sampling");
  }
  if (cfg.eps_policy == EpsPolicy::TheoremBudget && cfg.algorithm != Algorithm::FedProx &&
      cfg.algorithm != Algorithm::FedMSPP) {
    throw ConfigError("theorem_budget eps policy applies to fedprox/fedmspp only");
  }
  if (cfg.eps_policy == EpsPolicy::TheoremBudget && !is_smooth(inst.loss.kind)) {
    throw ConfigError("theorem_budget eps policy requires a smooth loss (use exact)");
  }
  if (cfg.eps_policy == EpsPolicy::Fixed && cfg.fixed_eps <= 0.0) {
    throw ConfigError("fixed eps must be > 0");
  }
  if (cfg.algorithm == Algorithm::FedAvg) {
    if (cfg.fedavg.epochs < 1) throw ConfigError("fedavg epochs must be >= 1");
    if (cfg.fedavg.minibatch < 1) throw ConfigError("fedavg minibatch must be >= 1");
    if (cfg.fedavg.lr < 0.0) throw ConfigError("fedavg lr must be >= 0");
  }
  if (!cfg.w0.empty() && static_cast<int>(cfg.w0.size()) != inst.dim) {
    throw ConfigError("w0 dimension mismatch");
  }

  const double eta = resolved_eta(inst, cfg);
  if (cfg.algorithm != Algorithm::FedAvg) {
    if (is_smooth(inst.loss.kind)) {
      if (eta >= 1.0 / *inst.constants.L) {
        throw ConfigError("eta must be < 1/L for smooth losses");
      }
    } else {
      const double nu = inst.constants.nu.value_or(0.0);
      if (nu > 0.0 && eta >= 1.0 / nu) {
        throw ConfigError("eta must be < 1/nu for weakly convex losses");
      }
    }
  }
  if (cfg.record_moreau) {
    if (cfg.moreau.rho <= 0.0) throw ConfigError("moreau rho must be > 0");
    const double nu = inst.constants.nu.value_or(0.0);
    if (nu > 0.0 && cfg.moreau.rho >= 1.0 / (2.0 * nu)) {
      throw ConfigError("moreau rho must be < 1/(2*nu)");
    }
  }
}

namespace {

OracleReport solve_prox_dispatch(const ProxSubproblem& sp, const FederatedInstance& inst,
                                 const RunConfig& cfg, double eps_target) {
  if (inst.loss.kind == LossKind::Quadratic) {
    return prox_quadratic_exact(sp);
  }
  if (is_smooth(inst.loss.kind)) {
    const double target = eps_target > 0.0 ? eps_target : cfg.exact_smooth_eps;
    return prox_smooth_gd(sp, *inst.constants.L, target, cfg.solver_iter_cap);
  }
  const double nu = inst.constants.nu.value_or(0.0);
  if (eps_target > 0.0) {
    return prox_nonsmooth_to_eps(sp, nu, eps_target, cfg.solver_iter_cap);
  }
  return prox_nonsmooth_subgrad(sp, nu, cfg.nonsmooth_steps);
}

}  // namespace

TraceLog run(const FederatedInstance& inst, const RunConfig& cfg) {
  validate_run(inst, cfg);
  const auto start_time = std::chrono::steady_clock::now();

  const int M = inst.num_devices();
  const int T = cfg.rounds;
  const std::size_t p = static_cast<std::size_t>(inst.dim);
  const bool smooth = is_smooth(inst.loss.kind);
  const double L = inst.constants.L.value_or(0.0);
  const double G = inst.constants.G;
  const double eta = resolved_eta(inst, cfg);

  double eps_target = 0.0;  // <= 0 means the exact-policy solver
  if (cfg.eps_policy == EpsPolicy::TheoremBudget) {
    eps_target = epsilon_budget(cfg.algorithm, G, L, eta, cfg.devices_per_round,
                                cfg.batch_size);
  } else if (cfg.eps_policy == EpsPolicy::Fixed) {
    eps_target = cfg.fixed_eps;
  }

  const int moreau_stride =
      cfg.moreau_stride > 0 ? cfg.moreau_stride : std::max(1, T / 100);

  PooledData pooled;
  if (cfg.algorithm == Algorithm::CentralPPA) pooled = make_pooled(inst);

  TraceLog trace;
  trace.records.reserve(static_cast<std::size_t>(T));
  Vec w = cfg.w0.empty() ? zeros(p) : cfg.w0;
  trace.iterates.reserve(static_cast<std::size_t>(T) + 1);
  trace.iterates.push_back(w);

  double grad_sq_sum = 0.0;
  double moreau_sq_sum = 0.0;
  long moreau_count = 0;

  for (int t = 1; t <= T; ++t) {
    RoundRecord rec;
    rec.t = t;
    rec.eta = eta;
    rec.eps_budget = eps_target;
    const Vec w_prev = w;

    rec.grad_sq = smooth ? global_grad_sq(inst, w_prev) : kNaN;
    if (smooth) grad_sq_sum += rec.grad_sq;
    rec.moreau_sq = kNaN;
    if (cfg.record_moreau && (t - 1) % moreau_stride == 0) {
      const double mg = moreau_grad(inst, w_prev, cfg.moreau);
      rec.moreau_sq = mg * mg;
      moreau_sq_sum += rec.moreau_sq;
      ++moreau_count;
    }

    if (cfg.algorithm == Algorithm::CentralPPA) {
      rec.sampled_devices.resize(static_cast<std::size_t>(M));
      std::iota(rec.sampled_devices.begin(), rec.sampled_devices.end(), 0);
    } else {
      RngStream rng(cfg.seed, {stream_tag::kDeviceSampling, static_cast<std::uint32_t>(t)});
      rec.sampled_devices = sample_devices(rng, M, cfg.devices_per_round);
    }

    std::vector<DeviceOutcome> outcomes;
    if (cfg.algorithm == Algorithm::CentralPPA) {
      ProxSubproblem sp{inst.loss, pooled.examples, pooled.weights, w_prev, eta};
      OracleReport report = solve_prox_dispatch(sp, inst, cfg, eps_target);
      DeviceOutcome out;
      out.direction = weighted_grad(inst.loss, pooled.examples, pooled.weights, report.solution);
      out.certificate = report.epsilon_certified;
      out.certified = true;
      out.local_step = dist(report.solution, w_prev);
      if (smooth) {
        Vec resid = report.solution;
        axpy(-1.0, w_prev, resid);
        axpy(eta, out.direction, resid);
        out.step_residual = norm(resid);
      }
      out.solution = std::move(report.solution);
      outcomes.push_back(std::move(out));
    } else {
      const auto& sampled = rec.sampled_devices;
      outcomes.resize(sampled.size());
      parallel_for(static_cast<int>(sampled.size()), cfg.threads, [&](int idx) {
        const int m = sampled[static_cast<std::size_t>(idx)];
        const auto& device = inst.devices[static_cast<std::size_t>(m)];
        DeviceOutcome out;

        std::vector<Example> drawn;
        std::span<const Example> batch(device.examples);
        if (cfg.algorithm == Algorithm::FedMSPP && !cfg.full_batch) {
          RngStream rng(cfg.seed, {stream_tag::kMinibatch, static_cast<std::uint32_t>(t),
                                   static_cast<std::uint32_t>(m)});
          drawn = cfg.sampling_mode == SamplingMode::Population
                      ? sample_minibatch_population(rng, *inst.population, inst.loss.kind, m,
                                                    cfg.batch_size)
                      : sample_minibatch_empirical(rng, device, cfg.batch_size);
          batch = drawn;
        }

        if (cfg.algorithm == Algorithm::FedAvg) {
          RngStream rng(cfg.seed, {stream_tag::kLocalSgd, static_cast<std::uint32_t>(t),
                                   static_cast<std::uint32_t>(m)});
          out.solution = local_sgd_epochs(batch, inst.loss, w_prev, cfg.fedavg.epochs,
                                          cfg.fedavg.lr, cfg.fedavg.minibatch, rng);
        } else {
          ProxSubproblem sp{inst.loss, batch, {}, w_prev, eta};
          OracleReport report = solve_prox_dispatch(sp, inst, cfg, eps_target);
          out.certificate = report.epsilon_certified;
          out.certified = true;
          out.solution = std::move(report.solution);
        }

        out.direction = batch_grad(inst.loss, batch, out.solution);
        out.local_step = dist(out.solution, w_prev);
        if (out.certified && smooth) {
          Vec resid = out.solution;
          axpy(-1.0, w_prev, resid);
          axpy(eta, out.direction, resid);
          out.step_residual = norm(resid);
        }
        outcomes[static_cast<std::size_t>(idx)] = std::move(out);
      });
    }

    // Unweighted aggregation in device-id order.
    w = zeros(p);
    const double inv_k = 1.0 / static_cast<double>(outcomes.size());
    for (const auto& out : outcomes) axpy(inv_k, out.solution, w);
    require_finite(w, "aggregated model");
    if (norm(w) > inst.loss.domain_radius) {
      throw SolverError("iterate left the certified domain ball at round " + std::to_string(t),
                        0.0);
    }

    rec.step_norm = dist(w, w_prev);
    double cert_max = 0.0;
    double step_max = 0.0;
    double step_resid_worst = kNaN;
    bool any_cert = false;
    for (const auto& out : outcomes) {
      step_max = std::max(step_max, out.local_step);
      if (out.certified) {
        any_cert = true;
        cert_max = std::max(cert_max, out.certificate);
        if (smooth) step_resid_worst = std::isnan(step_resid_worst) ? out.step_residual
                                                : std::max(step_resid_worst, out.step_residual);
      }
    }
    rec.eps_certified_max = any_cert ? cert_max : kNaN;
    rec.invariant_residuals["local_step_max"] = step_max;
    rec.invariant_residuals["local_step_bound"] =
        smooth ? (G + 2.0 * L * cert_max) * eta : G * eta;
    if (smooth && any_cert) {
      rec.invariant_residuals["step_resid_max"] = step_resid_worst;
      rec.invariant_residuals["step_resid_bound"] = 2.0 * L * cert_max * eta;
    }
    if (smooth && cfg.check_concentration && cfg.algorithm == Algorithm::FedProx &&
        static_cast<int>(outcomes.size()) == M) {
      Vec dbar = zeros(p);
      const double inv_m = 1.0 / static_cast<double>(M);
      for (const auto& out : outcomes) axpy(inv_m, out.direction, dbar);
      Vec gbar = global_grad(inst, w_prev);
      axpy(-1.0, dbar, gbar);
      rec.invariant_residuals["concentration_sq"] = sqnorm(gbar);
      const double bound = L * (G + 2.0 * L * cert_max) * eta;
      rec.invariant_residuals["concentration_bound_sq"] = bound * bound;
    }

    trace.iterates.push_back(w);
    trace.records.push_back(std::move(rec));
  }

  trace.final_model = w;
  trace.summary.avg_grad_sq = smooth ? grad_sq_sum / static_cast<double>(T) : kNaN;
  trace.summary.avg_moreau_sq =
      moreau_count > 0 ? moreau_sq_sum / static_cast<double>(moreau_count) : kNaN;
  RngStream tstar_rng(cfg.seed, {stream_tag::kTStar});
  trace.summary.t_star = static_cast<int>(tstar_rng.next_below(static_cast<std::uint64_t>(T)));
  trace.summary.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return trace;
}

}  // namespace fedprox
