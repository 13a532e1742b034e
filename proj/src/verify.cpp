#include "fedprox/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fedprox/stability.hpp"

namespace fedprox {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

CheckResult make_result(std::string name, bool pass, std::string detail) {
  return CheckResult{std::move(name), pass, std::move(detail)};
}

Vec random_ball_point(RngStream& rng, std::size_t p, double radius) {
  Vec w(p);
  for (double& v : w) v = rng.next_normal();
  const double n = norm(w);
  if (n == 0.0) return zeros(p);
  const double r = radius * std::pow(rng.next_unit(), 1.0 / static_cast<double>(p));
  scale(w, r / n);
  return w;
}

std::vector<Example> random_examples(RngStream& rng, int n, int p, double label_scale) {
  std::vector<Example> data;
  data.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Example z;
    z.feature.resize(static_cast<std::size_t>(p));
    for (double& v : z.feature) v = rng.next_normal();
    z.label = label_scale * rng.next_normal();
    data.push_back(std::move(z));
  }
  return data;
}

// ---------------------------------------------------------------- rng checks

CheckResult check_rng() {
  RngStream a(42, {0, 3, 7});
  RngStream b(42, {0, 3, 7});
  for (int i = 0; i < 100; ++i) {
    if (a.next_u64() != b.next_u64()) {
      return make_result("rng-determinism", false, "replay diverged");
    }
  }
  RngStream c(42, {0, 3, 7});
  RngStream d(42, {0, 3, 8});
  std::vector<std::uint64_t> cs(10000), ds(10000);
  for (auto& v : cs) v = c.next_u64();
  for (auto& v : ds) v = d.next_u64();
  for (std::size_t i = 0; i + 8 <= cs.size(); ++i) {
    bool same = true;
    for (std::size_t k = 0; k < 8 && same; ++k) same = cs[i + k] == ds[i + k];
    if (same) return make_result("rng-determinism", false, "sibling streams collide");
  }
  return make_result("rng-determinism", true, "replay identical, siblings independent");
}

CheckResult check_rng_uniformity() {
  const int n = 100000;
  RngStream rng(2024, {1});
  std::vector<double> draws(static_cast<std::size_t>(n));
  for (double& v : draws) v = rng.next_unit();
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = draws[static_cast<std::size_t>(i)];
    ks = std::max(ks, std::max(u - static_cast<double>(i) / n,
                               static_cast<double>(i + 1) / n - u));
  }
  return make_result("rng-uniformity", ks < 0.01, "KS statistic " + fmt(ks));
}

// --------------------------------------------------------------- loss checks

CheckResult check_loss_regularity(std::uint64_t seed) {
  const LossKind kinds[] = {LossKind::Quadratic, LossKind::Logistic, LossKind::SigmoidSquared,
                            LossKind::Absolute, LossKind::PhaseRetrieval};
  std::ostringstream detail;
  for (LossKind kind : kinds) {
    LossModel model{kind, 10.0};
    RngStream rng(seed, {stream_tag::kProbes, static_cast<std::uint32_t>(kind)});
    const int p = 4;
    auto data = random_examples(rng, 30, p, kind == LossKind::PhaseRetrieval ? 2.0 : 1.0);
    if (kind == LossKind::Logistic) {
      for (auto& z : data) z.label = z.label >= 0.0 ? 1.0 : -1.0;
    }
    if (kind == LossKind::SigmoidSquared) {
      for (auto& z : data) z.label = 1.0 / (1.0 + std::exp(-z.label));
    }
    const LossConstants c = certify_constants(model, data, model.domain_radius);

    for (int trial = 0; trial < 1000; ++trial) {
      const Vec w = random_ball_point(rng, p, model.domain_radius);
      const Vec w2 = random_ball_point(rng, p, model.domain_radius);
      const Example& z = data[rng.next_below(data.size())];

      const double lv = loss_value(model, w, z);
      const double lv2 = loss_value(model, w2, z);
      if (lv < 0.0 || !std::isfinite(lv)) {
        return make_result("loss-regularity", false,
                           std::string(loss_kind_name(kind)) + ": negative/non-finite value");
      }
      const double d = dist(w, w2);
      if (std::abs(lv - lv2) > c.G * d * (1.0 + 1e-9) + 1e-12) {
        return make_result("loss-regularity", false,
                           std::string(loss_kind_name(kind)) + ": Lipschitz violation");
      }
      const Vec g = loss_subgrad(model, w, z);
      const Vec g2 = loss_subgrad(model, w2, z);
      if (norm(g) > c.G * (1.0 + 1e-9) + 1e-12) {
        return make_result("loss-regularity", false,
                           std::string(loss_kind_name(kind)) + ": subgradient exceeds G");
      }
      if (c.L && dist(g, g2) > *c.L * d * (1.0 + 1e-9) + 1e-12) {
        return make_result("loss-regularity", false,
                           std::string(loss_kind_name(kind)) + ": smoothness violation");
      }
      const double nu = c.nu.value_or(c.L.value_or(0.0));
      // Weak convexity: l(w) >= l(w2) + <g2, w - w2> - nu/2 ||w - w2||^2.
      Vec diff = w;
      axpy(-1.0, w2, diff);
      if (lv < lv2 + dot(g2, diff) - 0.5 * nu * d * d - 1e-9) {
        return make_result("loss-regularity", false,
                           std::string(loss_kind_name(kind)) + ": weak convexity violation");
      }
    }

    if (is_smooth(kind)) {
      for (int trial = 0; trial < 50; ++trial) {
        const Vec w = random_ball_point(rng, p, 2.0);
        const Example& z = data[rng.next_below(data.size())];
        const Vec g = loss_subgrad(model, w, z);
        const double h = 1e-6;
        for (int j = 0; j < p; ++j) {
          Vec wp = w, wm = w;
          wp[static_cast<std::size_t>(j)] += h;
          wm[static_cast<std::size_t>(j)] -= h;
          const double fd = (loss_value(model, wp, z) - loss_value(model, wm, z)) / (2.0 * h);
          const double scale_ref = std::max(1e-3, norm(g));
          if (std::abs(fd - g[static_cast<std::size_t>(j)]) > 1e-5 * scale_ref) {
            return make_result("loss-regularity", false,
                               std::string(loss_kind_name(kind)) +
                                   ": finite-difference gradient mismatch");
          }
        }
      }
    }
  }
  return make_result("loss-regularity", true,
                     "Lipschitz/smoothness/weak-convexity on 1000 pairs per kind");
}

}  // namespace

CheckResult check_constants_certified(const FederatedInstance& inst, std::uint64_t seed) {
  RngStream rng(seed, {stream_tag::kProbes, 99});
  double worst_g = 0.0;
  double worst_l = 0.0;
  const double radius = inst.loss.domain_radius;
  for (int trial = 0; trial < 2000; ++trial) {
    const Vec w = random_ball_point(rng, static_cast<std::size_t>(inst.dim), radius);
    const Vec w2 = random_ball_point(rng, static_cast<std::size_t>(inst.dim), radius);
    const auto& dev = inst.devices[rng.next_below(inst.devices.size())];
    const Example& z = dev.examples[rng.next_below(dev.examples.size())];
    const Vec g = loss_subgrad(inst.loss, w, z);
    worst_g = std::max(worst_g, norm(g));
    if (inst.constants.L) {
      const Vec g2 = loss_subgrad(inst.loss, w2, z);
      const double d = dist(w, w2);
      if (d > 1e-9) worst_l = std::max(worst_l, dist(g, g2) / d);
    }
  }
  if (worst_g > inst.constants.G * (1.0 + 1e-9)) {
    return make_result("constants-certified", false,
                       "sampled subgradient norm " + fmt(worst_g) + " exceeds certified G " +
                           fmt(inst.constants.G));
  }
  if (inst.constants.L && worst_l > *inst.constants.L * (1.0 + 1e-9)) {
    return make_result("constants-certified", false,
                       "sampled curvature " + fmt(worst_l) + " exceeds certified L " +
                           fmt(*inst.constants.L));
  }
  return make_result("constants-certified", true,
                     "sampled sup ||subgrad|| = " + fmt(worst_g) + " <= G = " +
                         fmt(inst.constants.G));
}

namespace {

// ------------------------------------------------------------- prox checks

CheckResult check_prox_certificates(std::uint64_t seed) {
  RngStream rng(seed, {stream_tag::kProbes, 11});
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 3;
    auto batch = random_examples(rng, 5, p, 1.0);
    LossModel model{LossKind::Quadratic, 10.0};
    const LossConstants c = certify_constants(model, batch, model.domain_radius);
    const double eta = 0.5 / *c.L;
    ProxSubproblem sp{model, batch, {}, random_ball_point(rng, p, 2.0), eta};

    const OracleReport exact = prox_quadratic_exact(sp);
    const double q_star = prox_objective(sp, exact.solution);
    if (exact.epsilon_certified > 1e-12) ++violations;
    const OracleReport gd = prox_smooth_gd(sp, *c.L, 1e-8);
    if (prox_objective(sp, gd.solution) - q_star > gd.epsilon_certified + 1e-12) ++violations;
    const OracleReport sub = prox_nonsmooth_subgrad(sp, 0.0, 20000);
    if (prox_objective(sp, sub.solution) - q_star > sub.epsilon_certified + 1e-12) {
      ++violations;
    }
  }
  return make_result("prox-certificate-soundness", violations == 0,
                     violations == 0 ? "0 violations over 100 random subproblems"
                                     : fmt(violations) + " violations");
}

CheckResult check_prox_step_identity(std::uint64_t seed) {
  RngStream rng(seed, {stream_tag::kProbes, 12});
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 4;
    auto batch = random_examples(rng, 10, p, 1.0);
    for (auto& z : batch) z.label = z.label >= 0.0 ? 1.0 : -1.0;
    LossModel model{LossKind::Logistic, 10.0};
    const LossConstants c = certify_constants(model, batch, model.domain_radius);
    const double eta = (0.1 + 0.8 * rng.next_unit()) / *c.L;
    ProxSubproblem sp{model, batch, {}, random_ball_point(rng, p, 2.0), eta};
    const double eps = std::pow(10.0, -2.0 - 8.0 * rng.next_unit());
    const OracleReport report = prox_smooth_gd(sp, *c.L, eps);

    Vec resid = report.solution;
    axpy(-1.0, sp.center, resid);
    axpy(eta, batch_grad(model, batch, report.solution), resid);
    const double bound = 2.0 * *c.L * report.epsilon_certified * eta;
    if (norm(resid) > bound + 1e-9) {
      return make_result("prox-step-identity", false,
                         "residual " + fmt(norm(resid)) + " > bound " + fmt(bound));
    }
    if (report.epsilon_certified > eps) {
      return make_result("prox-step-identity", false, "certificate above requested target");
    }
  }
  return make_result("prox-step-identity", true,
                     "residual <= 2*L*eps*eta on 50 smooth oracle calls");
}

CheckResult check_prox_step_length(std::uint64_t seed) {
  RngStream rng(seed, {stream_tag::kProbes, 13});
  for (int trial = 0; trial < 8; ++trial) {
    const int p = 3;
    auto batch = random_examples(rng, 8, p, 1.0);
    LossModel model{LossKind::Absolute, 10.0};
    const LossConstants c = certify_constants(model, batch, model.domain_radius);
    const double eta = 0.05 + 0.3 * rng.next_unit();
    ProxSubproblem sp{model, batch, {}, random_ball_point(rng, p, 2.0), eta};
    const OracleReport report = prox_nonsmooth_subgrad(sp, 0.0, 100000);
    const double step = dist(report.solution, sp.center);
    if (step > c.G * eta * (1.0 + 1e-3)) {
      return make_result("prox-step-length", false,
                         "step " + fmt(step) + " > G*eta = " + fmt(c.G * eta));
    }
  }
  return make_result("prox-step-length", true,
                     "||solution - center|| <= G*eta*(1+1e-3) at K=1e5");
}

CheckResult check_three_point(std::uint64_t seed) {
  RngStream rng(seed, {stream_tag::kProbes, 14});
  const int p = 3;
  auto batch = random_examples(rng, 6, p, 1.0);
  LossModel model{LossKind::Quadratic, 10.0};
  const double eta = 0.2;
  ProxSubproblem sp{model, batch, {}, random_ball_point(rng, p, 2.0), eta};
  const Vec w_plus = prox_quadratic_exact(sp).solution;
  const double lhs = batch_risk(model, batch, w_plus) + sqdist(w_plus, sp.center) / (2 * eta);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec u = random_ball_point(rng, p, 3.0);
    const double rhs = batch_risk(model, batch, u) + sqdist(u, sp.center) / (2 * eta) -
                       (1.0 / eta / 2.0) * sqdist(w_plus, u);
    if (lhs > rhs + 1e-9) {
      return make_result("prox-three-point", false, "inequality violated");
    }
  }
  return make_result("prox-three-point", true, "holds at 100 random comparison points");
}

// ------------------------------------------------------------ engine checks

FederatedInstance quadratic_fixture(std::uint64_t seed, int devices, int dim, int n,
                                    double shift) {
  HeterogeneityConfig het;
  het.devices = devices;
  het.dim = dim;
  het.base_n = n;
  het.shift = shift;
  het.noise_std = 0.1;
  return generate_instance(het, LossModel{LossKind::Quadratic, 10.0}, seed);
}

CheckResult check_engine_determinism(std::uint64_t seed) {
  FederatedInstance inst = quadratic_fixture(seed, 6, 5, 20, 1.0);
  RunConfig cfg;
  cfg.algorithm = Algorithm::FedMSPP;
  cfg.rounds = 15;
  cfg.devices_per_round = 3;
  cfg.batch_size = 4;
  cfg.schedule = ScheduleKind::Manual;
  cfg.manual_eta = 0.3 / *inst.constants.L;
  cfg.eps_policy = EpsPolicy::Exact;
  cfg.seed = seed;
  const TraceLog one = run(inst, cfg);
  cfg.threads = 2;
  const TraceLog two = run(inst, cfg);
  cfg.threads = 1;
  const TraceLog three = run(inst, cfg);
  const bool same = one.iterates == two.iterates && one.iterates == three.iterates;
  return make_result("engine-determinism", same,
                     same ? "bit-identical iterates across replays and thread counts"
                          : "replay diverged");
}

CheckResult check_engine_aggregation(std::uint64_t seed) {
  FederatedInstance inst = quadratic_fixture(seed, 5, 4, 15, 1.0);
  RunConfig cfg;
  cfg.algorithm = Algorithm::FedProx;
  cfg.rounds = 1;
  cfg.devices_per_round = 5;
  cfg.schedule = ScheduleKind::Manual;
  cfg.manual_eta = 0.3 / *inst.constants.L;
  cfg.eps_policy = EpsPolicy::Exact;
  cfg.seed = seed;
  const TraceLog trace = run(inst, cfg);
  const AllDeviceSolves solves =
      solve_all_devices(inst, zeros(4), cfg.manual_eta, 1e-12, 100000);
  Vec mean = zeros(4);
  for (const Vec& s : solves.solutions) axpy(1.0 / 5.0, s, mean);
  const double diff = dist(mean, trace.iterates[1]);
  return make_result("engine-aggregation", diff <= 1e-13,
                     "independent aggregate differs by " + fmt(diff));
}

CheckResult check_eps_compliance(std::uint64_t seed) {
  FederatedInstance inst = quadratic_fixture(seed, 6, 5, 20, 1.0);
  for (Algorithm alg : {Algorithm::FedProx, Algorithm::FedMSPP}) {
    RunConfig cfg;
    cfg.algorithm = alg;
    cfg.rounds = 40;
    cfg.devices_per_round = 3;
    cfg.batch_size = 4;
    cfg.schedule = alg == Algorithm::FedProx ? ScheduleKind::SmoothFedProx
                                             : ScheduleKind::SmoothFedMSPP;
    cfg.eps_policy = EpsPolicy::TheoremBudget;
    cfg.seed = seed;
    const TraceLog trace = run(inst, cfg);
    for (const RoundRecord& rec : trace.records) {
      if (rec.eps_certified_max > rec.eps_budget) {
        return make_result("engine-eps-compliance", false,
                           "certificate above budget at round " + std::to_string(rec.t));
      }
      const auto resid = rec.invariant_residuals.find("step_resid_max");
      if (resid != rec.invariant_residuals.end() &&
          resid->second > 2.0 * *inst.constants.L * rec.eps_budget * rec.eta + 1e-9) {
        return make_result("engine-eps-compliance", false,
                           "step residual above 2*L*eps*eta at round " + std::to_string(rec.t));
      }
    }
  }
  return make_result("engine-eps-compliance", true,
                     "certificates within theorem budgets for FedProx and FedMSPP");
}

CheckResult check_engine_step_bound(std::uint64_t seed) {
  HeterogeneityConfig het;
  het.devices = 4;
  het.dim = 3;
  het.base_n = 10;
  het.shift = 1.0;
  const FederatedInstance inst =
      generate_instance(het, LossModel{LossKind::Absolute, 10.0}, seed);
  RunConfig cfg;
  cfg.algorithm = Algorithm::FedProx;
  cfg.rounds = 50;
  cfg.devices_per_round = 2;
  cfg.schedule = ScheduleKind::NonsmoothRho;
  cfg.rho = 0.1;
  cfg.eps_policy = EpsPolicy::Exact;
  cfg.nonsmooth_steps = 100000;
  cfg.seed = seed;
  const TraceLog trace = run(inst, cfg);
  const double G = inst.constants.G;
  for (const RoundRecord& rec : trace.records) {
    const double bound = G * rec.eta * (1.0 + 1e-3);
    if (rec.step_norm > bound ||
        rec.invariant_residuals.at("local_step_max") > bound) {
      return make_result("engine-step-bound", false,
                         "step above G*eta at round " + std::to_string(rec.t));
    }
  }
  return make_result("engine-step-bound", true,
                     "round and device steps within G*eta*(1+1e-3) at K=1e5");
}

CheckResult check_fedmspp_reduction(std::uint64_t seed) {
  HeterogeneityConfig het;
  het.devices = 4;
  het.dim = 4;
  het.base_n = 12;
  het.shift = 1.0;
  FederatedInstance inst = generate_instance(het, LossModel{LossKind::Logistic, 10.0}, seed);
  RunConfig fp;
  fp.algorithm = Algorithm::FedProx;
  fp.rounds = 12;
  fp.devices_per_round = 2;
  fp.schedule = ScheduleKind::Manual;
  fp.manual_eta = 0.4 / *inst.constants.L;
  fp.eps_policy = EpsPolicy::Fixed;
  fp.fixed_eps = 1e-10;
  fp.seed = seed;
  RunConfig ms = fp;
  ms.algorithm = Algorithm::FedMSPP;
  ms.full_batch = true;
  ms.batch_size = het.base_n;
  const TraceLog a = run(inst, fp);
  const TraceLog b = run(inst, ms);
  const bool same = a.iterates == b.iterates;
  return make_result("fedmspp-reduction", same,
                     same ? "full-batch FedMSPP trace identical to FedProx"
                          : "traces differ");
}

CheckResult check_concentration(std::uint64_t seed) {
  FederatedInstance inst = quadratic_fixture(seed, 6, 5, 25, 1.0);
  RunConfig cfg;
  cfg.algorithm = Algorithm::FedProx;
  cfg.rounds = 30;
  cfg.devices_per_round = 6;
  cfg.schedule = ScheduleKind::SmoothFedProx;
  cfg.eps_policy = EpsPolicy::TheoremBudget;
  cfg.check_concentration = true;
  cfg.seed = seed;
  const TraceLog trace = run(inst, cfg);
  for (const RoundRecord& rec : trace.records) {
    const double lhs = rec.invariant_residuals.at("concentration_sq");
    const double rhs = rec.invariant_residuals.at("concentration_bound_sq");
    if (lhs > rhs + 1e-9) {
      return make_result("engine-concentration", false,
                         "concentration residual above bound at round " + std::to_string(rec.t));
    }
  }
  return make_result("engine-concentration", true,
                     "||grad - dbar||^2 within L^2*(G+2*L*eps)^2*eta^2 every round");
}

// ------------------------------------------------------- diagnostics checks

FederatedInstance scalar_absolute_fixture() {
  FederatedInstance inst;
  inst.dim = 1;
  DeviceDataset dev;
  dev.device_id = 0;
  dev.examples.push_back(Example{{1.0}, 0.0});
  inst.devices.push_back(dev);
  inst.loss = LossModel{LossKind::Absolute, 10.0};
  inst.constants = certify_constants(inst.loss, inst.devices[0].examples, 10.0);
  return inst;
}

CheckResult check_moreau_consistency(std::uint64_t seed) {
  FederatedInstance inst = quadratic_fixture(seed, 4, 5, 20, 1.0);
  RngStream rng(seed, {stream_tag::kProbes, 21});
  const Vec w = random_ball_point(rng, 5, 3.0);
  const double gg = global_grad_sq(inst, w);
  for (double rho : {1e-3, 1e-4}) {
    MoreauConfig cfg{rho, 100000, 1e-14};
    const double mg = moreau_grad(inst, w, cfg);
    const double ratio = mg * mg / gg;
    const double window = 3.0 * *inst.constants.L * rho;
    if (ratio < 1.0 - window || ratio > 1.0 + window) {
      return make_result("diag-moreau-consistency", false,
                         "ratio " + fmt(ratio) + " outside 1 +/- " + fmt(window));
    }
  }
  return make_result("diag-moreau-consistency", true,
                     "envelope and direct gradient agree to first order");
}

}  // namespace

CheckResult check_moreau_identity_fd() {
  const FederatedInstance inst = scalar_absolute_fixture();
  const MoreauConfig cfg{1.0, 200000, 1e-12};
  const double h = 1e-3;
  for (double w0 : {3.0, 0.5, 0.0}) {
    const Vec w{w0};
    const double identity = moreau_grad(inst, w, cfg);
    const double fd = (moreau_envelope_value(inst, Vec{w0 + h}, cfg) -
                       moreau_envelope_value(inst, Vec{w0 - h}, cfg)) /
                      (2.0 * h);
    if (std::abs(std::abs(fd) - identity) > 1e-4) {
      return make_result("diag-moreau-identity", false,
                         "at w=" + fmt(w0) + ": identity " + fmt(identity) + " vs fd " +
                             fmt(fd));
    }
  }
  return make_result("diag-moreau-identity", true,
                     "matches envelope finite difference at w in {3, 0.5, 0}");
}

CheckResult check_lgd_homogeneous(std::uint64_t seed) {
  HeterogeneityConfig het;
  het.devices = 6;
  het.dim = 5;
  het.base_n = 30;
  het.share_data = true;
  const FederatedInstance inst =
      generate_instance(het, LossModel{LossKind::Quadratic, 10.0}, seed);
  RngStream rng(seed, {stream_tag::kProbes, 22});
  std::vector<Vec> probes;
  for (int i = 0; i < 10; ++i) probes.push_back(random_ball_point(rng, 5, 3.0));
  const LgdReport report = lgd_fit(inst, probes);
  const bool pass = report.b_sq_min_h0 && std::abs(*report.b_sq_min_h0 - 1.0) <= 1e-6 &&
                    report.h_sq_min_b1 <= 1e-8;
  return make_result("diag-lgd-homogeneous", pass,
                     "B^2 = " + (report.b_sq_min_h0 ? fmt(*report.b_sq_min_h0) : "absent") +
                         ", H^2 = " + fmt(report.h_sq_min_b1));
}

CheckResult check_lgd_monotone(std::uint64_t seed) {
  RngStream rng(seed, {stream_tag::kProbes, 23});
  std::vector<Vec> probes;
  for (int i = 0; i < 10; ++i) probes.push_back(random_ball_point(rng, 5, 3.0));
  double prev = -1.0;
  std::ostringstream detail;
  for (double shift : {0.0, 1.0, 2.0}) {
    HeterogeneityConfig het;
    het.devices = 8;
    het.dim = 5;
    het.base_n = 30;
    het.shift = shift;
    const FederatedInstance inst =
        generate_instance(het, LossModel{LossKind::Quadratic, 10.0}, seed);
    const LgdReport report = lgd_fit(inst, probes);
    detail << "H^2(shift=" << shift << ")=" << fmt(report.h_sq_min_b1) << ' ';
    if (report.h_sq_min_b1 < prev) {
      return make_result("diag-lgd-monotone", false, detail.str());
    }
    prev = report.h_sq_min_b1;
  }
  return make_result("diag-lgd-monotone", true, detail.str());
}

CheckResult check_direction_stats(const FederatedInstance& inst, int states, int resamples,
                                  std::uint64_t seed) {
  RunConfig cfg;
  cfg.algorithm = Algorithm::FedProx;
  cfg.rounds = states;
  cfg.devices_per_round = std::max(1, inst.num_devices() / 2);
  cfg.schedule = ScheduleKind::Manual;
  cfg.manual_eta = is_smooth(inst.loss.kind) ? 0.3 / *inst.constants.L : 0.05;
  cfg.eps_policy = EpsPolicy::Exact;
  cfg.nonsmooth_steps = 20000;
  cfg.seed = seed;
  const TraceLog trace = run(inst, cfg);

  const int M = inst.num_devices();
  const int I = cfg.devices_per_round;
  const std::size_t p = static_cast<std::size_t>(inst.dim);
  const double G = inst.constants.G;

  for (int s = 0; s < states; ++s) {
    const Vec& w_prev = trace.iterates[static_cast<std::size_t>(s)];
    const AllDeviceSolves solves =
        solve_all_devices(inst, w_prev, cfg.manual_eta, 1e-12, cfg.nonsmooth_steps);
    Vec d_bar = zeros(p);
    for (const Vec& d : solves.directions) axpy(1.0 / M, d, d_bar);

    RngStream rng(seed, {stream_tag::kProbes, 31, static_cast<std::uint32_t>(s)});
    Vec mean = zeros(p);
    Vec mean_sq = zeros(p);
    double msq_mean = 0.0;
    double msq_m2 = 0.0;
    for (int trial = 0; trial < resamples; ++trial) {
      const std::vector<int> subset = sample_devices(rng, M, I);
      Vec d_t = zeros(p);
      for (int m : subset) {
        axpy(1.0 / I, solves.directions[static_cast<std::size_t>(m)], d_t);
      }
      const double v = sqdist(d_t, d_bar);
      const double delta = v - msq_mean;
      msq_mean += delta / (trial + 1);
      msq_m2 += delta * (v - msq_mean);
      for (std::size_t j = 0; j < p; ++j) {
        mean[j] += d_t[j];
        mean_sq[j] += d_t[j] * d_t[j];
      }
    }
    const double n = static_cast<double>(resamples);
    for (std::size_t j = 0; j < p; ++j) {
      const double mu = mean[j] / n;
      const double var = std::max(0.0, mean_sq[j] / n - mu * mu);
      const double se = std::sqrt(var / n);
      if (std::abs(mu - d_bar[j]) > 4.0 * se + 1e-12) {
        return make_result("engine-direction-stats", false,
                           "component mean off by more than 4*SE at state " +
                               std::to_string(s));
      }
    }
    const double msq_se = std::sqrt(std::max(0.0, msq_m2 / (n - 1.0)) / n);
    const double rel_se = msq_mean > 0.0 ? msq_se / msq_mean : 0.0;
    const double bound = (G * G / I) * (1.0 + 3.0 * rel_se);
    if (msq_mean > bound) {
      return make_result("engine-direction-stats", false,
                         "E||d_t - dbar||^2 = " + fmt(msq_mean) + " above G^2/I = " +
                             fmt(G * G / I));
    }
  }
  return make_result("engine-direction-stats", true,
                     fmt(states) + " states x " + fmt(resamples) +
                         " resamples: mean within 4*SE, variance within G^2/I");
}

CheckResult check_homogeneous_reduction(int devices, int dim, int per_device, int rounds,
                                        double tol, std::uint64_t seed) {
  HeterogeneityConfig het;
  het.devices = devices;
  het.dim = dim;
  het.base_n = per_device;
  het.share_data = true;
  const FederatedInstance inst =
      generate_instance(het, LossModel{LossKind::Quadratic, 10.0}, seed);

  RunConfig fp;
  fp.algorithm = Algorithm::FedProx;
  fp.rounds = rounds;
  fp.devices_per_round = devices;
  fp.schedule = ScheduleKind::SmoothFedProx;
  fp.eps_policy = EpsPolicy::Exact;
  fp.seed = seed;
  RunConfig central = fp;
  central.algorithm = Algorithm::CentralPPA;

  const TraceLog a = run(inst, fp);
  const TraceLog b = run(inst, central);
  double max_diff = 0.0;
  for (std::size_t t = 0; t < a.iterates.size(); ++t) {
    max_diff = std::max(max_diff, dist(a.iterates[t], b.iterates[t]));
  }
  return make_result("homogeneous-reduction", max_diff <= tol,
                     "max iterate difference " + fmt(max_diff) + " (tol " + fmt(tol) + ")");
}

namespace {

// -------------------------------------------------------- stability checks

CheckResult check_stability_a1(const StabilitySection& s, std::uint64_t seed) {
  PopulationSpec pop;
  pop.ground_truth = {Vec(static_cast<std::size_t>(s.dim), 0.5)};
  pop.cov_diag = Vec(static_cast<std::size_t>(s.dim), 1.0);
  pop.noise_std = s.noise_std;
  const LossModel loss{LossKind::Logistic, 10.0};

  RngStream data_rng(seed, {stream_tag::kStability, 10});
  std::vector<Example> data, data2, replacements;
  for (int i = 0; i < s.n; ++i) {
    data.push_back(sample_population_example(pop, loss.kind, 0, data_rng));
  }
  for (int i = 0; i < 2 * s.n; ++i) {
    data2.push_back(sample_population_example(pop, loss.kind, 0, data_rng));
  }
  for (int i = 0; i < s.trials; ++i) {
    replacements.push_back(sample_population_example(pop, loss.kind, 0, data_rng));
  }

  RngStream trial_rng(seed, {stream_tag::kStability, 11});
  const Vec center = zeros(static_cast<std::size_t>(s.dim));
  const StabilityReport one = measure_argument_stability(
      data, loss, replacements, center, s.eta_times_l, s.solver_eps, trial_rng);
  if (one.violations != 0) {
    return make_result("stability-argument", false,
                       std::to_string(one.violations) + " bound violations at N=" +
                           std::to_string(s.n));
  }
  RngStream trial_rng2(seed, {stream_tag::kStability, 12});
  const StabilityReport two = measure_argument_stability(
      data2, loss, replacements, center, s.eta_times_l, s.solver_eps, trial_rng2);
  if (two.violations != 0) {
    return make_result("stability-argument", false, "bound violations at doubled N");
  }
  const double ratio = two.observed_max / one.observed_max;
  if (ratio < 0.3 || ratio > 0.8) {
    return make_result("stability-argument", false,
                       "doubling N scaled observed max by " + fmt(ratio) +
                           ", outside [0.3, 0.8]");
  }
  return make_result("stability-argument", true,
                     "0 violations in " + std::to_string(2 * s.trials) +
                         " trials; doubling ratio " + fmt(ratio));
}

CheckResult check_stability_a2_a3(const StabilitySection& s, std::uint64_t seed) {
  PopulationSpec pop;
  pop.ground_truth = {Vec(static_cast<std::size_t>(s.dim), 0.5)};
  pop.cov_diag = Vec(static_cast<std::size_t>(s.dim), 1.0);
  pop.noise_std = s.noise_std;
  const LossModel loss{LossKind::Quadratic, 10.0};
  const int n_per_set = 10;

  const MonteCarloComparison es =
      efron_stein_check(pop, loss, n_per_set, s.eta_times_l, s.samples, s.solver_eps, seed);
  if (!es.pass()) {
    return make_result("stability-efron-stein", false,
                       "lhs " + fmt(es.lhs) + " above bound " + fmt(es.bound));
  }
  const GradGeneralizationReport gg = grad_generalization_check(
      pop, loss, n_per_set, s.eta_times_l, s.samples, s.solver_eps, seed);
  if (!gg.bias.pass() || !gg.variance.pass()) {
    return make_result("stability-grad-generalization", false,
                       "bias " + fmt(gg.bias.lhs) + "/" + fmt(gg.bias.bound) + ", var " +
                           fmt(gg.variance.lhs) + "/" + fmt(gg.variance.bound));
  }
  return make_result("stability-generalization", true,
                     "Efron-Stein lhs " + fmt(es.lhs) + " <= " + fmt(es.bound) +
                         "; bias " + fmt(gg.bias.lhs) + " <= " + fmt(gg.bias.bound) +
                         "; var " + fmt(gg.variance.lhs) + " <= " + fmt(gg.variance.bound));
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const ConfigFile& cfg) {
  const std::uint64_t seed = cfg.run.seed;
  std::vector<CheckResult> results;
  results.push_back(check_rng());
  results.push_back(check_rng_uniformity());
  results.push_back(check_loss_regularity(seed));
  const FederatedInstance inst = build_instance(cfg.instance, seed);
  results.push_back(check_constants_certified(inst, seed));
  results.push_back(check_prox_certificates(seed));
  results.push_back(check_prox_step_identity(seed));
  results.push_back(check_prox_step_length(seed));
  results.push_back(check_three_point(seed));
  results.push_back(check_engine_determinism(seed));
  results.push_back(check_engine_aggregation(seed));
  results.push_back(check_eps_compliance(seed));
  results.push_back(check_engine_step_bound(seed));
  results.push_back(check_fedmspp_reduction(seed));
  results.push_back(check_concentration(seed));
  results.push_back(check_moreau_identity_fd());
  results.push_back(check_moreau_consistency(seed));
  results.push_back(check_lgd_homogeneous(seed));
  results.push_back(check_lgd_monotone(seed));
  {
    FederatedInstance dir_inst = quadratic_fixture(seed, 8, 6, 30, 1.0);
    results.push_back(check_direction_stats(dir_inst, 20, 10000, seed));
  }
  results.push_back(check_homogeneous_reduction(8, 10, 100, 100, 1e-10, seed));
  results.push_back(check_stability_a1(cfg.stability, seed));
  results.push_back(check_stability_a2_a3(cfg.stability, seed));
  return results;
}

}  // namespace fedprox
