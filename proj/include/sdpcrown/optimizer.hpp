#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sdpcrown/box.hpp"
#include "sdpcrown/network.hpp"
#include "sdpcrown/sdp.hpp"
#include "sdpcrown/sets.hpp"

namespace sdpcrown {

enum class Method { lirpa_box, sdp_crown, sdp_crown_ext };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::lirpa_box: return "lirpa-box";
    case Method::sdp_crown: return "sdp-crown";
    case Method::sdp_crown_ext: return "sdp-crown-ext";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "lirpa-box") return Method::lirpa_box;
  if (s == "sdp-crown") return Method::sdp_crown;
  if (s == "sdp-crown-ext") return Method::sdp_crown_ext;
  throw std::invalid_argument("unknown method: " + s);
}

struct OptimizerConfig {
  int iterations = 300;
  double lr_alpha = 0.5;
  double lr_lambda = 0.05;  // also used for tau
  double decay = 0.98;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Free variables of the relaxation, one block per hidden layer k = 1..N-1.
struct RelaxationParams {
  std::vector<Vector> alpha;  // in [0,1], full layer width
  Vector lambda;              // >= lambda_min, one scalar per layer
  std::vector<Vector> tau;    // >= 0, extension only
};

inline constexpr double kLambdaMin = 1e-8;

enum class VerifyStatus { verified, falsified, unknown };

inline const char* status_name(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::verified: return "verified";
    case VerifyStatus::falsified: return "falsified";
    case VerifyStatus::unknown: return "unknown";
  }
  return "?";
}

struct VerificationResult {
  double lower_bound = 0.0;
  RelaxationParams best_params;
  std::optional<double> upper_bound;
  VerifyStatus status = VerifyStatus::unknown;
  double wall_time_ms = 0.0;
};

/// One bound-maximization problem: a network, an output functional c and an
/// input set, with intermediate bounds precomputed once and frozen.
/// evaluate() is the differentiable objective the optimizer ascends; its
/// value at feasible parameters is always a sound lower bound on c.f(x).
class BoundProblem {
 public:
  BoundProblem(Network net, Vector c, PerturbationSet input_set, Method method)
      : net_(std::move(net)), c_(std::move(c)), input_(std::move(input_set)), method_(method) {
    if (c_.size() != net_.output_dim())
      throw std::invalid_argument("BoundProblem: c dimension mismatch");
    if (method_ != Method::lirpa_box && !std::holds_alternative<Ball>(input_) &&
        !std::holds_alternative<Ellipsoid>(input_))
      throw std::invalid_argument("BoundProblem: sdp methods need a ball or ellipsoid input set");

    const Box box = enclosing_box(input_);
    boxes_ = ibp(net_, box.center, box.radius);
    base_relax_ = relaxations_from_boxes(boxes_, 0.5);

    if (method_ == Method::sdp_crown) {
      const auto* ball = std::get_if<Ball>(&input_);
      if (!ball) throw std::invalid_argument("BoundProblem: sdp-crown needs a ball input set");
      balls_ = ball_propagate(net_, ball->center, ball->radius);
    } else if (method_ == Method::sdp_crown_ext) {
      if (const auto* ball = std::get_if<Ball>(&input_)) {
        ells_ = ellipsoid_propagate_network(net_, ball->center, ball->radius);
      } else {
        const auto& e = std::get<Ellipsoid>(input_);
        EllipsoidBounds cur;
        Vector cc = e.center, axes = e.axes;
        for (std::size_t k = 0; k < net_.depth(); ++k) {
          if (k > 0) cc = cc.cwiseMax(0.0);
          Vector b = net_.layers()[k].bias_or_zero();
          auto [nc, na] = ellipsoid_propagate(net_.layers()[k].weight, cc, axes, &b);
          cc = nc;
          axes = na;
          cur.center.push_back(cc);
          cur.axes.push_back(axes);
        }
        ells_ = cur;
      }
    }
  }

  const Network& net() const { return net_; }
  std::size_t hidden_layers() const { return net_.depth() - 1; }
  const BoxBounds& boxes() const { return boxes_; }

  RelaxationParams initial_params() const {
    RelaxationParams p;
    const std::size_t H = hidden_layers();
    p.lambda = Vector::Constant(static_cast<Index>(H), 1e-2);
    for (std::size_t k = 0; k < H; ++k) {
      const Index width = boxes_.center[k].size();
      p.alpha.push_back(Vector::Constant(width, 0.5));
      p.tau.push_back(Vector::Zero(width));
    }
    if (method_ != Method::lirpa_box) warm_start_lambda(p);
    return p;
  }

  /// Objective value; fills analytic gradients when grad != nullptr. At
  /// kinks of min/max/abs terms the derivative follows the same branch the
  /// value computation takes (first argument wins ties), so it is a
  /// deterministic subdifferential element.
  double evaluate(const RelaxationParams& p, RelaxationParams* grad = nullptr) const {
    const std::size_t N = net_.depth();
    const std::size_t H = N - 1;

    struct LayerRec {
      Vector ck, gk, slope;      // slope_i multiplies ck_i in gk
      Vector phi_v;              // sdp variants
      std::vector<PhiBranch> branch;
      Vector tau_eff;            // extension, after stable pinning
    };
    std::vector<LayerRec> rec(H);

    Vector g_up = c_;
    double h_total = 0.0;
    for (std::size_t k = H; k >= 1; --k) {
      LayerRec& r = rec[k - 1];
      const auto& layer = net_.layers()[k];
      r.ck = layer.weight.transpose() * g_up;
      if (layer.bias) h_total += g_up.dot(*layer.bias);
      const auto& rel = base_relax_[k - 1];
      const Index w = r.ck.size();
      r.gk.resize(w);
      r.slope.resize(w);
      for (Index i = 0; i < w; ++i) {
        const auto& nr = rel[static_cast<std::size_t>(i)];
        const double a = nr.status == NeuronStatus::unstable ? p.alpha[k - 1][i] : nr.alpha;
        r.slope[i] = r.ck[i] >= 0 ? a : nr.beta;
        r.gk[i] = r.ck[i] * r.slope[i];
      }
      const double lam = p.lambda[static_cast<Index>(k) - 1];
      switch (method_) {
        case Method::lirpa_box: {
          for (Index i = 0; i < w; ++i)
            if (r.ck[i] < 0) h_total += r.ck[i] * rel[static_cast<std::size_t>(i)].gamma;
          break;
        }
        case Method::sdp_crown: {
          const Vector& zc = balls_.center[k - 1];
          const double rho = balls_.radius[k - 1];
          r.phi_v = phi(r.ck, r.gk, zc, lam, &r.branch);
          h_total += -0.5 * (lam * (rho * rho - zc.squaredNorm()) + r.phi_v.squaredNorm() / lam);
          break;
        }
        case Method::sdp_crown_ext: {
          r.tau_eff = p.tau[k - 1];
          for (Index i = 0; i < w; ++i)
            if (rel[static_cast<std::size_t>(i)].status != NeuronStatus::unstable)
              r.tau_eff[i] = 0.0;
          Ellipsoid ell{ells_.center[k - 1], ells_.axes[k - 1]};
          Box bx{boxes_.center[k - 1], boxes_.radius[k - 1]};
          r.phi_v = phi_extension(r.ck, r.gk, ell, bx, lam, r.tau_eff, &r.branch);
          const Vector sc = ell.center.cwiseQuotient(ell.axes);
          const double box_term = 2.0 * r.tau_eff.dot(bx.radius.cwiseProduct(bx.radius) -
                                                      bx.center.cwiseProduct(bx.center));
          h_total +=
              -0.5 * (lam * (1.0 - sc.squaredNorm()) + box_term + r.phi_v.squaredNorm() / lam);
          break;
        }
      }
      g_up = r.gk;
    }

    const Vector g_in = net_.layers()[0].weight.transpose() * g_up;
    if (net_.layers()[0].bias) h_total += g_up.dot(*net_.layers()[0].bias);

    double closure = 0.0;
    Vector dclosure_dg = Vector::Zero(g_in.size());
    if (const auto* ball = std::get_if<Ball>(&input_)) {
      const double ng = g_in.norm();
      closure = g_in.dot(ball->center) - ball->radius * ng;
      dclosure_dg = ball->center;
      if (ng > 0) dclosure_dg -= (ball->radius / ng) * g_in;
    } else if (const auto* box = std::get_if<Box>(&input_)) {
      closure = g_in.dot(box->center) - g_in.cwiseAbs().dot(box->radius);
      dclosure_dg = box->center;
      for (Index i = 0; i < g_in.size(); ++i)
        dclosure_dg[i] -= (g_in[i] > 0 ? 1.0 : (g_in[i] < 0 ? -1.0 : 0.0)) * box->radius[i];
    } else {
      const auto& ell = std::get<Ellipsoid>(input_);
      const Vector scaled = g_in.cwiseProduct(ell.axes);
      const double ns = scaled.norm();
      closure = g_in.dot(ell.center) - ns;
      dclosure_dg = ell.center;
      if (ns > 0) dclosure_dg -= scaled.cwiseProduct(ell.axes) / ns;
    }
    const double objective = closure + h_total;
    if (!grad) return objective;

    // Reverse pass: adjoint of every h^(k) is 1; chain adjoints of g^(k)
    // upward from the input closure.
    grad->alpha.assign(H, Vector());
    grad->tau.assign(H, Vector());
    grad->lambda = Vector::Zero(static_cast<Index>(H));
    Vector g_bar = net_.layers()[0].weight * dclosure_dg;
    if (net_.layers()[0].bias) g_bar += *net_.layers()[0].bias;

    for (std::size_t k = 1; k <= H; ++k) {
      const LayerRec& r = rec[k - 1];
      const auto& rel = base_relax_[k - 1];
      const Index w = r.ck.size();
      const double lam = p.lambda[static_cast<Index>(k) - 1];
      Vector dh_dg = Vector::Zero(w), dh_dc = Vector::Zero(w);
      Vector& ga = grad->alpha[k - 1];
      Vector& gt = grad->tau[k - 1];
      ga = Vector::Zero(w);
      gt = Vector::Zero(w);
      double dh_dlam = 0.0;

      if (method_ == Method::sdp_crown) {
        const Vector& zc = balls_.center[k - 1];
        const double rho = balls_.radius[k - 1];
        dh_dlam = -0.5 * (rho * rho - zc.squaredNorm()) +
                  r.phi_v.squaredNorm() / (2.0 * lam * lam);
        for (Index i = 0; i < w; ++i) {
          const double dphi = -r.phi_v[i] / lam;
          switch (r.branch[static_cast<std::size_t>(i)]) {
            case PhiBranch::first:
              dh_dc[i] = dphi;
              dh_dg[i] = -dphi;
              dh_dlam += dphi * (-zc[i]);
              break;
            case PhiBranch::second:
              dh_dg[i] = dphi;
              dh_dlam += dphi * zc[i];
              break;
            case PhiBranch::zero:
              break;
          }
        }
      } else if (method_ == Method::sdp_crown_ext) {
        const Vector& zc = ells_.center[k - 1];
        const Vector& axes = ells_.axes[k - 1];
        const Vector& bc = boxes_.center[k - 1];
        const Vector& br = boxes_.radius[k - 1];
        const Vector sc = zc.cwiseQuotient(axes);
        dh_dlam = -0.5 * (1.0 - sc.squaredNorm()) + r.phi_v.squaredNorm() / (2.0 * lam * lam);
        for (Index i = 0; i < w; ++i) {
          const bool unstable = rel[static_cast<std::size_t>(i)].status == NeuronStatus::unstable;
          if (unstable) gt[i] = -(br[i] * br[i] - bc[i] * bc[i]);
          const double dphi = -r.phi_v[i] / lam;
          switch (r.branch[static_cast<std::size_t>(i)]) {
            case PhiBranch::first:
              dh_dc[i] = dphi * axes[i];
              dh_dg[i] = -dphi * axes[i];
              if (unstable) gt[i] += dphi * axes[i] * (br[i] - bc[i]);
              dh_dlam += dphi * (-zc[i] / axes[i]);
              break;
            case PhiBranch::second:
              dh_dg[i] = dphi * axes[i];
              if (unstable) gt[i] += dphi * axes[i] * (br[i] + bc[i]);
              dh_dlam += dphi * (zc[i] / axes[i]);
              break;
            case PhiBranch::zero:
              break;
          }
          if (!unstable) gt[i] = 0.0;
        }
      } else {
        for (Index i = 0; i < w; ++i)
          if (r.ck[i] < 0) dh_dc[i] = rel[static_cast<std::size_t>(i)].gamma;
      }
      grad->lambda[static_cast<Index>(k) - 1] = dh_dlam;

      Vector c_bar(w);
      for (Index i = 0; i < w; ++i) {
        const double gk_bar = g_bar[i] + dh_dg[i];
        if (rel[static_cast<std::size_t>(i)].status == NeuronStatus::unstable)
          ga[i] = gk_bar * std::max(r.ck[i], 0.0);
        c_bar[i] = gk_bar * r.slope[i] + dh_dc[i];
      }
      if (k < H) {
        g_bar = net_.layers()[k].weight * c_bar;
        if (net_.layers()[k].bias) g_bar += *net_.layers()[k].bias;
      }
    }
    return objective;
  }

  /// Smallest margin to any branch switch of the objective at p; gradient
  /// checks against finite differences are only meaningful well above zero.
  double kink_margin(const RelaxationParams& p) const {
    double margin = std::numeric_limits<double>::infinity();
    const std::size_t N = net_.depth();
    const std::size_t H = N - 1;
    Vector g_up = c_;
    for (std::size_t k = H; k >= 1; --k) {
      const auto& layer = net_.layers()[k];
      const Vector ck = layer.weight.transpose() * g_up;
      const auto& rel = base_relax_[k - 1];
      Vector gk(ck.size());
      const double lam = p.lambda[static_cast<Index>(k) - 1];
      for (Index i = 0; i < ck.size(); ++i) {
        const auto& nr = rel[static_cast<std::size_t>(i)];
        const double a = nr.status == NeuronStatus::unstable ? p.alpha[k - 1][i] : nr.alpha;
        gk[i] = ck[i] >= 0 ? ck[i] * a : ck[i] * nr.beta;
        if (nr.status == NeuronStatus::unstable) margin = std::min(margin, std::abs(ck[i]));
      }
      if (method_ != Method::lirpa_box) {
        for (Index i = 0; i < ck.size(); ++i) {
          double a, b;
          if (method_ == Method::sdp_crown) {
            const double zc = balls_.center[k - 1][i];
            a = ck[i] - gk[i] - lam * zc;
            b = gk[i] + lam * zc;
          } else {
            const double ax = ells_.axes[k - 1][i];
            const double wz = lam * ells_.center[k - 1][i] / (ax * ax);
            const double tau = rel[static_cast<std::size_t>(i)].status == NeuronStatus::unstable
                                   ? p.tau[k - 1][i]
                                   : 0.0;
            a = ck[i] - gk[i] + tau * (boxes_.radius[k - 1][i] - boxes_.center[k - 1][i]) - wz;
            b = gk[i] + tau * (boxes_.radius[k - 1][i] + boxes_.center[k - 1][i]) + wz;
          }
          // distance between the two smallest of {a, b, 0}
          double v[3] = {a, b, 0.0};
          std::sort(v, v + 3);
          margin = std::min(margin, v[1] - v[0]);
        }
      }
      g_up = gk;
    }
    const Vector g_in = net_.layers()[0].weight.transpose() * g_up;
    if (std::holds_alternative<Box>(input_)) {
      for (Index i = 0; i < g_in.size(); ++i) margin = std::min(margin, std::abs(g_in[i]));
    } else {
      margin = std::min(margin, g_in.norm());
    }
    return margin;
  }

  void project(RelaxationParams& p) const {
    for (auto& a : p.alpha) a = a.cwiseMax(0.0).cwiseMin(1.0);
    p.lambda = p.lambda.cwiseMax(kLambdaMin);
    for (auto& t : p.tau) t = t.cwiseMax(0.0);
  }

 private:
  void warm_start_lambda(RelaxationParams& p) const {
    // Zero-centered layers admit the closed-form maximizer ||phi|| / radius;
    // elsewhere the default 1e-2 stands.
    const std::size_t H = hidden_layers();
    // One valuation pass to get c^(k), g^(k) at the initial alpha.
    Vector g_up = c_;
    std::vector<Vector> cks(H), gks(H);
    for (std::size_t k = H; k >= 1; --k) {
      const auto& layer = net_.layers()[k];
      Vector ck = layer.weight.transpose() * g_up;
      const auto& rel = base_relax_[k - 1];
      Vector gk(ck.size());
      for (Index i = 0; i < ck.size(); ++i) {
        const auto& nr = rel[static_cast<std::size_t>(i)];
        const double a = nr.status == NeuronStatus::unstable ? p.alpha[k - 1][i] : nr.alpha;
        gk[i] = ck[i] >= 0 ? ck[i] * a : ck[i] * nr.beta;
      }
      cks[k - 1] = ck;
      gks[k - 1] = gk;
      g_up = gk;
    }
    for (std::size_t k = 1; k <= H; ++k) {
      const Vector& zc = method_ == Method::sdp_crown ? balls_.center[k - 1] : ells_.center[k - 1];
      if (zc.norm() > 1e-12) continue;
      double lam;
      if (method_ == Method::sdp_crown) {
        lam = optimal_lambda_zero_center(cks[k - 1], gks[k - 1], balls_.radius[k - 1]);
      } else {
        Ellipsoid ell{ells_.center[k - 1], ells_.axes[k - 1]};
        Box bx{boxes_.center[k - 1], boxes_.radius[k - 1]};
        lam = phi_extension(cks[k - 1], gks[k - 1], ell, bx, kLambdaMin,
                            Vector::Zero(cks[k - 1].size()))
                  .norm();
      }
      p.lambda[static_cast<Index>(k) - 1] = std::max(lam, kLambdaMin);
    }
  }

  Network net_;
  Vector c_;
  PerturbationSet input_;
  Method method_;
  BoxBounds boxes_;
  std::vector<LayerRelaxation> base_relax_;
  BallBounds balls_;
  EllipsoidBounds ells_;
};

/// Projected Adam ascent of the bound over alpha in [0,1], lambda >= eps,
/// tau >= 0. Reports the best value seen, which is sound at every iterate.
inline VerificationResult optimize_lower_bound(const Network& net, const Vector& c,
                                               const PerturbationSet& input_set, Method method,
                                               const OptimizerConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  BoundProblem problem(net, c, input_set, method);
  RelaxationParams p = problem.initial_params();

  // Degenerate set: the bound is the exact forward value at the center.
  if (enclosing_box(input_set).radius.maxCoeff() <= 0.0) {
    VerificationResult exact;
    exact.lower_bound = c.dot(forward(net, set_center(input_set)));
    exact.best_params = p;
    exact.status = exact.lower_bound >= 0 ? VerifyStatus::verified : VerifyStatus::unknown;
    exact.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return exact;
  }
  problem.project(p);

  RelaxationParams m = p, v = p;  // Adam moments, same shapes
  for (auto& a : m.alpha) a.setZero();
  m.lambda.setZero();
  for (auto& t : m.tau) t.setZero();
  v = m;

  VerificationResult result;
  result.lower_bound = -std::numeric_limits<double>::infinity();

  double lr_scale = 1.0;
  const bool use_tau = method == Method::sdp_crown_ext;
  const int iterations = std::max(1, cfg.iterations);
  for (int it = 0; it < iterations; ++it) {
    RelaxationParams grad;
    const double value = problem.evaluate(p, &grad);
    if (value > result.lower_bound) {
      result.lower_bound = value;
      result.best_params = p;
    }
    if (it + 1 == iterations) break;

    const double t = it + 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
    auto adam_step = [&](Vector& x, Vector& mm, Vector& vv, const Vector& g, double lr) {
      mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
      vv = cfg.adam_beta2 * vv + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
      for (Index i = 0; i < x.size(); ++i) {
        const double mhat = mm[i] / bc1;
        const double vhat = vv[i] / bc2;
        x[i] += lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);  // ascent
      }
    };
    for (std::size_t k = 0; k < p.alpha.size(); ++k)
      adam_step(p.alpha[k], m.alpha[k], v.alpha[k], grad.alpha[k], cfg.lr_alpha * lr_scale);
    if (method != Method::lirpa_box) {
      adam_step(p.lambda, m.lambda, v.lambda, grad.lambda, cfg.lr_lambda * lr_scale);
      if (use_tau)
        for (std::size_t k = 0; k < p.tau.size(); ++k)
          adam_step(p.tau[k], m.tau[k], v.tau[k], grad.tau[k], cfg.lr_lambda * lr_scale);
    }
    problem.project(p);
    lr_scale *= cfg.decay;
  }

  result.status = result.lower_bound >= 0 ? VerifyStatus::verified : VerifyStatus::unknown;
  result.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Robustness margins d_j = min over the input set of (e_label - e_j).f(x),
/// one per incorrect class, in class order.
inline std::vector<VerificationResult> margin(const Network& net, int label,
                                              const PerturbationSet& input_set, Method method,
                                              const OptimizerConfig& cfg = {}) {
  const Index q = net.output_dim();
  if (label < 0 || label >= q) throw std::invalid_argument("margin: label out of range");
  std::vector<VerificationResult> out;
  for (Index j = 0; j < q; ++j) {
    if (j == label) continue;
    Vector c = Vector::Zero(q);
    c[label] = 1.0;
    c[j] = -1.0;
    out.push_back(optimize_lower_bound(net, c, input_set, method, cfg));
  }
  return out;
}

}  // namespace sdpcrown
