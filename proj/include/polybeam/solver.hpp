#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polybeam/common.hpp"

namespace polybeam {

// Real-lifted convex program:
//   minimize    ||A x - b||^2
//   subject to  C x = d                   (E equality rows)
//               ||F_k x|| <= rho_k        (K norm balls)
struct ConicProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  std::vector<Eigen::MatrixXd> F;
  std::vector<double> rho;

  int num_vars() const { return static_cast<int>(A.cols() > 0 ? A.cols() : C.cols()); }

  void validate() const {
    const int n = num_vars();
    if (n <= 0) throw InvalidArgument("ConicProblem: no variables");
    if (A.rows() > 0 && A.rows() != b.size())
      throw InvalidArgument("ConicProblem: A/b row mismatch");
    if (C.rows() != d.size()) throw InvalidArgument("ConicProblem: C/d row mismatch");
    if (C.rows() > 0 && C.cols() != n)
      throw InvalidArgument("ConicProblem: C column mismatch");
    if (F.size() != rho.size())
      throw InvalidArgument("ConicProblem: F/rho count mismatch");
    for (std::size_t k = 0; k < F.size(); ++k) {
      if (F[k].cols() != n) throw InvalidArgument("ConicProblem: F column mismatch");
      if (!(rho[k] > 0.0))
        throw InvalidArgument("ConicProblem: rho[" + std::to_string(k) +
                              "] must be positive");
    }
    if (!A.allFinite() || !b.allFinite() || !C.allFinite() || !d.allFinite())
      throw InvalidArgument("ConicProblem: non-finite data");
    for (const auto& f : F)
      if (!f.allFinite()) throw InvalidArgument("ConicProblem: non-finite data");
  }
};

// Same program with complex data; equality rows use the unconjugated
// transpose: (C w)_j = sum_i C_ji w_i = d_j.
struct ComplexConicProblem {
  Eigen::MatrixXcd A;
  Eigen::VectorXcd b;
  Eigen::MatrixXcd C;
  Eigen::VectorXcd d;
  std::vector<Eigen::MatrixXcd> F;
  std::vector<double> rho;
};

// Standard C -> R^2 embedding, x = [Re w; Im w]. Norms are preserved and each
// complex equality becomes two real rows.
inline ConicProblem lift_complex(const ComplexConicProblem& cp) {
  const auto lift_mat = [](const Eigen::MatrixXcd& M) {
    Eigen::MatrixXd out(2 * M.rows(), 2 * M.cols());
    out << M.real(), -M.imag(), M.imag(), M.real();
    return out;
  };
  ConicProblem rp;
  rp.A = lift_mat(cp.A);
  rp.b.resize(2 * cp.b.size());
  rp.b << cp.b.real(), cp.b.imag();
  rp.C.resize(2 * cp.C.rows(), 2 * cp.C.cols());
  rp.C << cp.C.real(), -cp.C.imag(), cp.C.imag(), cp.C.real();
  rp.d.resize(2 * cp.d.size());
  rp.d << cp.d.real(), cp.d.imag();
  for (const auto& f : cp.F) rp.F.push_back(lift_mat(f));
  rp.rho = cp.rho;
  return rp;
}

inline Eigen::VectorXcd unlift(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size() / 2;
  Eigen::VectorXcd w(n);
  w.real() = x.head(n);
  w.imag() = x.tail(n);
  return w;
}

enum class SolveStatus { optimal, infeasible, max_iter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iter: return "max_iter";
  }
  return "?";
}

struct SolveResult {
  Eigen::VectorXd x;
  double objective = 0.0;  // ||A x - b||^2
  SolveStatus status = SolveStatus::max_iter;
  double eq_residual = 0.0;      // max-abs of C x - d
  double cone_violation = 0.0;   // max_k (||F_k x|| - rho_k)+
  int iterations = 0;
  std::string message;
};

namespace socp {

// One second-order cone Q_m = { u : u[0] >= ||u[1:]|| } inside the stacked
// slack vector, with its current Nesterov-Todd scaling.
struct Cone {
  int offset = 0;
  int dim = 0;
  double beta = 1.0;        // scalar scaling
  Eigen::VectorXd wbar;     // hyperbolic unit vector, wbar0^2 - ||wv||^2 = 1
  Eigen::VectorXd lambda;   // scaled point, lambda = W z = W^{-1} s
};

inline double cone_margin(const Eigen::Ref<const Eigen::VectorXd>& u) {
  return u[0] - u.tail(u.size() - 1).norm();
}

inline Eigen::VectorXd jordan_mul(const Eigen::Ref<const Eigen::VectorXd>& u,
                                  const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::VectorXd r(u.size());
  r[0] = u.dot(v);
  r.tail(r.size() - 1) =
      u[0] * v.tail(v.size() - 1) + v[0] * u.tail(u.size() - 1);
  return r;
}

// Solve lambda o u = r for u.
inline Eigen::VectorXd jordan_div(const Eigen::Ref<const Eigen::VectorXd>& lam,
                                  const Eigen::Ref<const Eigen::VectorXd>& r) {
  const auto lv = lam.tail(lam.size() - 1);
  const auto rv = r.tail(r.size() - 1);
  const double det = lam[0] * lam[0] - lv.squaredNorm();
  Eigen::VectorXd u(lam.size());
  u[0] = (lam[0] * r[0] - lv.dot(rv)) / det;
  u.tail(u.size() - 1) = (rv - u[0] * lv) / lam[0];
  return u;
}

inline void update_scaling(Cone& c, const Eigen::Ref<const Eigen::VectorXd>& s,
                           const Eigen::Ref<const Eigen::VectorXd>& z) {
  const auto sv = s.tail(s.size() - 1);
  const auto zv = z.tail(z.size() - 1);
  const double dets = s[0] * s[0] - sv.squaredNorm();
  const double detz = z[0] * z[0] - zv.squaredNorm();
  const double ds = std::sqrt(std::max(dets, 0.0));
  const double dz = std::sqrt(std::max(detz, 0.0));
  if (!(ds > 0.0) || !(dz > 0.0))
    throw NumericError("socp: iterate left the cone interior");
  const Eigen::VectorXd sbar = s / ds, zbar = z / dz;
  const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
  c.wbar.resize(s.size());
  c.wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
  c.wbar.tail(s.size() - 1) =
      (sbar.tail(s.size() - 1) - zbar.tail(s.size() - 1)) / (2.0 * gamma);
  c.beta = std::sqrt(ds / dz);

  // lambda = W z
  const auto wv = c.wbar.tail(c.wbar.size() - 1);
  c.lambda.resize(s.size());
  const double wz = wv.dot(zv);
  c.lambda[0] = c.beta * (c.wbar[0] * z[0] + wz);
  c.lambda.tail(s.size() - 1) =
      c.beta * (zv + (z[0] + wz / (1.0 + c.wbar[0])) * wv);
}

inline Eigen::VectorXd apply_W(const Cone& c,
                               const Eigen::Ref<const Eigen::VectorXd>& u) {
  const auto wv = c.wbar.tail(c.wbar.size() - 1);
  const auto uv = u.tail(u.size() - 1);
  const double wu = wv.dot(uv);
  Eigen::VectorXd r(u.size());
  r[0] = c.beta * (c.wbar[0] * u[0] + wu);
  r.tail(r.size() - 1) = c.beta * (uv + (u[0] + wu / (1.0 + c.wbar[0])) * wv);
  return r;
}

inline Eigen::VectorXd apply_Winv(const Cone& c,
                                  const Eigen::Ref<const Eigen::VectorXd>& u) {
  const auto wv = c.wbar.tail(c.wbar.size() - 1);
  const auto uv = u.tail(u.size() - 1);
  const double wu = wv.dot(uv);
  Eigen::VectorXd r(u.size());
  r[0] = (c.wbar[0] * u[0] - wu) / c.beta;
  r.tail(r.size() - 1) = (uv + (-u[0] + wu / (1.0 + c.wbar[0])) * wv) / c.beta;
  return r;
}

// W^{-2} u = (1/beta^2) (2 (J wbar)(J wbar)^T u - J u)
inline Eigen::VectorXd apply_Winv2(const Cone& c,
                                   const Eigen::Ref<const Eigen::VectorXd>& u) {
  const auto wv = c.wbar.tail(c.wbar.size() - 1);
  const auto uv = u.tail(u.size() - 1);
  const double t = c.wbar[0] * u[0] - wv.dot(uv);  // (J wbar)^T u
  Eigen::VectorXd r(u.size());
  r[0] = (2.0 * t * c.wbar[0] - u[0]) / (c.beta * c.beta);
  r.tail(r.size() - 1) = (-2.0 * t * wv + uv) / (c.beta * c.beta);
  return r;
}

// Largest step to the cone boundary from interior u along du (capped).
inline double step_to_boundary(const Eigen::Ref<const Eigen::VectorXd>& u,
                               const Eigen::Ref<const Eigen::VectorXd>& du,
                               double cap) {
  const auto uv = u.tail(u.size() - 1);
  const auto dv = du.tail(du.size() - 1);
  const double a = du[0] * du[0] - dv.squaredNorm();
  const double b = 2.0 * (u[0] * du[0] - uv.dot(dv));
  const double c0 = u[0] * u[0] - uv.squaredNorm();
  double best = cap;
  const auto consider = [&](double t) {
    if (t > 0.0 && t < best) best = t;
  };
  if (std::abs(a) < 1e-300) {
    if (b < 0.0) consider(-c0 / b);
  } else {
    const double disc = b * b - 4.0 * a * c0;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
      if (std::abs(a) > 0.0) consider(q / a);
      if (std::abs(q) > 0.0) consider(c0 / q);
    }
  }
  return best;
}

}  // namespace socp

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 200;
};

namespace detail {

// Epigraph SOCP built from a ConicProblem:
//   minimize t  s.t.  C x = d,  (t, b - A x) in Q,  (rho_k, F_k x) in Q.
// Variables z = (x, t); cones stacked as slack s = h - G z.
class SocpSolver {
 public:
  explicit SocpSolver(const ConicProblem& p, const SolverOptions& opt)
      : p_(p), opt_(opt) {
    n_ = p.num_vars();
    nz_ = n_ + 1;
    la_ = static_cast<int>(p.A.rows());
    E_ = static_cast<int>(p.C.rows());

    int m = 1 + la_;
    cones_.push_back({0, 1 + la_});
    for (std::size_t k = 0; k < p.F.size(); ++k) {
      cones_.push_back({m, 1 + static_cast<int>(p.F[k].rows())});
      m += cones_.back().dim;
    }
    m_ = m;

    G_.setZero(m_, nz_);
    h_.setZero(m_);
    G_(0, n_) = -1.0;
    if (la_ > 0) {
      G_.block(1, 0, la_, n_) = p.A;
      h_.segment(1, la_) = p.b;
    }
    for (std::size_t k = 0; k < p.F.size(); ++k) {
      const auto& c = cones_[k + 1];
      h_[c.offset] = p.rho[k];
      G_.block(c.offset + 1, 0, c.dim - 1, n_) = -p.F[k];
    }

    Aeq_.setZero(E_, nz_);
    if (E_ > 0) Aeq_.leftCols(n_) = p.C;
    beq_ = p.d;

    cvec_.setZero(nz_);
    cvec_[n_] = 1.0;

    // Per-cone G^T J G, reused in every H assembly.
    for (const auto& c : cones_) {
      Eigen::MatrixXd GJG =
          G_.row(c.offset).transpose() * G_.row(c.offset) -
          G_.block(c.offset + 1, 0, c.dim - 1, nz_).transpose() *
              G_.block(c.offset + 1, 0, c.dim - 1, nz_);
      GJG_.push_back(std::move(GJG));
    }
  }

  SolveResult run() {
    SolveResult res;
    init_point();

    const double nb = beq_.size() > 0 ? beq_.lpNorm<Eigen::Infinity>() : 0.0;
    const double nh = h_.lpNorm<Eigen::Infinity>();
    const int ncones = static_cast<int>(cones_.size());

    int iter = 0;
    for (;; ++iter) {
      const Eigen::VectorXd rd = Aeq_.transpose() * y_ + G_.transpose() * z_ + cvec_;
      const Eigen::VectorXd rp = Aeq_ * x_ - beq_;
      const Eigen::VectorXd rc = G_ * x_ + s_ - h_;
      const double gap = s_.dot(z_);
      const double mu = gap / ncones;

      const double relp =
          std::max(rp.size() > 0 ? rp.lpNorm<Eigen::Infinity>() / (1.0 + nb) : 0.0,
                   rc.lpNorm<Eigen::Infinity>() / (1.0 + nh));
      const double reld = rd.lpNorm<Eigen::Infinity>() / (1.0 + 1.0);
      const double pobj = x_[n_];
      const double dobj = -(beq_.size() > 0 ? beq_.dot(y_) : 0.0) - h_.dot(z_);
      const double relgap = std::abs(pobj - dobj) / std::max(1.0, std::abs(pobj));

      // Also require the original-problem feasibility margins so that
      // SolveResult invariants hold with slack to spare.
      const auto orig = original_residuals();
      const bool orig_ok =
          orig.first <= 0.5e-8 * (1.0 + (beq_.size() ? beq_.lpNorm<Eigen::Infinity>() : 0.0)) &&
          orig.second <= 0.5e-8 * min_rho();

      if (relp <= opt_.tol && reld <= opt_.tol &&
          (relgap <= opt_.tol || gap <= opt_.tol) && orig_ok) {
        res.status = SolveStatus::optimal;
        break;
      }
      if (iter >= opt_.max_iter) {
        res.status = SolveStatus::max_iter;
        res.message = "iteration cap reached (relp=" + std::to_string(relp) +
                      ", reld=" + std::to_string(reld) +
                      ", gap=" + std::to_string(gap) + ")";
        break;
      }

      try {
        for (auto& c : cones_)
          socp::update_scaling(c, s_.segment(c.offset, c.dim),
                               z_.segment(c.offset, c.dim));
        factorize();

        // Affine (predictor) direction.
        Eigen::VectorXd bs(m_);
        for (const auto& c : cones_)
          bs.segment(c.offset, c.dim) = -socp::jordan_mul(c.lambda, c.lambda);
        Eigen::VectorXd dx_a, dy_a, dz_a, ds_a;
        newton_step(-rd, -rp, -rc, bs, dx_a, dy_a, dz_a, ds_a);

        double alpha_aff = 1.0;
        for (const auto& c : cones_) {
          alpha_aff = std::min(
              alpha_aff, socp::step_to_boundary(s_.segment(c.offset, c.dim),
                                                ds_a.segment(c.offset, c.dim), 1.0));
          alpha_aff = std::min(
              alpha_aff, socp::step_to_boundary(z_.segment(c.offset, c.dim),
                                                dz_a.segment(c.offset, c.dim), 1.0));
        }
        const double mu_aff =
            (s_ + alpha_aff * ds_a).dot(z_ + alpha_aff * dz_a) / ncones;
        double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
        sigma = std::clamp(sigma, 1e-6, 1.0 - 1e-6);

        // Combined direction: residuals scaled by (1 - sigma), Mehrotra
        // second-order complementarity correction.
        for (const auto& c : cones_) {
          const Eigen::VectorXd wds =
              socp::apply_Winv(c, ds_a.segment(c.offset, c.dim));
          const Eigen::VectorXd wdz = socp::apply_W(c, dz_a.segment(c.offset, c.dim));
          Eigen::VectorXd rhs = -socp::jordan_mul(c.lambda, c.lambda) -
                                socp::jordan_mul(wds, wdz);
          rhs[0] += sigma * mu;
          bs.segment(c.offset, c.dim) = rhs;
        }
        const double oms = 1.0 - sigma;
        Eigen::VectorXd dx, dy, dz, ds;
        newton_step(-oms * rd, -oms * rp, -oms * rc, bs, dx, dy, dz, ds);

        double alpha = 1.0 / 0.99;
        for (const auto& c : cones_) {
          alpha = std::min(alpha,
                           socp::step_to_boundary(s_.segment(c.offset, c.dim),
                                                  ds.segment(c.offset, c.dim), alpha));
          alpha = std::min(alpha,
                           socp::step_to_boundary(z_.segment(c.offset, c.dim),
                                                  dz.segment(c.offset, c.dim), alpha));
        }
        alpha = std::min(1.0, 0.99 * alpha);

        x_ += alpha * dx;
        y_ += alpha * dy;
        z_ += alpha * dz;
        s_ += alpha * ds;
      } catch (const NumericError&) {
        // Iterate reached the cone boundary at machine precision; accept if
        // the looser residual bar is already met, otherwise report.
        if (relp <= 100.0 * opt_.tol && reld <= 100.0 * opt_.tol && orig_ok) {
          res.status = SolveStatus::optimal;
        } else {
          res.status = SolveStatus::max_iter;
          res.message = "numerical stall at iteration " + std::to_string(iter);
        }
        break;
      }
    }

    res.x = x_.head(n_);
    res.iterations = iter;
    if (la_ > 0)
      res.objective = (p_.A * res.x - p_.b).squaredNorm();
    const auto orig = original_residuals();
    res.eq_residual = orig.first;
    res.cone_violation = orig.second;
    return res;
  }

 private:
  double min_rho() const {
    double r = 1.0;
    for (double rk : p_.rho) r = std::min(r, rk);
    return r;
  }

  // (max-abs equality residual, max cone violation) of the original problem.
  std::pair<double, double> original_residuals() const {
    const Eigen::VectorXd x = x_.head(n_);
    double eq = 0.0;
    if (E_ > 0) eq = (p_.C * x - p_.d).lpNorm<Eigen::Infinity>();
    double cv = 0.0;
    for (std::size_t k = 0; k < p_.F.size(); ++k)
      cv = std::max(cv, (p_.F[k] * x).norm() - p_.rho[k]);
    return {eq, std::max(cv, 0.0)};
  }

  void init_point() {
    x_.setZero(nz_);
    y_.setZero(E_);
    s_.setZero(m_);
    z_.setZero(m_);

    // Identity scaling: wbar = e, beta = 1.
    for (auto& c : cones_) {
      c.beta = 1.0;
      c.wbar.setZero(c.dim);
      c.wbar[0] = 1.0;
    }
    factorize();

    // Primal: minimize ||h - G z|| s.t. Aeq z = beq.
    {
      Eigen::VectorXd rhs1 = G_.transpose() * h_;
      Eigen::VectorXd dx, dy;
      solve_kkt(rhs1, beq_, dx, dy);
      x_ = dx;
      s_ = h_ - G_ * x_;
    }
    // Dual: z from the least-squares multiplier of the linear objective.
    {
      Eigen::VectorXd dx, dy;
      solve_kkt(-cvec_, Eigen::VectorXd::Zero(E_), dx, dy);
      y_ = dy;
      z_ = G_ * dx;
    }
    for (const auto& c : cones_) {
      const auto shift = [&](Eigen::VectorXd& v) {
        const double margin = socp::cone_margin(v.segment(c.offset, c.dim));
        if (margin <= 0.1) v[c.offset] += 1.0 - margin;
      };
      shift(s_);
      shift(z_);
    }
  }

  void factorize() {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nz_, nz_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const auto& c = cones_[k];
      Eigen::VectorXd jw(c.dim);
      jw[0] = c.wbar[0];
      jw.tail(c.dim - 1) = -c.wbar.tail(c.dim - 1);
      const Eigen::VectorXd v = G_.middleRows(c.offset, c.dim).transpose() * jw;
      const double ib2 = 1.0 / (c.beta * c.beta);
      H.noalias() += ib2 * (2.0 * v * v.transpose() - GJG_[k]);
    }
    H_ = H;

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nz_ + E_, nz_ + E_);
    K.topLeftCorner(nz_, nz_) = H;
    K.topLeftCorner(nz_, nz_).diagonal().array() += kStaticReg;
    if (E_ > 0) {
      K.topRightCorner(nz_, E_) = Aeq_.transpose();
      K.bottomLeftCorner(E_, nz_) = Aeq_;
      K.bottomRightCorner(E_, E_).diagonal().array() -= kStaticReg;
    }
    lu_.compute(K);
  }

  // Solve [H Aeq^T; Aeq 0] [dx; dy] = [r1; r2] with iterative refinement
  // against the unregularized system.
  void solve_kkt(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                 Eigen::VectorXd& dx, Eigen::VectorXd& dy) const {
    Eigen::VectorXd rhs(nz_ + E_);
    rhs.head(nz_) = r1;
    rhs.tail(E_) = r2;
    Eigen::VectorXd sol = lu_.solve(rhs);
    for (int round = 0; round < 2; ++round) {
      Eigen::VectorXd resid(nz_ + E_);
      resid.head(nz_) = r1 - H_ * sol.head(nz_);
      if (E_ > 0) {
        resid.head(nz_) -= Aeq_.transpose() * sol.tail(E_);
        resid.tail(E_) = r2 - Aeq_ * sol.head(nz_);
      }
      sol += lu_.solve(resid);
    }
    dx = sol.head(nz_);
    dy = sol.tail(E_);
  }

  // One Newton direction for rhs (bx, by, bz, bs); bs is the Jordan-domain
  // complementarity target.
  void newton_step(const Eigen::VectorXd& bx, const Eigen::VectorXd& by,
                   const Eigen::VectorXd& bz, const Eigen::VectorXd& bs,
                   Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                   Eigen::VectorXd& ds) const {
    Eigen::VectorXd bz_t = bz;
    for (const auto& c : cones_) {
      const Eigen::VectorXd u =
          socp::jordan_div(c.lambda, bs.segment(c.offset, c.dim));
      bz_t.segment(c.offset, c.dim) -= socp::apply_W(c, u);
    }
    Eigen::VectorXd wz(m_);
    for (const auto& c : cones_)
      wz.segment(c.offset, c.dim) =
          socp::apply_Winv2(c, bz_t.segment(c.offset, c.dim));
    const Eigen::VectorXd r1 = bx + G_.transpose() * wz;

    solve_kkt(r1, by, dx, dy);

    const Eigen::VectorXd gx = G_ * dx;
    dz.resize(m_);
    for (const auto& c : cones_)
      dz.segment(c.offset, c.dim) = socp::apply_Winv2(
          c, (gx - bz_t).segment(c.offset, c.dim));
    ds = bz - gx;
  }

  static constexpr double kStaticReg = 1e-11;

  const ConicProblem& p_;
  SolverOptions opt_;
  int n_ = 0, nz_ = 0, la_ = 0, E_ = 0, m_ = 0;
  Eigen::MatrixXd G_, Aeq_, H_;
  Eigen::VectorXd h_, beq_, cvec_;
  std::vector<socp::Cone> cones_;
  std::vector<Eigen::MatrixXd> GJG_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd x_, y_, s_, z_;
};

}  // namespace detail

// Equality-rank and per-cone feasibility preprocessing. Returns an
// infeasibility certificate if some ball cannot be met by any point of the
// equality-feasible affine set; rank-deficient equalities are rejected
// outright (they signal duplicated constraints, a caller error).
inline bool preprocess_certificates(const ConicProblem& p, SolveResult& res) {
  const int n = p.num_vars();
  const int E = static_cast<int>(p.C.rows());

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n);
  if (E > 0) {
    const double cnorm = p.C.norm();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p.C.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() < E)
      throw InvalidArgument(
          "solve: equality rows are linearly dependent (rank " +
          std::to_string(qr.rank()) + " of " + std::to_string(E) +
          ", tolerance 1e-10*" + std::to_string(cnorm) + ")");
    // Least-norm particular solution and nullspace basis from the full QR.
    const Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd Q1 = Q.leftCols(E);
    Eigen::MatrixXd R =
        qr.matrixR().topLeftCorner(E, E).template triangularView<Eigen::Upper>();
    const Eigen::VectorXd dperm = qr.colsPermutation().transpose() * p.d;
    x0 = Q1 * R.transpose().triangularView<Eigen::Lower>().solve(dperm);
    Z = Q.rightCols(n - E);
  }

  for (std::size_t k = 0; k < p.F.size(); ++k) {
    const Eigen::VectorXd f0 = p.F[k] * x0;
    double best;
    if (Z.cols() > 0) {
      const Eigen::MatrixXd FZ = p.F[k] * Z;
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(FZ);
      const Eigen::VectorXd v = cod.solve(-f0);
      best = (f0 + FZ * v).norm();
    } else {
      best = f0.norm();
    }
    if (best > p.rho[k] * (1.0 + 1e-9) + 1e-12) {
      res.status = SolveStatus::infeasible;
      res.x = x0;
      res.message = "infeasible: ball constraint " + std::to_string(k) +
                    " requires norm >= " + std::to_string(best) +
                    " on the equality-feasible set, but rho = " +
                    std::to_string(p.rho[k]);
      res.eq_residual = E > 0 ? (p.C * x0 - p.d).lpNorm<Eigen::Infinity>() : 0.0;
      res.cone_violation = best - p.rho[k];
      return false;
    }
  }
  return true;
}

// Deterministic primal-dual interior-point solve. KKT-certified on success;
// per-cone infeasibility is detected exactly by preprocessing.
inline SolveResult solve(const ConicProblem& p, const SolverOptions& opt = {}) {
  p.validate();
  SolveResult res;
  if (!preprocess_certificates(p, res)) return res;
  detail::SocpSolver solver(p, opt);
  return solver.run();
}

// Text dump for cross-checking against external solvers. Format: one
// `name rows cols` header per matrix followed by rows of numbers; vectors are
// single-column matrices.
inline void dump_problem(const ConicProblem& p, std::ostream& os) {
  const auto mat = [&os](const char* name, const Eigen::MatrixXd& M) {
    os << name << " " << M.rows() << " " << M.cols() << "\n";
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        os << (j ? " " : "") << M(i, j);
      os << "\n";
    }
  };
  os.precision(17);
  mat("A", p.A);
  mat("b", p.b);
  mat("C", p.C);
  mat("d", p.d);
  os << "balls " << p.F.size() << "\n";
  for (std::size_t k = 0; k < p.F.size(); ++k) {
    os << "rho " << p.rho[k] << "\n";
    mat("F", p.F[k]);
  }
}

}  // namespace polybeam
