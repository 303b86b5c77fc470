#include "flexmap/conic.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <ostream>

#include "flexmap/errors.hpp"

namespace flexmap::conic {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

constexpr double kFixedTol = 1e-14;

bool is_fixed(double lo, double up) {
    return std::isfinite(lo) && std::isfinite(up) &&
           up - lo <= kFixedTol * std::max({1.0, std::abs(lo), std::abs(up)});
}

/// Standard-form problem  min c'x  s.t.  A x = b,  G x + s = h,  s in K,
/// where K = R+^l x SOC(q_1) x ... x SOC(q_N). Rotated cones are mapped to
/// plain second-order cones through the orthogonal transform
///   T (u, v, w) = ((u+v)/sqrt(2), (u-v)/sqrt(2), w).
struct Standard {
    int n = 0, p = 0, m = 0, l = 0;
    SpMat A, G;
    Vec b, h, c;
    std::vector<int> soc_dims;

    // Back-mapping bookkeeping.
    int num_original_eq = 0;
    std::vector<int> fixed_eq_row;           // var -> A row or -1
    std::vector<double> fixed_value;         // var -> value (when fixed)
    std::vector<int> lower_row, upper_row;   // var -> G row or -1
    std::vector<int> cone_row;               // cone -> first G row or -1 (presolved)
    std::vector<std::vector<int>> presolved_w_rows;  // cone -> A rows fixing w to 0
    std::vector<char> pin_consumed;          // var pinned by a presolved cone
    bool artificial_bounds = false;
};

Standard convert(const Problem& pr) {
    const int n = pr.num_variables();
    Standard st;
    st.n = n;
    st.c = Eigen::Map<const Vec>(pr.objective().data(), n);
    st.fixed_eq_row.assign(n, -1);
    st.fixed_value.assign(n, 0.0);
    st.lower_row.assign(n, -1);
    st.upper_row.assign(n, -1);

    std::vector<double> lo = pr.lower();
    std::vector<double> up = pr.upper();

    std::vector<char> fixed(n, 0);
    for (int v = 0; v < n; ++v)
        if (is_fixed(lo[v], up[v])) fixed[v] = 1;

    // Degenerate cone presolve: a cone whose u or v slot is pinned at zero
    // forces w = 0; the cone itself reduces to sign constraints on u, v.
    st.cone_row.assign(pr.cones().size(), -1);
    st.presolved_w_rows.resize(pr.cones().size());
    std::vector<char> cone_presolved(pr.cones().size(), 0);
    std::vector<int> presolve_pinned_by_cone(n, -1);  // var -> cone that pinned it
    for (std::size_t k = 0; k < pr.cones().size(); ++k) {
        const RotatedCone& cone = pr.cones()[k];
        const bool u0 = fixed[cone.u] && std::abs((lo[cone.u] + up[cone.u]) / 2) <= kFixedTol;
        const bool v0 = fixed[cone.v] && std::abs((lo[cone.v] + up[cone.v]) / 2) <= kFixedTol;
        for (int slot : {cone.u, cone.v}) {
            if (fixed[slot] && (lo[slot] + up[slot]) / 2 < -kFixedTol)
                throw ModelError("cone slot variable fixed at a negative value");
        }
        if (u0 || v0 || cone.w.empty()) {
            cone_presolved[k] = 1;
            lo[cone.u] = std::max(lo[cone.u], 0.0);
            lo[cone.v] = std::max(lo[cone.v], 0.0);
            if (u0 || v0)
                for (int wv : cone.w)
                    if (!fixed[wv]) {
                        lo[wv] = 0.0;
                        up[wv] = 0.0;
                        fixed[wv] = 1;
                        presolve_pinned_by_cone[wv] = static_cast<int>(k);
                    }
        }
    }

    // Equality rows: the user's rows first, then fixed variables.
    std::vector<Triplet> at;
    std::vector<double> brows;
    for (const auto& row : pr.equalities()) {
        for (const auto& t : row.terms) at.emplace_back(static_cast<int>(brows.size()), t.var, t.coef);
        brows.push_back(row.rhs);
    }
    st.num_original_eq = static_cast<int>(brows.size());
    for (int v = 0; v < n; ++v) {
        if (!fixed[v]) continue;
        st.fixed_eq_row[v] = static_cast<int>(brows.size());
        st.fixed_value[v] = (lo[v] + up[v]) / 2;
        at.emplace_back(static_cast<int>(brows.size()), v, 1.0);
        brows.push_back(st.fixed_value[v]);
    }
    // Record which synthetic rows pin a presolved cone's w slots (only the
    // pins the presolve itself created; user-fixed slots keep their fold).
    st.pin_consumed.assign(n, 0);
    for (std::size_t k = 0; k < pr.cones().size(); ++k) {
        if (!cone_presolved[k]) continue;
        st.presolved_w_rows[k].assign(pr.cones()[k].w.size(), -1);
        for (std::size_t j = 0; j < pr.cones()[k].w.size(); ++j) {
            const int wv = pr.cones()[k].w[j];
            if (presolve_pinned_by_cone[wv] == static_cast<int>(k) && st.fixed_eq_row[wv] >= 0) {
                st.presolved_w_rows[k][j] = st.fixed_eq_row[wv];
                st.pin_consumed[wv] = 1;
            }
        }
    }
    st.p = static_cast<int>(brows.size());
    st.A.resize(st.p, n);
    st.A.setFromTriplets(at.begin(), at.end());
    st.b = Eigen::Map<const Vec>(brows.data(), st.p);

    // Inequality rows: bounds (the LP cone) first, then SOC blocks.
    std::vector<Triplet> gt;
    std::vector<double> hrows;
    for (int v = 0; v < n; ++v) {
        if (fixed[v]) continue;
        if (std::isfinite(lo[v])) {
            st.lower_row[v] = static_cast<int>(hrows.size());
            gt.emplace_back(static_cast<int>(hrows.size()), v, -1.0);
            hrows.push_back(-lo[v]);
        }
        if (std::isfinite(up[v])) {
            st.upper_row[v] = static_cast<int>(hrows.size());
            gt.emplace_back(static_cast<int>(hrows.size()), v, 1.0);
            hrows.push_back(up[v]);
        }
    }

    bool any_cone = false;
    for (std::size_t k = 0; k < pr.cones().size(); ++k)
        if (!cone_presolved[k]) any_cone = true;

    if (hrows.empty() && !any_cone) {
        // Pure-equality program: box it so the cone machinery applies. An
        // optimum pressed against this box means the program is unbounded
        // over its affine set.
        st.artificial_bounds = true;
        const double big = 1e9;
        for (int v = 0; v < n; ++v) {
            if (fixed[v]) continue;
            st.lower_row[v] = static_cast<int>(hrows.size());
            gt.emplace_back(static_cast<int>(hrows.size()), v, -1.0);
            hrows.push_back(big);
            st.upper_row[v] = static_cast<int>(hrows.size());
            gt.emplace_back(static_cast<int>(hrows.size()), v, 1.0);
            hrows.push_back(big);
        }
    }

    st.l = static_cast<int>(hrows.size());
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t k = 0; k < pr.cones().size(); ++k) {
        if (cone_presolved[k]) continue;
        const RotatedCone& cone = pr.cones()[k];
        const int r0 = static_cast<int>(hrows.size());
        st.cone_row[k] = r0;
        // s0 = (u + v)/sqrt2, s1 = (u - v)/sqrt2, s_{1+j} = w_j
        gt.emplace_back(r0, cone.u, -inv_sqrt2);
        gt.emplace_back(r0, cone.v, -inv_sqrt2);
        hrows.push_back(0.0);
        gt.emplace_back(r0 + 1, cone.u, -inv_sqrt2);
        gt.emplace_back(r0 + 1, cone.v, inv_sqrt2);
        hrows.push_back(0.0);
        for (std::size_t j = 0; j < cone.w.size(); ++j) {
            gt.emplace_back(r0 + 2 + static_cast<int>(j), cone.w[j], -1.0);
            hrows.push_back(0.0);
        }
        st.soc_dims.push_back(static_cast<int>(cone.w.size()) + 2);
    }

    st.m = static_cast<int>(hrows.size());
    st.G.resize(st.m, n);
    st.G.setFromTriplets(gt.begin(), gt.end());
    st.h = Eigen::Map<const Vec>(hrows.data(), st.m);
    return st;
}

// ---------------------------------------------------------------------------
// Interior-point method on the homogeneous self-dual embedding, following
// the ECOS algorithm: Nesterov-Todd scaling, Mehrotra predictor-corrector,
// sparse LDL' with static regularization and iterative refinement.
// ---------------------------------------------------------------------------

struct IpmSettings {
    double feastol = 1e-9;
    double abstol = 1e-9;
    double reltol = 1e-9;
    double feastol_inacc = 1e-4;
    double abstol_inacc = 5e-5;
    double reltol_inacc = 5e-5;
    double gamma = 0.99;
    double deltastat = 7e-8;
    double stepmin = 1e-6;
    double stepmax = 0.999;
    double sigmamin = 1e-4;
    double sigmamax = 1.0;
    double safeguard = 500.0;
    double linsysacc = 1e-14;
    int nitref = 9;
    int max_iter = 100;
};

enum class IpmStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIter, Numerics };

struct IpmResult {
    IpmStatus status = IpmStatus::Numerics;
    Vec x, y, z, s;
    double tau = 1.0, kap = 1.0;
    int iterations = 0;
    bool reduced_accuracy = false;
};

class Ipm {
public:
    Ipm(const Standard& st, const IpmSettings& settings)
        : st_(st), set_(settings), n_(st.n), p_(st.p), m_(st.m), l_(st.l) {
        At_ = SpMat(st_.A.transpose());
        Gt_ = SpMat(st_.G.transpose());
        nsoc_ = static_cast<int>(st_.soc_dims.size());
        degree_ = l_ + nsoc_;
        soc_start_.resize(nsoc_);
        int off = l_;
        for (int k = 0; k < nsoc_; ++k) {
            soc_start_[k] = off;
            off += st_.soc_dims[k];
        }
        soc_a_.assign(nsoc_, 1.0);
        soc_eta2_.assign(nsoc_, 1.0);
        soc_q_.resize(nsoc_);
        soc_w2_.resize(nsoc_);
        for (int k = 0; k < nsoc_; ++k) {
            soc_q_[k] = Vec::Zero(st_.soc_dims[k] - 1);
            soc_w2_[k] = Eigen::MatrixXd::Identity(st_.soc_dims[k], st_.soc_dims[k]);
        }
        lp_w2_ = Vec::Ones(l_);
        build_kkt();
    }

    IpmResult run();

private:
    const Standard& st_;
    IpmSettings set_;
    int n_, p_, m_, l_, nsoc_ = 0, degree_ = 0;
    SpMat At_, Gt_;
    std::vector<int> soc_start_;

    // Scaling state
    Vec lp_w2_;                       // W^2 diagonal of the LP block
    std::vector<double> soc_a_, soc_eta2_;
    std::vector<Vec> soc_q_;          // normalized NT point tail, per cone
    std::vector<Eigen::MatrixXd> soc_w2_;

    // KKT
    SpMat K_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt_;
    std::vector<double*> lp_ptr_;                  // diag entries of LP block
    std::vector<std::vector<double*>> soc_ptr_;    // upper-tri entries per cone
    double delta_ = 7e-8;

    // Iterate
    Vec x_, y_, z_, s_, lambda_;
    double tau_ = 1.0, kap_ = 1.0;

    // Residual scratch
    Vec rx_, ry_, rz_;
    double rt_ = 0, hresx_ = 0, hresy_ = 0, hresz_ = 0;
    double cx_ = 0, by_ = 0, hz_ = 0;
    double nx_ = 0, ny_ = 0, nz_ = 0, ns_ = 0;
    double resx0_ = 1, resy0_ = 1, resz0_ = 1;

    struct Stats {
        double gap = 0, mu = 0, pres = 0, dres = 0, pcost = 0, dcost = 0;
        double relgap = -1;  // negative: undefined
        double pinfres = -1, dinfres = -1;
        double kapovert = 0;
    } stat_;

    struct Snapshot {
        Vec x, y, z, s;
        double tau, kap;
        Stats stat;
        int iter;
        bool valid = false;
    } best_;

    void build_kkt();
    void update_kkt_scalings();
    bool factorize();
    int solve_kkt(const Vec& rhs, Vec& dx, Vec& dy, Vec& dz, bool init_shape) const;
    void w2_times(const Vec& v, Vec& out) const;  // out += W^2 v on cone rows
    Vec scale(const Vec& v) const;                // W v
    Vec scale_inv(const Vec& v) const;            // W^-1 v
    void bring_to_cone(const Vec& r, Vec& out) const;
    bool update_scalings();
    void compute_residuals();
    void update_statistics();
    int check_exit(bool reduced) const;  // 0 none, 1 opt, 2 pinf, 3 dinf
    double line_search(const Vec& lam, const Vec& ds, const Vec& dz, double tau, double dtau,
                       double kap, double dkap) const;
    Vec conic_product(const Vec& u, const Vec& v) const;
    Vec conic_division(const Vec& u, const Vec& w) const;
    bool better_than(const Stats& a, const Stats& b) const;
};

void Ipm::build_kkt() {
    const int N = n_ + p_ + m_;
    delta_ = set_.deltastat;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(At_.nonZeros() + Gt_.nonZeros() + N + 16 * std::max(nsoc_, 1)));
    for (int v = 0; v < n_; ++v) trip.emplace_back(v, v, delta_);
    for (int r = 0; r < p_; ++r) trip.emplace_back(n_ + r, n_ + r, -delta_);
    for (int outer = 0; outer < st_.A.outerSize(); ++outer)
        for (SpMat::InnerIterator it(st_.A, outer); it; ++it)
            trip.emplace_back(static_cast<int>(it.col()), n_ + static_cast<int>(it.row()), it.value());
    for (int outer = 0; outer < st_.G.outerSize(); ++outer)
        for (SpMat::InnerIterator it(st_.G, outer); it; ++it)
            trip.emplace_back(static_cast<int>(it.col()), n_ + p_ + static_cast<int>(it.row()), it.value());
    for (int r = 0; r < l_; ++r) trip.emplace_back(n_ + p_ + r, n_ + p_ + r, -1.0 - delta_);
    for (int k = 0; k < nsoc_; ++k) {
        const int d = st_.soc_dims[k];
        const int r0 = n_ + p_ + soc_start_[k];
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                trip.emplace_back(r0 + i, r0 + j, i == j ? -1.0 - delta_ : 0.0);
    }
    K_.resize(N, N);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();

    lp_ptr_.resize(l_);
    for (int r = 0; r < l_; ++r) lp_ptr_[r] = &K_.coeffRef(n_ + p_ + r, n_ + p_ + r);
    soc_ptr_.resize(nsoc_);
    for (int k = 0; k < nsoc_; ++k) {
        const int d = st_.soc_dims[k];
        const int r0 = n_ + p_ + soc_start_[k];
        soc_ptr_[k].clear();
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) soc_ptr_[k].push_back(&K_.coeffRef(r0 + i, r0 + j));
    }
    ldlt_.analyzePattern(K_);
}

void Ipm::update_kkt_scalings() {
    for (int r = 0; r < l_; ++r) *lp_ptr_[r] = -lp_w2_(r) - delta_;
    for (int k = 0; k < nsoc_; ++k) {
        const int d = st_.soc_dims[k];
        std::size_t idx = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                *soc_ptr_[k][idx++] = -soc_w2_[k](i, j) - (i == j ? delta_ : 0.0);
    }
}

bool Ipm::factorize() {
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
}

void Ipm::w2_times(const Vec& v, Vec& out) const {
    out.head(l_) += lp_w2_.cwiseProduct(v.head(l_));
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        out.segment(r0, d) += soc_w2_[k] * v.segment(r0, d);
    }
}

Vec Ipm::scale(const Vec& v) const {
    Vec out(m_);
    out.head(l_) = lp_w2_.head(l_).cwiseSqrt().cwiseProduct(v.head(l_));
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        const double a = soc_a_[k];
        const Vec& q = soc_q_[k];
        const double eta = std::sqrt(soc_eta2_[k]);
        const double zeta = q.dot(v.segment(r0 + 1, d - 1));
        out(r0) = eta * (a * v(r0) + zeta);
        out.segment(r0 + 1, d - 1) =
            eta * (v.segment(r0 + 1, d - 1) + (v(r0) + zeta / (1.0 + a)) * q);
    }
    return out;
}

Vec Ipm::scale_inv(const Vec& v) const {
    Vec out(m_);
    out.head(l_) = v.head(l_).cwiseQuotient(lp_w2_.head(l_).cwiseSqrt());
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        const double a = soc_a_[k];
        const Vec& q = soc_q_[k];
        const double eta = std::sqrt(soc_eta2_[k]);
        // W^-1 = (1/eta) * [[a, -q'], [-q, I + qq'/(1+a)]]
        const double zeta = q.dot(v.segment(r0 + 1, d - 1));
        out(r0) = (a * v(r0) - zeta) / eta;
        out.segment(r0 + 1, d - 1) =
            (v.segment(r0 + 1, d - 1) + (-v(r0) + zeta / (1.0 + a)) * q) / eta;
    }
    return out;
}

void Ipm::bring_to_cone(const Vec& r, Vec& out) const {
    double alpha = -0.99;
    for (int i = 0; i < l_; ++i) alpha = std::max(alpha, -r(i));
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        alpha = std::max(alpha, r.segment(r0 + 1, d - 1).norm() - r(r0));
    }
    out = r;
    if (alpha >= 0.0) {
        const double shift = 1.0 + alpha;
        out.head(l_).array() += shift;
        for (int k = 0; k < nsoc_; ++k) out(soc_start_[k]) += shift;
    }
}

bool Ipm::update_scalings() {
    for (int i = 0; i < l_; ++i) {
        if (s_(i) <= 0.0 || z_(i) <= 0.0) return false;
        lp_w2_(i) = s_(i) / z_(i);
    }
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        const double sres = s_(r0) * s_(r0) - s_.segment(r0 + 1, d - 1).squaredNorm();
        const double zres = z_(r0) * z_(r0) - z_.segment(r0 + 1, d - 1).squaredNorm();
        if (sres <= 0.0 || zres <= 0.0) return false;
        const double snorm = std::sqrt(sres);
        const double znorm = std::sqrt(zres);
        const Vec sbar = s_.segment(r0, d) / snorm;
        const Vec zbar = z_.segment(r0, d) / znorm;
        soc_eta2_[k] = snorm / znorm;
        double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
        soc_a_[k] = (0.5 / gamma) * (sbar(0) + zbar(0));
        soc_q_[k] = (0.5 / gamma) * (sbar.tail(d - 1) - zbar.tail(d - 1));

        // Dense W^2 block: W = eta * [[a, q'], [q, I + qq'/(1+a)]]
        Eigen::MatrixXd wbar(d, d);
        wbar(0, 0) = soc_a_[k];
        wbar.block(0, 1, 1, d - 1) = soc_q_[k].transpose();
        wbar.block(1, 0, d - 1, 1) = soc_q_[k];
        wbar.block(1, 1, d - 1, d - 1) =
            Eigen::MatrixXd::Identity(d - 1, d - 1) +
            soc_q_[k] * soc_q_[k].transpose() / (1.0 + soc_a_[k]);
        soc_w2_[k] = soc_eta2_[k] * (wbar * wbar);
    }
    lambda_ = scale(z_);
    return true;
}

void Ipm::compute_residuals() {
    rx_ = -(Gt_ * z_);
    if (p_ > 0) rx_ -= At_ * y_;
    hresx_ = rx_.norm();
    rx_ -= tau_ * st_.c;

    if (p_ > 0) {
        ry_ = st_.A * x_;
        hresy_ = ry_.norm();
        ry_ -= tau_ * st_.b;
    } else {
        ry_.resize(0);
        hresy_ = 0.0;
    }

    rz_ = s_ + st_.G * x_;
    hresz_ = rz_.norm();
    rz_ -= tau_ * st_.h;

    cx_ = st_.c.dot(x_);
    by_ = p_ > 0 ? st_.b.dot(y_) : 0.0;
    hz_ = st_.h.dot(z_);
    rt_ = kap_ + cx_ + by_ + hz_;

    nx_ = x_.norm();
    ny_ = y_.norm();
    nz_ = z_.norm();
    ns_ = s_.norm();
}

void Ipm::update_statistics() {
    stat_.gap = s_.dot(z_);
    stat_.mu = (stat_.gap + kap_ * tau_) / (degree_ + 1);
    stat_.kapovert = kap_ / tau_;
    stat_.pcost = cx_ / tau_;
    stat_.dcost = -(hz_ + by_) / tau_;
    if (stat_.pcost < 0.0)
        stat_.relgap = stat_.gap / (-stat_.pcost);
    else if (stat_.dcost > 0.0)
        stat_.relgap = stat_.gap / stat_.dcost;
    else
        stat_.relgap = -1.0;

    const double nry = p_ > 0 ? ry_.norm() / std::max(resy0_ + nx_, 1.0) : 0.0;
    const double nrz = rz_.norm() / std::max(resz0_ + nx_ + ns_, 1.0);
    stat_.pres = std::max(nry, nrz) / tau_;
    stat_.dres = rx_.norm() / std::max(resx0_ + ny_ + nz_, 1.0) / tau_;

    stat_.pinfres = -1.0;
    stat_.dinfres = -1.0;
    if ((hz_ + by_) / std::max(ny_ + nz_, 1.0) < -set_.reltol)
        stat_.pinfres = hresx_ / std::max(ny_ + nz_, 1.0);
    if (cx_ / std::max(nx_, 1.0) < -set_.reltol)
        stat_.dinfres =
            std::max(hresy_ / std::max(nx_, 1.0), hresz_ / std::max(nx_ + ns_, 1.0));
}

int Ipm::check_exit(bool reduced) const {
    const double feastol = reduced ? set_.feastol_inacc : set_.feastol;
    const double abstol = reduced ? set_.abstol_inacc : set_.abstol;
    const double reltol = reduced ? set_.reltol_inacc : set_.reltol;

    if ((-cx_ > 0.0 || -by_ - hz_ >= -abstol) && stat_.pres < feastol && stat_.dres < feastol &&
        (stat_.gap < abstol || (stat_.relgap >= 0.0 && stat_.relgap < reltol)))
        return 1;
    if (stat_.dinfres >= 0.0 && stat_.dinfres < feastol && tau_ < kap_) return 3;
    if ((stat_.pinfres >= 0.0 && stat_.pinfres < feastol && tau_ < kap_) ||
        (tau_ < feastol && kap_ < feastol && stat_.pinfres >= 0.0 && stat_.pinfres < feastol))
        return 2;
    return 0;
}

Vec Ipm::conic_product(const Vec& u, const Vec& v) const {
    Vec w(m_);
    w.head(l_) = u.head(l_).cwiseProduct(v.head(l_));
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        w(r0) = u.segment(r0, d).dot(v.segment(r0, d));
        w.segment(r0 + 1, d - 1) =
            u(r0) * v.segment(r0 + 1, d - 1) + v(r0) * u.segment(r0 + 1, d - 1);
    }
    return w;
}

Vec Ipm::conic_division(const Vec& u, const Vec& w) const {
    Vec v(m_);
    v.head(l_) = w.head(l_).cwiseQuotient(u.head(l_));
    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        const double u0 = u(r0);
        const double w0 = w(r0);
        const double rho = u0 * u0 - u.segment(r0 + 1, d - 1).squaredNorm();
        const double zeta = u.segment(r0 + 1, d - 1).dot(w.segment(r0 + 1, d - 1));
        v(r0) = (u0 * w0 - zeta) / rho;
        v.segment(r0 + 1, d - 1) = ((zeta / u0 - w0) / rho) * u.segment(r0 + 1, d - 1) +
                                   w.segment(r0 + 1, d - 1) / u0;
    }
    return v;
}

double Ipm::line_search(const Vec& lam, const Vec& ds, const Vec& dz, double tau, double dtau,
                        double kap, double dkap) const {
    double alpha = 10.0;
    if (l_ > 0) {
        const double rhomin = (ds.head(l_).cwiseQuotient(lam.head(l_))).minCoeff();
        const double sigmin = (dz.head(l_).cwiseQuotient(lam.head(l_))).minCoeff();
        const double worst = std::min(rhomin, sigmin);
        alpha = worst < 0.0 ? 1.0 / (-worst) : 1e13;
    }
    if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
    if (dkap < 0.0) alpha = std::min(alpha, -kap / dkap);

    for (int k = 0; k < nsoc_; ++k) {
        const int r0 = soc_start_[k];
        const int d = st_.soc_dims[k];
        const double lk2 = lam(r0) * lam(r0) - lam.segment(r0 + 1, d - 1).squaredNorm();
        if (lk2 <= 0.0) continue;
        const double lknorm = std::sqrt(lk2);
        Vec lkbar = lam.segment(r0, d) / lknorm;
        const double inv = 1.0 / lknorm;

        const double lds = lkbar(0) * ds(r0) - lkbar.tail(d - 1).dot(ds.segment(r0 + 1, d - 1));
        const double ldz = lkbar(0) * dz(r0) - lkbar.tail(d - 1).dot(dz.segment(r0 + 1, d - 1));

        Vec rho(d);
        rho(0) = inv * lds;
        double f = (lds + ds(r0)) / (lkbar(0) + 1.0);
        rho.tail(d - 1) = inv * (ds.segment(r0 + 1, d - 1) - f * lkbar.tail(d - 1));
        const double rhonorm = rho.tail(d - 1).norm() - rho(0);

        Vec sig(d);
        sig(0) = inv * ldz;
        f = (ldz + dz(r0)) / (lkbar(0) + 1.0);
        sig.tail(d - 1) = inv * (dz.segment(r0 + 1, d - 1) - f * lkbar.tail(d - 1));
        const double signorm = sig.tail(d - 1).norm() - sig(0);

        const double conic_step = std::max({0.0, rhonorm, signorm});
        if (conic_step != 0.0) alpha = std::min(alpha, 1.0 / conic_step);
    }
    return std::clamp(alpha, set_.stepmin, set_.stepmax);
}

int Ipm::solve_kkt(const Vec& rhs, Vec& dx, Vec& dy, Vec& dz, bool init_shape) const {
    Vec sol = ldlt_.solve(rhs);
    const double threshold = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * set_.linsysacc;
    double prev_err = std::numeric_limits<double>::max();
    Vec correction;

    int it = 0;
    for (it = 0; it <= set_.nitref; ++it) {
        const auto cx = sol.head(n_);
        const auto cy = sol.segment(n_, p_);
        const auto cz = sol.tail(m_);

        Vec ex = rhs.head(n_) - Gt_ * cz;
        if (p_ > 0) ex -= At_ * cy;
        ex -= delta_ * cx;

        Vec ey = rhs.segment(n_, p_);
        if (p_ > 0) ey -= st_.A * cx;
        ey += delta_ * cy;

        Vec ez = rhs.tail(m_) - st_.G * cx;
        if (init_shape) {
            ez += cz;  // scaling is the identity during initialization
        } else {
            w2_times(cz, ez);
        }
        ez += delta_ * cz;

        double err = std::max(ex.lpNorm<Eigen::Infinity>(), ez.lpNorm<Eigen::Infinity>());
        if (p_ > 0) err = std::max(err, ey.lpNorm<Eigen::Infinity>());

        if (it > 0 && err > prev_err) {
            sol -= correction;
            --it;
            break;
        }
        if (it == set_.nitref || err < threshold || (it > 0 && prev_err < 6.0 * err)) break;
        prev_err = err;

        Vec e(n_ + p_ + m_);
        e << ex, ey, ez;
        correction = ldlt_.solve(e);
        sol += correction;
    }

    dx = sol.head(n_);
    dy = sol.segment(n_, p_);
    dz = sol.tail(m_);
    return it;
}

IpmResult Ipm::run() {
    IpmResult res;
    resx0_ = std::max(1.0, st_.c.norm());
    resy0_ = std::max(1.0, st_.b.norm());
    resz0_ = std::max(1.0, st_.h.norm());

    // Identity scaling for initialization.
    lp_w2_.setOnes();
    for (int k = 0; k < nsoc_; ++k) {
        soc_a_[k] = 1.0;
        soc_eta2_[k] = 1.0;
        soc_q_[k].setZero();
        soc_w2_[k].setIdentity();
    }
    update_kkt_scalings();
    {
        int tries = 0;
        while (!factorize()) {
            if (++tries > 3) throw NumericalError("KKT system is not factorizable");
            delta_ *= 100.0;
            update_kkt_scalings();
        }
    }

    Vec rhs1 = Vec::Zero(n_ + p_ + m_);
    rhs1.segment(n_, p_) = st_.b;
    rhs1.tail(m_) = st_.h;
    Vec rhs2 = Vec::Zero(n_ + p_ + m_);
    rhs2.head(n_) = -st_.c;

    Vec dx1(n_), dy1(p_), dz1(m_), dx2(n_), dy2(p_), dz2(m_);
    solve_kkt(rhs1, dx1, dy1, dz1, true);
    x_ = dx1;
    s_.resize(m_);
    bring_to_cone(-dz1, s_);

    solve_kkt(rhs2, dx2, dy2, dz2, true);
    y_ = dy2;
    z_.resize(m_);
    bring_to_cone(dz2, z_);

    rhs1.head(n_) = -st_.c;
    tau_ = 1.0;
    kap_ = 1.0;
    lambda_.resize(m_);

    double pres_prev = std::numeric_limits<double>::max();
    double last_step = 1.0;

    auto snapshot = [&](int iter) {
        best_.x = x_;
        best_.y = y_;
        best_.z = z_;
        best_.s = s_;
        best_.tau = tau_;
        best_.kap = kap_;
        best_.stat = stat_;
        best_.iter = iter;
        best_.valid = true;
    };
    auto restore = [&] {
        if (!best_.valid) return;
        x_ = best_.x;
        y_ = best_.y;
        z_ = best_.z;
        s_ = best_.s;
        tau_ = best_.tau;
        kap_ = best_.kap;
        stat_ = best_.stat;
    };
    auto finish = [&](IpmStatus status, int iter, bool reduced) {
        res.status = status;
        res.x = x_;
        res.y = y_;
        res.z = z_;
        res.s = s_;
        res.tau = tau_;
        res.kap = kap_;
        res.iterations = iter;
        res.reduced_accuracy = reduced;
        return res;
    };

    for (int iter = 0; iter <= set_.max_iter; ++iter) {
        compute_residuals();
        update_statistics();

        if (iter > 0 && (stat_.pres > set_.safeguard * pres_prev || stat_.gap < 0.0)) {
            restore();
            const int code = check_exit(true);
            if (code == 1) return finish(IpmStatus::Optimal, iter, true);
            if (code == 2) return finish(IpmStatus::PrimalInfeasible, iter, true);
            if (code == 3) return finish(IpmStatus::DualInfeasible, iter, true);
            return finish(IpmStatus::Numerics, iter, true);
        }
        pres_prev = stat_.pres;

        int code = check_exit(false);
        if (code == 1) return finish(IpmStatus::Optimal, iter, false);
        if (code == 2) return finish(IpmStatus::PrimalInfeasible, iter, false);
        if (code == 3) return finish(IpmStatus::DualInfeasible, iter, false);

        if (iter > 0 && last_step == set_.stepmin * set_.gamma) {
            restore();
            code = check_exit(true);
            if (code == 1) return finish(IpmStatus::Optimal, iter, true);
            if (code == 2) return finish(IpmStatus::PrimalInfeasible, iter, true);
            if (code == 3) return finish(IpmStatus::DualInfeasible, iter, true);
            return finish(IpmStatus::Numerics, iter, true);
        }
        if (iter == set_.max_iter) {
            if (best_.valid && !better_than(stat_, best_.stat)) restore();
            code = check_exit(true);
            if (code == 1) return finish(IpmStatus::Optimal, iter, true);
            if (code == 2) return finish(IpmStatus::PrimalInfeasible, iter, true);
            if (code == 3) return finish(IpmStatus::DualInfeasible, iter, true);
            return finish(IpmStatus::MaxIter, iter, true);
        }
        if (std::isnan(stat_.pcost)) {
            if (best_.valid) restore();
            code = check_exit(true);
            if (code == 1) return finish(IpmStatus::Optimal, iter, true);
            return finish(IpmStatus::Numerics, iter, true);
        }

        if (iter == 0 || better_than(stat_, best_.stat)) snapshot(iter);

        if (!update_scalings()) {
            restore();
            return finish(check_exit(true) == 1 ? IpmStatus::Optimal : IpmStatus::Numerics, iter,
                          true);
        }
        update_kkt_scalings();
        {
            // A scaling blow-up late in the solve breaks the factorization;
            // fall back to the best iterate seen instead of giving up.
            int tries = 0;
            bool factored = true;
            while (!(factored = factorize())) {
                if (++tries > 3) break;
                delta_ *= 100.0;
                update_kkt_scalings();
            }
            if (!factored) {
                restore();
                const int code = check_exit(true);
                if (code == 1) return finish(IpmStatus::Optimal, iter, true);
                if (code == 2) return finish(IpmStatus::PrimalInfeasible, iter, true);
                if (code == 3) return finish(IpmStatus::DualInfeasible, iter, true);
                return finish(IpmStatus::Numerics, iter, true);
            }
        }

        solve_kkt(rhs1, dx1, dy1, dz1, false);

        // Affine (predictor) direction.
        rhs2.head(n_) = rx_;
        rhs2.segment(n_, p_) = -ry_;
        rhs2.tail(m_) = s_ - rz_;
        solve_kkt(rhs2, dx2, dy2, dz2, false);

        const double dtau_denom =
            kap_ / tau_ - st_.c.dot(dx1) - (p_ > 0 ? st_.b.dot(dy1) : 0.0) - st_.h.dot(dz1);
        const double dtauaff = (rt_ - kap_ + st_.c.dot(dx2) + (p_ > 0 ? st_.b.dot(dy2) : 0.0) +
                                st_.h.dot(dz2)) /
                               dtau_denom;

        Vec dzaff = dz2 + dtauaff * dz1;
        Vec w_dzaff = scale(dzaff);
        Vec dsaff_by_w = -w_dzaff - lambda_;
        const double dkapaff = -kap_ - kap_ / tau_ * dtauaff;

        const double step_aff = line_search(lambda_, dsaff_by_w, w_dzaff, tau_, dtauaff, kap_, dkapaff);
        const double sigma =
            std::clamp(std::pow(1.0 - step_aff, 3.0), set_.sigmamin, set_.sigmamax);

        // Combined (corrector) direction.
        Vec ds = conic_product(lambda_, lambda_);
        ds += conic_product(dsaff_by_w, w_dzaff);
        const double sigmamu = sigma * stat_.mu;
        ds.head(l_).array() -= sigmamu;
        for (int k = 0; k < nsoc_; ++k) ds(soc_start_[k]) -= sigmamu;

        Vec lam_div_ds = conic_division(lambda_, ds);
        Vec w_lam_div_ds = scale(lam_div_ds);

        rhs2.head(n_) = (1.0 - sigma) * rx_;
        rhs2.segment(n_, p_) = -(1.0 - sigma) * ry_;
        rhs2.tail(m_) = -(1.0 - sigma) * rz_ + w_lam_div_ds;
        solve_kkt(rhs2, dx2, dy2, dz2, false);

        const double bkap = kap_ * tau_ + dkapaff * dtauaff - sigmamu;
        const double dtau = ((1.0 - sigma) * rt_ - bkap / tau_ + st_.c.dot(dx2) +
                             (p_ > 0 ? st_.b.dot(dy2) : 0.0) + st_.h.dot(dz2)) /
                            dtau_denom;

        dx2 += dtau * dx1;
        if (p_ > 0) dy2 += dtau * dy1;
        dz2 += dtau * dz1;

        Vec w_dz = scale(dz2);
        Vec ds_by_w = -(lam_div_ds + w_dz);
        const double dkap = -(bkap + kap_ * dtau) / tau_;

        const double step =
            set_.gamma * line_search(lambda_, ds_by_w, w_dz, tau_, dtau, kap_, dkap);
        last_step = step;

        Vec ds_unscaled = scale(ds_by_w);

        x_ += step * dx2;
        if (p_ > 0) y_ += step * dy2;
        z_ += step * dz2;
        s_ += step * ds_unscaled;
        kap_ += step * dkap;
        tau_ += step * dtau;
    }
    return finish(IpmStatus::Numerics, set_.max_iter, true);
}

bool Ipm::better_than(const Stats& a, const Stats& b) const {
    // A leaner version of the ECOS iterate comparison.
    if (a.pinfres >= 0.0 && a.kapovert > 1.0)
        return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && a.mu > 0.0 && a.mu < b.mu;
    return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && a.pres > 0.0 && a.pres < b.pres &&
           a.dres > 0.0 && a.dres < b.dres && a.kapovert > 0.0 && a.kapovert < b.kapovert &&
           a.mu > 0.0 && a.mu < b.mu;
}

// ---------------------------------------------------------------------------
// Mapping between the public problem form and the standard form.
// ---------------------------------------------------------------------------

const double kSqrt2Inv = 1.0 / std::sqrt(2.0);

Solution map_solution(const Problem& pr, const Standard& st, const IpmResult& ipm) {
    Solution sol;
    sol.iterations = ipm.iterations;
    const int n = st.n;
    const auto& cones = pr.cones();

    auto divide = [](const Vec& v, double tau) { return Vec(v / tau); };

    switch (ipm.status) {
        case IpmStatus::Optimal: {
            const double tau = ipm.tau;
            Vec x = divide(ipm.x, tau);
            Vec y = divide(ipm.y, tau);
            Vec z = divide(ipm.z, tau);
            sol.status = SolveStatus::Optimal;
            sol.primal.assign(x.data(), x.data() + n);
            sol.eq_duals.assign(y.data(), y.data() + st.num_original_eq);
            sol.lower_duals.assign(n, 0.0);
            sol.upper_duals.assign(n, 0.0);
            for (int v = 0; v < n; ++v) {
                if (st.lower_row[v] >= 0 && std::isfinite(pr.lower()[v]))
                    sol.lower_duals[v] = std::max(0.0, z(st.lower_row[v]));
                if (st.upper_row[v] >= 0 && std::isfinite(pr.upper()[v]))
                    sol.upper_duals[v] = std::max(0.0, z(st.upper_row[v]));
            }
            sol.cone_duals.resize(cones.size());
            for (std::size_t k = 0; k < cones.size(); ++k) {
                const auto& cone = cones[k];
                std::vector<double> zeta(cone.w.size() + 2, 0.0);
                if (st.cone_row[k] >= 0) {
                    const int r0 = st.cone_row[k];
                    const double z0 = z(r0), z1 = z(r0 + 1);
                    zeta[0] = kSqrt2Inv * (z0 + z1);
                    zeta[1] = kSqrt2Inv * (z0 - z1);
                    for (std::size_t j = 0; j < cone.w.size(); ++j) zeta[2 + j] = z(r0 + 2 + j);
                } else {
                    // Presolved cone: recover w-components from the pinning
                    // rows and pick the smallest dual (u, v) pair inside the
                    // rotated cone.
                    double wnorm2 = 0.0;
                    for (std::size_t j = 0; j < st.presolved_w_rows[k].size(); ++j) {
                        const int row = st.presolved_w_rows[k][j];
                        if (row < 0) continue;
                        const double d = -y(row);
                        zeta[2 + j] = d;
                        wnorm2 += d * d;
                    }
                    zeta[0] = zeta[1] = std::sqrt(wnorm2 / 2.0);
                }
                sol.cone_duals[k] = std::move(zeta);
            }
            // Fold fixed-variable row duals into the bound multipliers. Rows
            // consumed by a presolved cone are already accounted for through
            // that cone's dual.
            for (int v = 0; v < n; ++v) {
                if (st.fixed_eq_row[v] < 0 || st.pin_consumed[v]) continue;
                double yf = y(st.fixed_eq_row[v]);
                for (std::size_t k = 0; k < cones.size(); ++k) {
                    if (st.cone_row[k] >= 0) continue;
                    if (cones[k].u == v) yf += sol.cone_duals[k][0];
                    if (cones[k].v == v) yf += sol.cone_duals[k][1];
                }
                sol.lower_duals[v] = std::max(-yf, 0.0);
                sol.upper_duals[v] = std::max(yf, 0.0);
            }
            sol.objective_value = 0.0;
            for (int v = 0; v < n; ++v) sol.objective_value += pr.objective()[v] * sol.primal[v];
            break;
        }
        case IpmStatus::PrimalInfeasible: {
            sol.status = SolveStatus::Infeasible;
            const Vec& y = ipm.y;
            const Vec& z = ipm.z;
            sol.primal.assign(n, 0.0);
            sol.eq_duals.assign(y.data(), y.data() + st.num_original_eq);
            sol.lower_duals.assign(n, 0.0);
            sol.upper_duals.assign(n, 0.0);
            sol.cone_duals.resize(cones.size());
            for (std::size_t k = 0; k < cones.size(); ++k) {
                const auto& cone = cones[k];
                std::vector<double> zeta(cone.w.size() + 2, 0.0);
                if (st.cone_row[k] >= 0) {
                    const int r0 = st.cone_row[k];
                    zeta[0] = kSqrt2Inv * (z(r0) + z(r0 + 1));
                    zeta[1] = kSqrt2Inv * (z(r0) - z(r0 + 1));
                    for (std::size_t j = 0; j < cone.w.size(); ++j) zeta[2 + j] = z(r0 + 2 + j);
                } else {
                    double wnorm2 = 0.0;
                    for (std::size_t j = 0; j < st.presolved_w_rows[k].size(); ++j) {
                        const int row = st.presolved_w_rows[k][j];
                        if (row < 0) continue;
                        zeta[2 + j] = -y(row);
                        wnorm2 += zeta[2 + j] * zeta[2 + j];
                    }
                    zeta[0] = zeta[1] = std::sqrt(wnorm2 / 2.0);
                }
                sol.cone_duals[k] = std::move(zeta);
            }
            for (int v = 0; v < n; ++v) {
                if (st.lower_row[v] >= 0 && std::isfinite(pr.lower()[v]))
                    sol.lower_duals[v] = std::max(0.0, z(st.lower_row[v]));
                if (st.upper_row[v] >= 0 && std::isfinite(pr.upper()[v]))
                    sol.upper_duals[v] = std::max(0.0, z(st.upper_row[v]));
                if (st.fixed_eq_row[v] >= 0 && !st.pin_consumed[v]) {
                    double yf = y(st.fixed_eq_row[v]);
                    for (std::size_t k = 0; k < cones.size(); ++k) {
                        if (st.cone_row[k] >= 0) continue;
                        if (cones[k].u == v) yf += sol.cone_duals[k][0];
                        if (cones[k].v == v) yf += sol.cone_duals[k][1];
                    }
                    sol.lower_duals[v] = std::max(-yf, 0.0);
                    sol.upper_duals[v] = std::max(yf, 0.0);
                }
            }
            // Normalize the ray in original-problem coordinates so that
            // d'y - lo'lam + up'mu = -1.
            double val = 0.0;
            for (std::size_t i = 0; i < pr.equalities().size(); ++i)
                val += pr.equalities()[i].rhs * sol.eq_duals[i];
            for (int v = 0; v < n; ++v) {
                if (std::isfinite(pr.lower()[v])) val -= pr.lower()[v] * sol.lower_duals[v];
                if (std::isfinite(pr.upper()[v])) val += pr.upper()[v] * sol.upper_duals[v];
            }
            const double scale = val < -1e-300 ? -1.0 / val : 1.0;
            for (auto& d : sol.eq_duals) d *= scale;
            for (auto& d : sol.lower_duals) d *= scale;
            for (auto& d : sol.upper_duals) d *= scale;
            for (auto& block : sol.cone_duals)
                for (auto& d : block) d *= scale;
            sol.objective_value = std::numeric_limits<double>::infinity();
            break;
        }
        case IpmStatus::DualInfeasible: {
            sol.status = SolveStatus::Unbounded;
            const double cx = st.c.dot(ipm.x);
            Vec x = divide(ipm.x, -cx);
            sol.primal.assign(x.data(), x.data() + n);
            sol.eq_duals.assign(st.num_original_eq, 0.0);
            sol.lower_duals.assign(n, 0.0);
            sol.upper_duals.assign(n, 0.0);
            sol.cone_duals.resize(cones.size());
            for (std::size_t k = 0; k < cones.size(); ++k)
                sol.cone_duals[k].assign(cones[k].w.size() + 2, 0.0);
            sol.objective_value = -std::numeric_limits<double>::infinity();
            break;
        }
        default: {
            sol.status = SolveStatus::IterationLimit;
            const double tau = std::abs(ipm.tau) > 1e-12 ? ipm.tau : 1.0;
            Vec x = divide(ipm.x, tau);
            sol.primal.assign(x.data(), x.data() + n);
            sol.eq_duals.assign(st.num_original_eq, 0.0);
            sol.lower_duals.assign(n, 0.0);
            sol.upper_duals.assign(n, 0.0);
            sol.cone_duals.resize(cones.size());
            for (std::size_t k = 0; k < cones.size(); ++k)
                sol.cone_duals[k].assign(cones[k].w.size() + 2, 0.0);
            sol.objective_value = 0.0;
            for (int v = 0; v < n; ++v) sol.objective_value += pr.objective()[v] * sol.primal[v];
            break;
        }
    }
    return sol;
}

} // namespace

// ---------------------------------------------------------------------------
// Problem builder
// ---------------------------------------------------------------------------

int Problem::add_variable(double lower, double upper, double objective) {
    objective_.push_back(objective);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return static_cast<int>(objective_.size()) - 1;
}

void Problem::set_bounds(int var, double lower, double upper) {
    lower_[var] = lower;
    upper_[var] = upper;
}

int Problem::add_equality(std::vector<Term> terms, double rhs) {
    equalities_.push_back(Row{std::move(terms), rhs});
    return static_cast<int>(equalities_.size()) - 1;
}

int Problem::add_leq(std::vector<Term> terms, double rhs) {
    const int slack = add_variable(0.0, kInf);
    terms.push_back({slack, 1.0});
    add_equality(std::move(terms), rhs);
    return slack;
}

int Problem::add_geq(std::vector<Term> terms, double rhs) {
    const int slack = add_variable(0.0, kInf);
    terms.push_back({slack, -1.0});
    add_equality(std::move(terms), rhs);
    return slack;
}

int Problem::add_range(std::vector<Term> terms, double lower, double upper) {
    const int slack = add_variable(lower, upper);
    terms.push_back({slack, -1.0});
    add_equality(std::move(terms), 0.0);
    return slack;
}

void Problem::add_cone(RotatedCone cone) { cones_.push_back(std::move(cone)); }

void Problem::validate() const {
    const int n = num_variables();
    for (int v = 0; v < n; ++v) {
        if (!std::isfinite(objective_[v])) throw ModelError("non-finite objective coefficient");
        if (lower_[v] > upper_[v]) throw ModelError("variable with lower bound above upper bound");
    }
    for (const auto& row : equalities_)
        for (const auto& t : row.terms)
            if (t.var < 0 || t.var >= n) throw ModelError("equality references unknown variable");
    std::vector<char> used(n, 0);
    for (const auto& cone : cones_) {
        std::vector<int> slots = cone.w;
        slots.push_back(cone.u);
        slots.push_back(cone.v);
        for (int s : slots) {
            if (s < 0 || s >= n) throw ModelError("cone references unknown variable");
            if (used[s]) throw ModelError("variable appears in more than one cone slot");
            used[s] = 1;
        }
    }
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

double Residuals::worst() const { return std::max({primal, dual, complementarity}); }

// ---------------------------------------------------------------------------
// solve()
// ---------------------------------------------------------------------------

Solution solve(const Problem& problem, const Tolerances& tol, int max_iter) {
    problem.validate();
    const Standard st = convert(problem);

    IpmSettings settings;
    settings.feastol = std::max(tol.feas, 1e-12);
    settings.abstol = std::max(tol.abs_gap, 1e-12);
    settings.reltol = std::max(tol.rel_gap, 1e-12);
    settings.feastol_inacc = tol.feas * 1e4;
    settings.abstol_inacc = tol.abs_gap * 1e4;
    settings.reltol_inacc = tol.rel_gap * 1e4;
    settings.max_iter = max_iter;

    Ipm ipm(st, settings);
    IpmResult result = ipm.run();

    // The exit tests use solver-internal scalings; re-verify the mapped
    // solution against the public tolerance and tighten once if needed.
    if (result.status == IpmStatus::Optimal) {
        Solution candidate = map_solution(problem, st, result);
        if (kkt_residuals(problem, candidate).worst() > tol.feas) {
            IpmSettings tighter = settings;
            tighter.feastol = std::max(settings.feastol * 0.05, 1e-12);
            tighter.abstol = std::max(settings.abstol * 0.05, 1e-12);
            tighter.reltol = std::max(settings.reltol * 0.05, 1e-12);
            Ipm retry(st, tighter);
            IpmResult tightened = retry.run();
            if (tightened.status == IpmStatus::Optimal) result = tightened;
        }
    }

    if (st.artificial_bounds && result.status == IpmStatus::Optimal) {
        // An artificial box is only ever active when the true program is
        // unbounded over its affine set.
        const Vec x = result.x / result.tau;
        if (x.lpNorm<Eigen::Infinity>() > 0.99e9) {
            Solution sol;
            sol.status = SolveStatus::Unbounded;
            sol.primal.assign(st.n, 0.0);
            sol.iterations = result.iterations;
            sol.objective_value = -kInf;
            sol.eq_duals.assign(st.num_original_eq, 0.0);
            sol.lower_duals.assign(st.n, 0.0);
            sol.upper_duals.assign(st.n, 0.0);
            sol.cone_duals.resize(problem.cones().size());
            for (std::size_t k = 0; k < problem.cones().size(); ++k)
                sol.cone_duals[k].assign(problem.cones()[k].w.size() + 2, 0.0);
            return sol;
        }
    }

    Solution sol = map_solution(problem, st, result);
    if (result.status == IpmStatus::MaxIter || result.status == IpmStatus::Numerics)
        sol.status = SolveStatus::IterationLimit;
    if (sol.status == SolveStatus::Optimal) {
        const Residuals res = kkt_residuals(problem, sol);
        if (res.worst() > tol.feas) sol.status = SolveStatus::IterationLimit;
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Independent residual computation
// ---------------------------------------------------------------------------

Residuals kkt_residuals(const Problem& pr, const Solution& sol) {
    Residuals out;
    const int n = pr.num_variables();
    const auto& x = sol.primal;

    double bnorm = 0.0;
    for (const auto& row : pr.equalities()) bnorm = std::max(bnorm, std::abs(row.rhs));
    double primal = 0.0;
    for (const auto& row : pr.equalities()) {
        double lhs = 0.0;
        for (const auto& t : row.terms) lhs += t.coef * x[t.var];
        primal = std::max(primal, std::abs(lhs - row.rhs) / (1.0 + bnorm));
    }
    for (int v = 0; v < n; ++v) {
        const double lo = pr.lower()[v], up = pr.upper()[v];
        if (std::isfinite(lo))
            primal = std::max(primal, (lo - x[v]) / (1.0 + std::abs(lo)));
        if (std::isfinite(up))
            primal = std::max(primal, (x[v] - up) / (1.0 + std::abs(up)));
    }
    for (const auto& cone : pr.cones()) {
        double wn2 = 0.0, xn2 = x[cone.u] * x[cone.u] + x[cone.v] * x[cone.v];
        for (int wv : cone.w) {
            wn2 += x[wv] * x[wv];
            xn2 += x[wv] * x[wv];
        }
        const double viol = wn2 - 2.0 * x[cone.u] * x[cone.v];
        primal = std::max(primal, viol / (1.0 + xn2));
        primal = std::max(primal, -x[cone.u] / (1.0 + std::abs(x[cone.u])));
        primal = std::max(primal, -x[cone.v] / (1.0 + std::abs(x[cone.v])));
    }
    out.primal = std::max(primal, 0.0);

    // Stationarity: c + E' y - lam + mu - scatter(zeta) = 0
    std::vector<double> r(pr.objective());
    for (std::size_t i = 0; i < pr.equalities().size(); ++i)
        for (const auto& t : pr.equalities()[i].terms) r[t.var] += t.coef * sol.eq_duals[i];
    double dual_sign_viol = 0.0;
    for (int v = 0; v < n; ++v) {
        r[v] += -sol.lower_duals[v] + sol.upper_duals[v];
        dual_sign_viol = std::max({dual_sign_viol, -sol.lower_duals[v], -sol.upper_duals[v]});
    }
    for (std::size_t k = 0; k < pr.cones().size(); ++k) {
        const auto& cone = pr.cones()[k];
        const auto& zeta = sol.cone_duals[k];
        r[cone.u] -= zeta[0];
        r[cone.v] -= zeta[1];
        for (std::size_t j = 0; j < cone.w.size(); ++j) r[cone.w[j]] -= zeta[2 + j];
        double wn2 = 0.0, zn2 = zeta[0] * zeta[0] + zeta[1] * zeta[1];
        for (std::size_t j = 0; j < cone.w.size(); ++j) {
            wn2 += zeta[2 + j] * zeta[2 + j];
            zn2 += zeta[2 + j] * zeta[2 + j];
        }
        dual_sign_viol = std::max(dual_sign_viol, (wn2 - 2.0 * zeta[0] * zeta[1]) / (1.0 + zn2));
    }
    double cnorm = 0.0;
    for (double cv : pr.objective()) cnorm = std::max(cnorm, std::abs(cv));
    double dual = 0.0;
    for (int v = 0; v < n; ++v) dual = std::max(dual, std::abs(r[v]) / (1.0 + cnorm));
    out.dual = std::max(dual, dual_sign_viol);

    double comp = 0.0;
    for (int v = 0; v < n; ++v) {
        if (std::isfinite(pr.lower()[v])) comp += sol.lower_duals[v] * (x[v] - pr.lower()[v]);
        if (std::isfinite(pr.upper()[v])) comp += sol.upper_duals[v] * (pr.upper()[v] - x[v]);
    }
    for (std::size_t k = 0; k < pr.cones().size(); ++k) {
        const auto& cone = pr.cones()[k];
        const auto& zeta = sol.cone_duals[k];
        comp += zeta[0] * x[cone.u] + zeta[1] * x[cone.v];
        for (std::size_t j = 0; j < cone.w.size(); ++j) comp += zeta[2 + j] * x[cone.w[j]];
    }
    out.complementarity = std::abs(comp) / (1.0 + std::abs(sol.objective_value));
    return out;
}

double certificate_residual(const Problem& pr, const Solution& sol) {
    const int n = pr.num_variables();
    if (sol.status == SolveStatus::Infeasible) {
        // Dual ray: E' y - lam + mu - scatter(zeta) = 0 with
        // d' y - lo' lam + up' mu = -1.
        std::vector<double> r(n, 0.0);
        double ynorm = 1.0;
        for (std::size_t i = 0; i < pr.equalities().size(); ++i) {
            ynorm = std::max(ynorm, std::abs(sol.eq_duals[i]));
            for (const auto& t : pr.equalities()[i].terms) r[t.var] += t.coef * sol.eq_duals[i];
        }
        double viol = 0.0;
        double value = 0.0;
        for (std::size_t i = 0; i < pr.equalities().size(); ++i)
            value += pr.equalities()[i].rhs * sol.eq_duals[i];
        for (int v = 0; v < n; ++v) {
            r[v] += -sol.lower_duals[v] + sol.upper_duals[v];
            viol = std::max({viol, -sol.lower_duals[v], -sol.upper_duals[v]});
            if (std::isfinite(pr.lower()[v]))
                value -= pr.lower()[v] * sol.lower_duals[v];
            else
                viol = std::max(viol, std::abs(sol.lower_duals[v]));
            if (std::isfinite(pr.upper()[v]))
                value += pr.upper()[v] * sol.upper_duals[v];
            else
                viol = std::max(viol, std::abs(sol.upper_duals[v]));
        }
        for (std::size_t k = 0; k < pr.cones().size(); ++k) {
            const auto& cone = pr.cones()[k];
            const auto& zeta = sol.cone_duals[k];
            r[cone.u] -= zeta[0];
            r[cone.v] -= zeta[1];
            for (std::size_t j = 0; j < cone.w.size(); ++j) r[cone.w[j]] -= zeta[2 + j];
            double wn2 = 0.0;
            for (std::size_t j = 0; j < cone.w.size(); ++j) wn2 += zeta[2 + j] * zeta[2 + j];
            viol = std::max(viol, wn2 - 2.0 * zeta[0] * zeta[1]);
        }
        double stat = 0.0;
        for (int v = 0; v < n; ++v) stat = std::max(stat, std::abs(r[v]));
        return std::max({stat / ynorm, viol, std::abs(value + 1.0)});
    }
    if (sol.status == SolveStatus::Unbounded) {
        // Primal ray: E x = 0, bound directions respected, cone slots in
        // the cone, c' x = -1.
        const auto& x = sol.primal;
        double viol = 0.0;
        for (const auto& row : pr.equalities()) {
            double lhs = 0.0;
            for (const auto& t : row.terms) lhs += t.coef * x[t.var];
            viol = std::max(viol, std::abs(lhs));
        }
        for (int v = 0; v < n; ++v) {
            if (std::isfinite(pr.lower()[v])) viol = std::max(viol, -x[v]);
            if (std::isfinite(pr.upper()[v])) viol = std::max(viol, x[v]);
        }
        for (const auto& cone : pr.cones()) {
            double wn2 = 0.0;
            for (int wv : cone.w) wn2 += x[wv] * x[wv];
            viol = std::max({viol, wn2 - 2.0 * x[cone.u] * x[cone.v], -x[cone.u], -x[cone.v]});
        }
        double cx = 0.0;
        for (int v = 0; v < n; ++v) cx += pr.objective()[v] * x[v];
        return std::max(viol, std::abs(cx + 1.0));
    }
    return kInf;
}

void dump(const Problem& pr, std::ostream& os) {
    os << "vars " << pr.num_variables() << "\n";
    os << "min";
    for (int v = 0; v < pr.num_variables(); ++v)
        if (pr.objective()[v] != 0.0) os << " " << pr.objective()[v] << "*x" << v;
    os << "\n";
    for (std::size_t i = 0; i < pr.equalities().size(); ++i) {
        os << "eq r" << i << ":";
        for (const auto& t : pr.equalities()[i].terms) os << " " << t.coef << "*x" << t.var;
        os << " = " << pr.equalities()[i].rhs << "\n";
    }
    for (int v = 0; v < pr.num_variables(); ++v) {
        if (std::isfinite(pr.lower()[v]) || std::isfinite(pr.upper()[v]))
            os << "bnd x" << v << " in [" << pr.lower()[v] << ", " << pr.upper()[v] << "]\n";
    }
    for (std::size_t k = 0; k < pr.cones().size(); ++k) {
        const auto& cone = pr.cones()[k];
        os << "cone k" << k << ": 2*x" << cone.u << "*x" << cone.v << " >=";
        for (std::size_t j = 0; j < cone.w.size(); ++j)
            os << (j ? " + " : " ") << "x" << cone.w[j] << "^2";
        os << "\n";
    }
}

} // namespace flexmap::conic
