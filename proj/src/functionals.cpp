#include <cmath>

#include "glehomog/engine.hpp"
#include "glehomog/errors.hpp"

namespace glehomog {

FunctionalLedger accumulate(const Trajectory& tr, const GleSpec& spec, const FunctionalSet& which) {
    if ((which.Q || which.E || which.S_env) && spec.has_white_noise())
        fail(ErrorKind::refusal, "accumulate: heat, energy and entropy are undefined when sigma0 != 0");
    if ((which.Q || which.E || which.S_env) && !spec.fnc_acts && !spec.f_nc.zero)
        fail(ErrorKind::refusal, "accumulate: heat and energy need f_nc to act on the particle");
    const BlockInfo* bx = tr.find(BlockKind::x);
    if (!bx) fail(ErrorKind::dimension, "accumulate: trajectory has no x block");
    const Eigen::Index d = bx->dim, ox = tr.z_offset(BlockKind::x);
    const bool has_v = tr.find(BlockKind::v) != nullptr;
    const Eigen::Index ov = tr.z_offset(BlockKind::v);
    const double m = tr.mass;

    FunctionalLedger L;
    L.which = which;
    const size_t n = tr.t.size();
    L.t = tr.t;
    for (auto* s : {&L.Q, &L.W, &L.R, &L.E, &L.S_env, &L.area, &L.B}) s->assign(n, 0.0);

    auto U = [&](double t, const Vec& x) { return spec.potential(t, x); };
    auto energy = [&](size_t k) {
        Vec x = tr.Z.row(k).segment(ox, d).transpose();
        double e = U(tr.t[k], x);
        if (has_v) e += 0.5 * m * tr.Z.row(k).segment(ov, d).squaredNorm();
        return e;
    };
    if (which.E) L.E[0] = energy(0);
    L.B[0] = 0.5 * tr.eps * tr.fast_sq(0);

    double Q = 0, W = 0, R = 0, A = 0;
    for (size_t k = 0; k + 1 < n; ++k) {
        const double t0 = tr.t[k], t1 = tr.t[k + 1], tm = 0.5 * (t0 + t1);
        Vec x0 = tr.Z.row(k).segment(ox, d).transpose(), x1 = tr.Z.row(k + 1).segment(ox, d).transpose();
        Vec dx = x1 - x0, xm = 0.5 * (x0 + x1);
        double du_time = 0, du_space = 0;
        if (!spec.potential.zero) {
            const double u00 = U(t0, x0), u10 = U(t1, x0), u01 = U(t0, x1), u11 = U(t1, x1);
            du_time = 0.5 * ((u10 - u00) + (u11 - u01));
            du_space = 0.5 * ((u01 - u00) + (u11 - u10));
        }
        const double fdx = spec.f_nc.zero ? 0.0 : spec.f_nc(tm, xm).dot(dx);
        double kin = 0;
        if (has_v) {
            Vec v0 = tr.Z.row(k).segment(ov, d).transpose(), v1 = tr.Z.row(k + 1).segment(ov, d).transpose();
            kin = m * (0.5 * (v0 + v1)).dot(v1 - v0);
        }
        const double fdx_acting = spec.fnc_acts ? fdx : 0.0;
        W += du_time + fdx;
        Q += kin + du_space - fdx_acting;
        R += -du_space + fdx_acting;
        if (d >= 2) A += (-0.5 * xm(1)) * dx(0) + (0.5 * xm(0)) * dx(1);
        L.W[k + 1] = W;
        L.Q[k + 1] = which.Q || which.S_env ? Q : 0.0;
        L.R[k + 1] = R;
        L.area[k + 1] = A;
        L.S_env[k + 1] = which.S_env ? -spec.beta * Q : 0.0;
        if (which.E) L.E[k + 1] = energy(k + 1);
        L.B[k + 1] = 0.5 * tr.eps * tr.fast_sq(k + 1);
    }
    if (!which.Q) std::fill(L.Q.begin(), L.Q.end(), 0.0);
    return L;
}

}  // namespace glehomog
