#include "glehomog/model.hpp"

#include <cmath>
#include <sstream>

#include "glehomog/errors.hpp"

namespace glehomog {

NoiseTriple make_triple(const Mat& Gamma, const Mat& C, const Mat& Sigma) {
    require_dims(Gamma.rows() == Gamma.cols() && C.cols() == Gamma.rows() && Sigma.rows() == Gamma.rows(),
                 "make_triple: inconsistent dimensions");
    NoiseTriple tr{Gamma, Mat(), C, Sigma};
    tr.M = solve_lyapunov(Gamma, Sigma * Sigma.transpose());
    tr.M = sym(tr.M);
    return tr;
}

NoiseTriple empty_triple(Eigen::Index out_dim) {
    return NoiseTriple{Mat(0, 0), Mat(0, 0), Mat(out_dim, 0), Mat(0, 0)};
}

void validate_triple(const NoiseTriple& tr, const std::string& name) {
    const auto n = tr.Gamma.rows();
    require_dims(tr.Gamma.cols() == n && tr.M.rows() == n && tr.M.cols() == n && tr.C.cols() == n &&
                     tr.Sigma.rows() == n,
                 name + ": triple dimensions disagree");
    if (n == 0) return;
    if (!is_positive_stable(tr.Gamma)) fail(ErrorKind::config, name + ": Gamma is not positive stable");
    if (!is_symmetric(tr.M)) fail(ErrorKind::config, name + ": M is not symmetric");
    Eigen::LLT<Mat> llt(tr.M);
    if (llt.info() != Eigen::Success) fail(ErrorKind::config, name + ": M is not positive definite");
    if (lyapunov_residual(tr.Gamma, tr.M, tr.Sigma * tr.Sigma.transpose()) > kResidualTol)
        fail(ErrorKind::config, name + ": Gamma M + M Gamma^T != Sigma Sigma^T");
}

Mat kernel_eval(const NoiseTriple& tr, double t) {
    if (tr.empty()) return Mat::Zero(tr.out_dim(), tr.out_dim());
    Mat E = expm(-tr.Gamma * std::abs(t));
    Mat k = tr.C * E * tr.M * tr.C.transpose();
    return t >= 0 ? k : Mat(k.transpose());
}

Mat k_matrix(const NoiseTriple& tr) {
    if (tr.empty()) return Mat::Zero(tr.out_dim(), tr.out_dim());
    return tr.C * tr.Gamma.partialPivLu().solve(tr.M) * tr.C.transpose();
}

NoiseTriple transform_triple(const NoiseTriple& tr, const Mat& T) {
    require_dims(T.rows() == tr.state_dim() && T.cols() == tr.state_dim(), "transform_triple: T shape mismatch");
    Eigen::FullPivLU<Mat> lu(T);
    if (!lu.isInvertible()) fail(ErrorKind::numerical, "transform_triple: T is singular");
    Mat Ti = lu.inverse();
    NoiseTriple out{T * tr.Gamma * Ti, T * tr.M * T.transpose(), tr.C * Ti, T * tr.Sigma};
    out.M = sym(out.M);
    return out;
}

double fd_step(double xk) { return 1e-5 * std::max(1.0, std::abs(xk)); }

Mat MatrixField::derivative(double t, const Vec& x, int k) const {
    if (constant) return Mat::Zero(rows, cols);
    if (jacobian) return jacobian(t, x, k);
    const double h = fd_step(x(k));
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    return (eval(t, xp) - eval(t, xm)) / (xp(k) - xm(k));
}

MatrixField MatrixField::constant_field(const Mat& A) {
    MatrixField f;
    f.rows = A.rows();
    f.cols = A.cols();
    f.eval = [A](double, const Vec&) { return A; };
    f.constant = true;
    f.diagonal = A.rows() == A.cols() && A.isDiagonal(0.0);
    return f;
}

MatrixField MatrixField::zero(Eigen::Index r, Eigen::Index c) { return constant_field(Mat::Zero(r, c)); }

Vec ScalarField::gradient(double t, const Vec& x) const {
    Vec gr = Vec::Zero(x.size());
    if (zero) return gr;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = fd_step(x(k));
        Vec xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        gr(k) = (eval(t, xp) - eval(t, xm)) / (xp(k) - xm(k));
    }
    return gr;
}

ScalarField ScalarField::zero_field() {
    ScalarField f;
    f.eval = [](double, const Vec&) { return 0.0; };
    f.zero = true;
    return f;
}

VectorField VectorField::zero_field(Eigen::Index d) {
    VectorField f;
    f.dim = d;
    f.eval = [d](double, const Vec&) { return Vec(Vec::Zero(d)); };
    f.zero = true;
    return f;
}

Vec GleSpec::force(double t, const Vec& x) const {
    Vec F = -potential.gradient(t, x);
    if (fnc_acts && !f_nc.zero) F += f_nc(t, x);
    return F;
}

std::vector<Vec> GleSpec::grid() const {
    std::vector<Vec> pts;
    const int n = std::max(1, grid_n);
    Vec lo = box_lo.size() == dim ? box_lo : Vec(Vec::Constant(dim, -1.0));
    Vec hi = box_hi.size() == dim ? box_hi : Vec(Vec::Constant(dim, 1.0));
    long total = 1;
    for (int k = 0; k < dim; ++k) total *= n;
    for (long idx = 0; idx < total; ++idx) {
        Vec p(dim);
        long r = idx;
        for (int k = 0; k < dim; ++k) {
            const int i = int(r % n);
            r /= n;
            p(k) = n == 1 ? 0.5 * (lo(k) + hi(k)) : lo(k) + (hi(k) - lo(k)) * i / (n - 1);
        }
        pts.push_back(p);
    }
    return pts;
}

bool GleSpec::has_white_noise() const {
    if (sigma0.cols == 0) return false;
    if (sigma0.constant) return sigma0(0.0, Vec::Zero(dim)).cwiseAbs().maxCoeff() > 0;
    for (const Vec& p : grid())
        if (sigma0(0.0, p).cwiseAbs().maxCoeff() > 0) return true;
    return false;
}

namespace {

void check_field(const MatrixField& f, Eigen::Index r, Eigen::Index c, const std::string& name) {
    require_dims(bool(f.eval), name + ": field has no evaluator");
    require_dims(f.rows == r && f.cols == c, name + ": expected " + std::to_string(r) + "x" + std::to_string(c) +
                                                 ", got " + std::to_string(f.rows) + "x" + std::to_string(f.cols));
}

}  // namespace

void validate_spec(const GleSpec& s) {
    const int d = s.dim;
    if (d < 1) fail(ErrorKind::config, "spec: dim must be positive");
    if (!(s.mass > 0)) fail(ErrorKind::config, "spec: mass must be positive");
    validate_triple(s.memory, "memory");
    validate_triple(s.fast_noise, "fast_noise");
    validate_triple(s.slow_noise, "slow_noise");
    check_field(s.gamma0, d, d, "gamma0");
    check_field(s.g, d, s.memory.out_dim(), "g");
    check_field(s.h, s.memory.out_dim(), d, "h");
    check_field(s.sigma_f, d, s.fast_noise.out_dim(), "sigma_f");
    check_field(s.sigma_s, d, s.slow_noise.out_dim(), "sigma_s");
    require_dims(s.sigma0.rows == d && bool(s.sigma0.eval), "sigma0: expected d rows");
    require_dims(s.f_nc.dim == d, "f_nc: expected dimension d");
    require_dims(s.x0.size() == d && s.v0.size() == d, "spec: x0 and v0 must have dimension d");
    if (!s.memory.empty()) {
        Eigen::FullPivLU<Mat> lu(k_matrix(s.memory));
        if (!lu.isInvertible()) fail(ErrorKind::config, "memory: K1 is singular");
    }
    if (!s.fast_noise.empty()) {
        Eigen::FullPivLU<Mat> lu(k_matrix(s.fast_noise));
        if (!lu.isInvertible()) fail(ErrorKind::config, "fast_noise: Kf is singular");
    }
}

FdrReport check_fdr(const GleSpec& s) {
    FdrReport rep;
    const double tol = 1e-9;
    std::ostringstream os;
    auto close = [&](const Mat& a, const Mat& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a - b).norm() <= tol * std::max(1.0, b.norm());
    };
    rep.fdr1 = true;
    for (const Vec& p : s.grid()) {
        Mat S0 = s.sigma0(0.0, p);
        if (!close(S0 * S0.transpose(), s.gamma0(0.0, p))) {
            rep.fdr1 = false;
            break;
        }
    }
    os << "fdr1 " << (rep.fdr1 ? "holds" : "fails") << " (sigma0 sigma0^T vs gamma0 on grid)";
    bool kernels = s.memory.out_dim() == s.fast_noise.out_dim() && !s.memory.empty() && !s.fast_noise.empty();
    if (kernels)
        for (int i = 0; i <= 20 && kernels; ++i) kernels = close(kernel_eval(s.memory, 0.25 * i), kernel_eval(s.fast_noise, 0.25 * i));
    bool coeffs = kernels;
    if (coeffs)
        for (const Vec& p : s.grid()) {
            Mat G = s.g(0.0, p);
            if (!close(G, s.h(0.0, p).transpose()) || !close(G, s.sigma_f(0.0, p))) {
                coeffs = false;
                break;
            }
        }
    rep.fdr2 = kernels && coeffs;
    os << "; fdr2 " << (rep.fdr2 ? "holds" : "fails") << " (kernels " << (kernels ? "match" : "differ")
       << ", g = h^T = sigma_f " << (coeffs ? "holds" : "fails") << ")";
    rep.details = os.str();
    return rep;
}

std::string to_string(Procedure p) {
    switch (p) {
        case Procedure::none: return "none";
        case Procedure::markov: return "markov";
        case Procedure::markov_then_mass: return "markov_then_mass";
        case Procedure::mass: return "mass";
        case Procedure::mass_then_markov: return "mass_then_markov";
        case Procedure::joint: return "joint";
    }
    return "none";
}

Procedure procedure_from_string(const std::string& s) {
    for (Procedure p : {Procedure::none, Procedure::markov, Procedure::markov_then_mass, Procedure::mass,
                        Procedure::mass_then_markov, Procedure::joint})
        if (to_string(p) == s) return p;
    fail(ErrorKind::config, "unknown procedure '" + s + "'");
}

std::string to_string(BlockKind k) {
    switch (k) {
        case BlockKind::x: return "x";
        case BlockKind::v: return "v";
        case BlockKind::y: return "y";
        case BlockKind::beta_f: return "beta_f";
        case BlockKind::beta_s: return "beta_s";
    }
    return "x";
}

const BlockInfo* EmbeddedSystem::find(BlockKind k) const {
    for (const auto& b : blocks)
        if (b.kind == k) return &b;
    return nullptr;
}

Eigen::Index EmbeddedSystem::z_offset(BlockKind k) const {
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        if (b.kind == k) return off;
        off += b.dim;
    }
    return -1;
}

Vec EmbeddedSystem::assemble(const Vec& X, const Vec& Y) const {
    Vec z(z_dim());
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        z.segment(off, b.dim) = b.fast ? Y.segment(b.offset, b.dim) : X.segment(b.offset, b.dim);
        off += b.dim;
    }
    return z;
}

void EmbeddedSystem::split(const Vec& z, Vec& X, Vec& Y) const {
    X.resize(nX);
    Y.resize(nY);
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        if (b.fast)
            Y.segment(b.offset, b.dim) = z.segment(off, b.dim);
        else
            X.segment(b.offset, b.dim) = z.segment(off, b.dim);
        off += b.dim;
    }
}

void EmbeddedSystem::initial_state(const InitNormals& xi, Vec& X, Vec& Y) const {
    X = Vec::Zero(nX);
    Y = Vec::Zero(nY);
    for (const auto& b : blocks) {
        Vec val;
        switch (b.kind) {
            case BlockKind::x: val = x0; break;
            case BlockKind::v: val = v0; break;
            case BlockKind::y: val = Vec::Zero(b.dim); break;
            case BlockKind::beta_f: val = chol_beta_f * xi.beta_f; break;
            case BlockKind::beta_s: val = chol_beta_s * xi.beta_s; break;
        }
        (b.fast ? Y : X).segment(b.offset, b.dim) = val;
    }
}

Vec EmbeddedSystem::drift(double t, const Vec& z) const {
    Vec X, Y;
    split(z, X, Y);
    Coefficients c;
    coeffs(t, X, c);
    Vec dX = c.u1;
    if (nY > 0) dX += c.U1 * Y;
    Vec dY = nY > 0 ? Vec((-c.U2 * Y + c.u2) / eps) : Vec(0);
    return assemble(dX, dY);
}

Mat EmbeddedSystem::diffusion(double t, const Vec& z) const {
    Vec X, Y;
    split(z, X, Y);
    Coefficients c;
    coeffs(t, X, c);
    Mat out(z_dim(), noise.total());
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        if (b.fast)
            out.middleRows(off, b.dim) = c.sigma.middleRows(b.offset, b.dim) / eps;
        else
            out.middleRows(off, b.dim) = c.sigma_tilde.middleRows(b.offset, b.dim);
        off += b.dim;
    }
    return out;
}

namespace {

struct Dims {
    Eigen::Index d, d1, q1, df, qfo, ds, qso, d0, wf, ws;
};

Dims dims_of(const GleSpec& s) {
    return Dims{s.dim,
                s.memory.state_dim(),
                s.memory.out_dim(),
                s.fast_noise.state_dim(),
                s.fast_noise.out_dim(),
                s.slow_noise.state_dim(),
                s.slow_noise.out_dim(),
                s.sigma0.cols,
                s.fast_noise.noise_dim(),
                s.slow_noise.noise_dim()};
}

void check_gamma0_stable(const GleSpec& s) {
    for (const Vec& p : s.grid())
        if (!is_positive_stable(s.gamma0(0.0, p)))
            fail(ErrorKind::numerical, "gamma0 is not positive stable on the sampled grid");
}

Mat chol_or_zero(const Mat& M, double scale) {
    if (M.rows() == 0) return Mat(0, 0);
    Eigen::LLT<Mat> llt(M * scale);
    if (llt.info() != Eigen::Success) fail(ErrorKind::config, "stationary covariance is not positive definite");
    return llt.matrixL();
}

}  // namespace

EmbeddedSystem embed(const GleSpec& spec, Procedure procedure, double eps) {
    validate_spec(spec);
    if (!(eps > 0)) fail(ErrorKind::config, "embed: eps must be positive");
    if (procedure == Procedure::none) eps = 1.0;
    const Dims D = dims_of(spec);
    EmbeddedSystem sys;
    sys.procedure = procedure;
    sys.eps = eps;
    sys.mass = spec.mass;
    sys.noise = NoiseLayout{D.d0, D.wf, D.ws};
    sys.x0 = spec.x0;
    sys.v0 = spec.v0;
    const bool white = spec.has_white_noise();
    const double m0 = spec.mass;
    const auto d = D.d;
    GleSpec S = spec;

    auto add = [&](BlockKind k, Eigen::Index dim, bool fast) {
        Eigen::Index& n = fast ? sys.nY : sys.nX;
        sys.blocks.push_back(BlockInfo{k, dim, fast, n});
        n += dim;
    };

    switch (procedure) {
        case Procedure::none:
        case Procedure::markov: {
            add(BlockKind::x, d, false);
            add(BlockKind::v, d, false);
            add(BlockKind::y, D.d1, true);
            add(BlockKind::beta_f, D.df, true);
            add(BlockKind::beta_s, D.ds, false);
            sys.chol_beta_f = chol_or_zero(spec.fast_noise.M, 1.0 / eps);
            sys.fast_constant = true;
            sys.coeffs = [S, D](double t, const Vec& X, Coefficients& c) {
                const auto d = D.d;
                const double m = S.mass;
                Vec x = X.head(d), v = X.segment(d, d), bs = X.tail(D.ds);
                c.u1.setZero(X.size());
                c.U1.setZero(X.size(), D.d1 + D.df);
                c.sigma_tilde.setZero(X.size(), D.d0 + D.wf + D.ws);
                c.u1.head(d) = v;
                Vec rhs = S.force(t, x) - S.gamma0(t, x) * v;
                if (D.ds > 0) {
                    rhs += S.sigma_s(t, x) * S.slow_noise.C * bs;
                    c.u1.tail(D.ds) = -S.slow_noise.Gamma * bs;
                    c.sigma_tilde.bottomRightCorner(D.ds, D.ws) = S.slow_noise.Sigma;
                }
                c.u1.segment(d, d) = rhs / m;
                if (D.d1 > 0) c.U1.block(d, 0, d, D.d1) = -S.g(t, x) * S.memory.C / m;
                if (D.df > 0) c.U1.block(d, D.d1, d, D.df) = S.sigma_f(t, x) * S.fast_noise.C / m;
                if (D.d0 > 0) c.sigma_tilde.block(d, 0, d, D.d0) = S.sigma0(t, x) / m;
                c.U2.setZero(D.d1 + D.df, D.d1 + D.df);
                c.u2.setZero(D.d1 + D.df);
                c.sigma.setZero(D.d1 + D.df, D.d0 + D.wf + D.ws);
                if (D.d1 > 0) {
                    c.U2.topLeftCorner(D.d1, D.d1) = S.memory.Gamma;
                    c.u2.head(D.d1) = S.memory.M * S.memory.C.transpose() * S.h(t, x) * v;
                }
                if (D.df > 0) {
                    c.U2.bottomRightCorner(D.df, D.df) = S.fast_noise.Gamma;
                    c.sigma.block(D.d1, D.d0, D.df, D.wf) = S.fast_noise.Sigma;
                }
            };
            break;
        }
        case Procedure::mass: {
            check_gamma0_stable(spec);
            sys.mass = m0 * eps;
            add(BlockKind::x, d, false);
            add(BlockKind::v, d, true);
            add(BlockKind::y, D.d1, false);
            add(BlockKind::beta_f, D.df, false);
            add(BlockKind::beta_s, D.ds, false);
            sys.chol_beta_f = chol_or_zero(spec.fast_noise.M, 1.0);
            sys.fast_constant = spec.gamma0.constant && spec.sigma0.constant;
            sys.coeffs = [S, D](double t, const Vec& X, Coefficients& c) {
                const auto d = D.d;
                const double m0 = S.mass;
                const Eigen::Index oy = d, of = d + D.d1, os = d + D.d1 + D.df;
                Vec x = X.head(d), y = X.segment(oy, D.d1), bf = X.segment(of, D.df), bs = X.segment(os, D.ds);
                c.U1.setZero(X.size(), d);
                c.u1.setZero(X.size());
                c.sigma_tilde.setZero(X.size(), D.d0 + D.wf + D.ws);
                c.U1.topRows(d).setIdentity();
                Vec rhs = S.force(t, x);
                if (D.d1 > 0) {
                    c.U1.middleRows(oy, D.d1) = S.memory.M * S.memory.C.transpose() * S.h(t, x);
                    c.u1.segment(oy, D.d1) = -S.memory.Gamma * y;
                    rhs -= S.g(t, x) * S.memory.C * y;
                }
                if (D.df > 0) {
                    c.u1.segment(of, D.df) = -S.fast_noise.Gamma * bf;
                    c.sigma_tilde.block(of, D.d0, D.df, D.wf) = S.fast_noise.Sigma;
                    rhs += S.sigma_f(t, x) * S.fast_noise.C * bf;
                }
                if (D.ds > 0) {
                    c.u1.segment(os, D.ds) = -S.slow_noise.Gamma * bs;
                    c.sigma_tilde.block(os, D.d0 + D.wf, D.ds, D.ws) = S.slow_noise.Sigma;
                    rhs += S.sigma_s(t, x) * S.slow_noise.C * bs;
                }
                c.U2 = S.gamma0(t, x) / m0;
                c.u2 = rhs / m0;
                c.sigma.setZero(d, D.d0 + D.wf + D.ws);
                if (D.d0 > 0) c.sigma.leftCols(D.d0) = S.sigma0(t, x) / m0;
            };
            break;
        }
        case Procedure::joint: {
            sys.mass = m0 * eps;
            add(BlockKind::x, d, false);
            add(BlockKind::v, d, true);
            add(BlockKind::y, D.d1, true);
            add(BlockKind::beta_f, D.df, true);
            add(BlockKind::beta_s, D.ds, false);
            sys.chol_beta_f = chol_or_zero(spec.fast_noise.M, 1.0 / eps);
            sys.fast_constant = spec.gamma0.constant && spec.g.constant && spec.h.constant && spec.sigma_f.constant &&
                                spec.sigma0.constant;
            sys.coeffs = [S, D](double t, const Vec& X, Coefficients& c) {
                const auto d = D.d;
                const double m0 = S.mass;
                Vec x = X.head(d), bs = X.tail(D.ds);
                const Eigen::Index nY = d + D.d1 + D.df, nW = D.d0 + D.wf + D.ws;
                c.U1.setZero(X.size(), nY);
                c.U1.topLeftCorner(d, d).setIdentity();
                c.u1.setZero(X.size());
                c.sigma_tilde.setZero(X.size(), nW);
                Vec rhs = S.force(t, x);
                if (D.ds > 0) {
                    rhs += S.sigma_s(t, x) * S.slow_noise.C * bs;
                    c.u1.tail(D.ds) = -S.slow_noise.Gamma * bs;
                    c.sigma_tilde.bottomRightCorner(D.ds, D.ws) = S.slow_noise.Sigma;
                }
                CoupledFiveInput in{S.gamma0(t, x), S.g(t, x), S.h(t, x), S.sigma_f(t, x),
                                    S.memory.Gamma, S.memory.M, S.memory.C,
                                    S.fast_noise.Gamma, S.fast_noise.M, S.fast_noise.C, m0};
                c.U2 = joint_fast_generator(in);
                c.u2.setZero(nY);
                c.u2.head(d) = rhs / m0;
                c.sigma.setZero(nY, nW);
                if (D.d0 > 0) c.sigma.topLeftCorner(d, D.d0) = S.sigma0(t, x) / m0;
                if (D.df > 0) c.sigma.block(d + D.d1, D.d0, D.df, D.wf) = S.fast_noise.Sigma;
            };
            break;
        }
        case Procedure::markov_then_mass: {
            if (white) fail(ErrorKind::config, "markov_then_mass: sigma0 must vanish");
            sys.mass = m0 * eps;
            add(BlockKind::x, d, false);
            add(BlockKind::v, d, true);
            add(BlockKind::beta_s, D.ds, false);
            sys.fast_constant = spec.gamma0.constant && spec.g.constant && spec.h.constant && spec.sigma_f.constant;
            const Mat K1 = k_matrix(spec.memory);
            const Mat Sig = D.df > 0 ? Mat(spec.fast_noise.C * spec.fast_noise.Gamma.partialPivLu().solve(spec.fast_noise.Sigma))
                                     : Mat(Mat::Zero(D.qfo, D.wf));
            sys.coeffs = [S, D, K1, Sig](double t, const Vec& X, Coefficients& c) {
                const auto d = D.d;
                const double m0 = S.mass;
                Vec x = X.head(d), bs = X.tail(D.ds);
                const Eigen::Index nW = D.d0 + D.wf + D.ws;
                c.U1.setZero(X.size(), d);
                c.U1.topRows(d).setIdentity();
                c.u1.setZero(X.size());
                c.sigma_tilde.setZero(X.size(), nW);
                Vec rhs = S.force(t, x);
                if (D.ds > 0) {
                    rhs += S.sigma_s(t, x) * S.slow_noise.C * bs;
                    c.u1.tail(D.ds) = -S.slow_noise.Gamma * bs;
                    c.sigma_tilde.bottomRightCorner(D.ds, D.ws) = S.slow_noise.Sigma;
                }
                Mat Gam = S.gamma0(t, x);
                if (D.d1 > 0) Gam += S.g(t, x) * K1 * S.h(t, x);
                c.U2 = Gam / m0;
                c.u2 = rhs / m0;
                c.sigma.setZero(d, nW);
                if (D.df > 0) c.sigma.block(0, D.d0, d, D.wf) = S.sigma_f(t, x) * Sig / m0;
            };
            break;
        }
        case Procedure::mass_then_markov: {
            if (white) fail(ErrorKind::config, "mass_then_markov: sigma0 must vanish");
            check_gamma0_stable(spec);
            add(BlockKind::x, d, false);
            add(BlockKind::y, D.d1, true);
            add(BlockKind::beta_f, D.df, true);
            add(BlockKind::beta_s, D.ds, false);
            sys.chol_beta_f = chol_or_zero(spec.fast_noise.M, 1.0 / eps);
            sys.fast_constant = spec.gamma0.constant && spec.g.constant && spec.h.constant && spec.sigma_f.constant;
            sys.coeffs = [S, D](double t, const Vec& X, Coefficients& c) {
                const auto d = D.d;
                Vec x = X.head(d), bs = X.tail(D.ds);
                const Eigen::Index nY = D.d1 + D.df, nW = D.d0 + D.wf + D.ws;
                auto lu = S.gamma0(t, x).partialPivLu();
                Vec rhs = S.force(t, x);
                c.u1.setZero(X.size());
                c.sigma_tilde.setZero(X.size(), nW);
                if (D.ds > 0) {
                    rhs += S.sigma_s(t, x) * S.slow_noise.C * bs;
                    c.u1.tail(D.ds) = -S.slow_noise.Gamma * bs;
                    c.sigma_tilde.bottomRightCorner(D.ds, D.ws) = S.slow_noise.Sigma;
                }
                Vec g0F = lu.solve(rhs);
                c.u1.head(d) = g0F;
                c.U1.setZero(X.size(), nY);
                c.U2.setZero(nY, nY);
                c.u2.setZero(nY);
                c.sigma.setZero(nY, nW);
                Mat MCh;
                if (D.d1 > 0) {
                    MCh = S.memory.M * S.memory.C.transpose() * S.h(t, x);
                    Mat gC1 = S.g(t, x) * S.memory.C;
                    c.U1.block(0, 0, d, D.d1) = -lu.solve(gC1);
                    c.U2.topLeftCorner(D.d1, D.d1) = S.memory.Gamma + MCh * lu.solve(gC1);
                    c.u2.head(D.d1) = MCh * g0F;
                }
                if (D.df > 0) {
                    Mat sfCf = S.sigma_f(t, x) * S.fast_noise.C;
                    c.U1.block(0, D.d1, d, D.df) = lu.solve(sfCf);
                    if (D.d1 > 0) c.U2.topRightCorner(D.d1, D.df) = -MCh * lu.solve(sfCf);
                    c.U2.bottomRightCorner(D.df, D.df) = S.fast_noise.Gamma;
                    c.sigma.block(D.d1, D.d0, D.df, D.wf) = S.fast_noise.Sigma;
                }
            };
            break;
        }
    }
    sys.chol_beta_s = chol_or_zero(spec.slow_noise.M, 1.0);
    if (sys.chol_beta_f.size() == 0 && D.df > 0) sys.chol_beta_f = chol_or_zero(spec.fast_noise.M, 1.0);
    if (D.df == 0) sys.chol_beta_f = Mat(0, 0);
    return sys;
}

double ScenarioParams::get(const std::string& key, double fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

}  // namespace glehomog
