#include "glehomog/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "glehomog/errors.hpp"

namespace glehomog {

KeyedRng::KeyedRng(std::uint64_t seed, std::uint64_t path, std::uint64_t block) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(path), std::uint32_t(path >> 32),
                      std::uint32_t(block), std::uint32_t(block >> 32)};
    engine_.seed(seq);
}

namespace {

std::uint64_t coord_block(int source, int j, int level) {
    return (std::uint64_t(level) << 16) | (std::uint64_t(source) << 10) | std::uint64_t(j);
}

std::vector<std::uint64_t> column_blocks(const std::vector<int>& source_dims, int level) {
    std::vector<std::uint64_t> out;
    for (int s = 0; s < int(source_dims.size()); ++s)
        for (int j = 0; j < source_dims[s]; ++j) out.push_back(coord_block(s, j, level));
    return out;
}

}  // namespace

WienerPath generate_path(std::uint64_t seed, std::uint64_t path, const std::vector<int>& source_dims, double T,
                         int base_steps, int levels) {
    if (!(T > 0) || base_steps < 1 || levels < 0) fail(ErrorKind::config, "generate_path: invalid grid");
    WienerPath p;
    p.seed = seed;
    p.path = path;
    p.source_dims = source_dims;
    p.T = T;
    p.base_steps = base_steps;
    const auto blocks = column_blocks(source_dims, 0);
    p.inc.resize(base_steps, Eigen::Index(blocks.size()));
    const double sq = std::sqrt(T / base_steps);
    for (Eigen::Index c = 0; c < p.inc.cols(); ++c) {
        KeyedRng rng(seed, path, blocks[c]);
        for (int i = 0; i < base_steps; ++i) p.inc(i, c) = sq * rng.normal();
    }
    for (int l = 0; l < levels; ++l) p = refine(p);
    return p;
}

WienerPath refine(const WienerPath& p) {
    WienerPath out = p;
    out.level = p.level + 1;
    out.inc.resize(2 * p.steps(), p.dims());
    const double half = std::sqrt(p.dt() / 4.0);
    const auto blocks = column_blocks(p.source_dims, out.level);
    for (int c = 0; c < p.dims(); ++c) {
        KeyedRng rng(p.seed, p.path, blocks[c]);
        for (int i = 0; i < p.steps(); ++i) {
            const double dw = p.inc(i, c);
            const double left = 0.5 * dw + half * rng.normal();
            out.inc(2 * i, c) = left;
            out.inc(2 * i + 1, c) = dw - left;
        }
    }
    return out;
}

WienerPath coarsen(const WienerPath& p) {
    if (p.level == 0) fail(ErrorKind::config, "coarsen: path is already at base level");
    WienerPath out = p;
    out.level = p.level - 1;
    out.inc.resize(p.steps() / 2, p.dims());
    for (int i = 0; i < out.steps(); ++i) out.inc.row(i) = p.inc.row(2 * i) + p.inc.row(2 * i + 1);
    return out;
}

InitNormals draw_init(std::uint64_t seed, std::uint64_t path, Eigen::Index df, Eigen::Index ds) {
    InitNormals xi;
    KeyedRng rf(seed, path, kInitBlock), rs(seed, path, kInitBlock + 1);
    xi.beta_f.resize(df);
    xi.beta_s.resize(ds);
    for (Eigen::Index i = 0; i < df; ++i) xi.beta_f(i) = rf.normal();
    for (Eigen::Index i = 0; i < ds; ++i) xi.beta_s(i) = rs.normal();
    return xi;
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::euler_maruyama: return "euler_maruyama";
        case Scheme::exp_ou_splitting: return "exp_ou_splitting";
        case Scheme::automatic: return "auto";
    }
    return "auto";
}

Scheme scheme_from_string(const std::string& s) {
    for (Scheme x : {Scheme::euler_maruyama, Scheme::exp_ou_splitting, Scheme::automatic})
        if (to_string(x) == s) return x;
    fail(ErrorKind::config, "unknown scheme '" + s + "'");
}

Scheme resolve_scheme(Scheme s, double eps) {
    if (s != Scheme::automatic) return s;
    return eps < 1e-2 ? Scheme::exp_ou_splitting : Scheme::euler_maruyama;
}

double default_dt(Scheme s, double eps) {
    return resolve_scheme(s, eps) == Scheme::euler_maruyama ? std::min(1e-3, eps / 20.0) : 1e-3;
}

const BlockInfo* Trajectory::find(BlockKind k) const {
    for (const auto& b : blocks)
        if (b.kind == k) return &b;
    return nullptr;
}

Eigen::Index Trajectory::z_offset(BlockKind k) const {
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        if (b.kind == k) return off;
        off += b.dim;
    }
    return -1;
}

Vec Trajectory::block(Eigen::Index row, BlockKind k) const {
    const BlockInfo* b = find(k);
    if (!b) return Vec(0);
    return Z.row(row).segment(z_offset(k), b->dim).transpose();
}

double Trajectory::fast_sq(Eigen::Index row) const {
    double s = 0.0;
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        if (b.fast) s += Z.row(row).segment(off, b.dim).squaredNorm();
        off += b.dim;
    }
    return s;
}

namespace {

// Exact transition of the frozen linear fast block augmented with its time integral.
struct OuTransition {
    Mat Phi;     // 2n x 2n acting on (Y, I)
    Mat psi;     // 2n x n, multiplies u2
    Mat K;       // 2n x nW, E[N dW^T] / h
    Mat R;       // 2n x 2n, conditional noise factor
};

OuTransition ou_transition(const Mat& A, const Mat& S, double h) {
    const Eigen::Index n = A.rows(), nW = S.cols();
    Mat G = Mat::Zero(2 * n, 2 * n);
    G.topLeftCorner(n, n) = -A;
    G.bottomLeftCorner(n, n).setIdentity();
    Mat Bin = Mat::Zero(2 * n, nW + n);
    Bin.topLeftCorner(n, nW) = S;
    Bin.topRightCorner(n, n).setIdentity();

    int k = 0;
    const double gn = std::max(G.lpNorm<Eigen::Infinity>(), 1e-300);
    while (gn * h / std::ldexp(1.0, k) > 0.5 && k < 60) ++k;
    const double delta = h / std::ldexp(1.0, k);

    const Eigen::Index m = 2 * n;
    Mat V = Mat::Zero(2 * m, 2 * m);
    V.topLeftCorner(m, m) = -G;
    V.topRightCorner(m, m) = Bin.leftCols(nW) * Bin.leftCols(nW).transpose();
    V.bottomRightCorner(m, m) = G.transpose();
    Mat EV = expm(V * delta);
    Mat Phi = EV.bottomRightCorner(m, m).transpose();
    Mat Cov = Phi * EV.topRightCorner(m, m);

    Mat W = Mat::Zero(m + nW + n, m + nW + n);
    W.topLeftCorner(m, m) = G;
    W.topRightCorner(m, nW + n) = Bin;
    Mat KB = expm(W * delta).topRightCorner(m, nW + n);

    for (int i = 0; i < k; ++i) {
        Cov = Phi * Cov * Phi.transpose() + Cov;
        KB = Phi * KB + KB;
        Phi = Phi * Phi;
    }
    OuTransition tr;
    tr.Phi = Phi;
    tr.psi = KB.rightCols(n);
    tr.K = KB.leftCols(nW) / h;
    Mat C = Cov - tr.K * KB.leftCols(nW).transpose();
    C = sym(C);
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    tr.R = es.eigenvectors() * ev.asDiagonal();
    return tr;
}

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Trajectory simulate(const EmbeddedSystem& sys, const WienerPath& path, const InitNormals& init, const SimOptions& opt) {
    require_dims(path.dims() == sys.noise.total(), "simulate: path dimension does not match the noise layout");
    const Scheme scheme = sys.nY == 0 ? Scheme::euler_maruyama : resolve_scheme(opt.scheme, sys.eps);
    const double dt = opt.dt > 0 ? opt.dt : default_dt(scheme, sys.eps);
    const double pdt = path.dt();
    const long r = std::lround(dt / pdt);
    if (r < 1 || std::abs(r * pdt - dt) > 1e-9 * dt || path.steps() % r != 0)
        fail(ErrorKind::config, "simulate: dt is not commensurate with the path grid");
    const long N = path.steps() / r;
    const double h = path.T / N;
    int stride = opt.stride;
    if (stride <= 0) stride = path.T <= 10.0 ? 1 : int(std::max<long>(1, (N + 999999) / 1000000));

    Vec X, Y;
    sys.initial_state(init, X, Y);
    Trajectory tr;
    tr.blocks = sys.blocks;
    tr.eps = sys.eps;
    tr.mass = sys.mass;
    const long records = N / stride + 1 + (N % stride ? 1 : 0);
    tr.Z.resize(records, sys.z_dim());
    tr.t.reserve(records);
    long rec = 0;
    auto record = [&](double t) {
        tr.t.push_back(t);
        tr.Z.row(rec++) = sys.assemble(X, Y).transpose();
    };
    record(0.0);

    Coefficients c;
    Vec dW(path.dims());
    const bool use_ou = scheme == Scheme::exp_ou_splitting && sys.nY > 0;
    OuTransition ou;
    bool ou_ready = false;
    std::unique_ptr<KeyedRng> aux;
    Vec xi(2 * sys.nY), w(2 * sys.nY);
    if (use_ou) aux = std::make_unique<KeyedRng>(path.seed, path.path, kAuxBlock);

    for (long k = 0; k < N; ++k) {
        const double t = k * h;
        dW = path.inc.middleRows(k * r, r).colwise().sum().transpose();
        sys.coeffs(t, X, c);
        if (!use_ou) {
            Vec dX = c.u1 * h + c.sigma_tilde * dW;
            if (sys.nY > 0) {
                dX += c.U1 * Y * h;
                Y += ((-c.U2 * Y + c.u2) * h + c.sigma * dW) / sys.eps;
            }
            X += dX;
        } else {
            if (!ou_ready || !sys.fast_constant) {
                ou = ou_transition(c.U2 / sys.eps, c.sigma / sys.eps, h);
                ou_ready = true;
            }
            for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = aux->normal();
            w.head(sys.nY) = Y;
            w.tail(sys.nY).setZero();
            w = ou.Phi * w + ou.psi * (c.u2 / sys.eps) + ou.K * dW + ou.R * xi;
            X += c.U1 * w.tail(sys.nY) + c.u1 * h + c.sigma_tilde * dW;
            Y = w.head(sys.nY);
        }
        if (!finite(X) || !finite(Y)) {
            std::ostringstream os;
            os << "simulate: non-finite state at step " << k + 1;
            fail(ErrorKind::numerical, os.str());
        }
        if ((k + 1) % stride == 0 || k + 1 == N) record((k + 1) * h);
    }
    tr.Z.conservativeResize(rec, Eigen::NoChange);
    return tr;
}

Vec stratonovich_integral(const MatrixField& p, const Trajectory& tr) {
    const Eigen::Index ox = tr.z_offset(BlockKind::x);
    const Eigen::Index d = tr.find(BlockKind::x)->dim;
    Vec acc = Vec::Zero(p.rows);
    for (size_t k = 0; k + 1 < tr.t.size(); ++k) {
        Vec x0 = tr.Z.row(k).segment(ox, d).transpose(), x1 = tr.Z.row(k + 1).segment(ox, d).transpose();
        Vec xm = 0.5 * (x0 + x1);
        acc += p(0.5 * (tr.t[k] + tr.t[k + 1]), xm) * (x1 - x0);
    }
    return acc;
}

double sup_distance(const Trajectory& a, const Trajectory& b, BlockKind block) {
    if (a.t.size() != b.t.size()) fail(ErrorKind::dimension, "sup_distance: grid mismatch");
    for (size_t k = 0; k < a.t.size(); ++k)
        if (std::abs(a.t[k] - b.t[k]) > 1e-12 * std::max(1.0, std::abs(a.t[k])))
            fail(ErrorKind::dimension, "sup_distance: grid mismatch");
    const BlockInfo* ba = a.find(block);
    const BlockInfo* bb = b.find(block);
    if (!ba || !bb || ba->dim != bb->dim) fail(ErrorKind::dimension, "sup_distance: block missing or mismatched");
    const Eigen::Index oa = a.z_offset(block), ob = b.z_offset(block);
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.Z.rows(); ++k)
        s = std::max(s, (a.Z.row(k).segment(oa, ba->dim) - b.Z.row(k).segment(ob, bb->dim)).norm());
    return s;
}

int worker_count() {
    int n = int(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("GLEHOMOG_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(worker_count(), std::max(1, n));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace glehomog
