"""Gaussian-restricted extremal problem.

Maximizes ``1/2 log|K + K_Z1| - mu/2 log|K + K_Z2|`` (plus ``(2 pi e)^n``
constants) over ``0 <= K <= S``.  The problem is nonconvex, so the solver
runs a log-barrier path from several starts and then polishes every distinct
end point by solving the KKT system on its active set.  A point is returned
as *certified* when the stationarity and complementary-slackness residuals
are below ``SolverConfig.kkt_tol``.

All computation happens in whitened coordinates ``W = S^{-1/2} K S^{-1/2}``
where the constraint becomes ``0 <= W <= I``; the null spaces of ``W`` and
``I - W`` are then orthogonal, which is what makes projection-based
multiplier recovery exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy import optimize

from . import matrix as mx
from .config import resolve_workers
from .errors import PreconditionError, SingularMatrixError
from .instance import ExtremalInstance
from .matrix import LOG_2PIE, sym


@dataclass(frozen=True)
class SolverConfig:
    kkt_tol: float = 1e-8
    feas_tol: float = 1e-9
    max_restarts: int = 8
    beta_start: float = 1e-2
    beta_stop: float = 1e-10
    beta_factor: float = 0.2
    newton_max_iter: int = 80
    multiplier_tol: float = 1e-8
    seed: int = 0
    parallelism: int | str = 1


@dataclass(frozen=True)
class LogdetTerm:
    """Objective piece ``coef/2 * logdet(L^T K L + noise)``; ``lift=None`` means ``L = I``."""

    coef: float
    noise: np.ndarray
    lift: np.ndarray | None = None

    def matrix(self, k: np.ndarray) -> np.ndarray:
        if self.lift is None:
            return k + self.noise
        return self.lift.T @ k @ self.lift + self.noise


@dataclass(frozen=True, eq=False)
class KktSolution:
    kx: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    stationarity_residual: float
    slack1: float
    slack2: float
    objective: float
    certified: bool = True
    restarts: int = 0
    distinct_points: tuple = ()

    @property
    def residual(self) -> float:
        return max(self.stationarity_residual, self.slack1, self.slack2)

    def to_json(self, units: str = "nats") -> dict:
        scale = 1.0 if units == "nats" else 1.0 / math.log(2.0)
        return {
            "kx": mx.to_json(self.kx),
            "m1": mx.to_json(self.m1),
            "m2": mx.to_json(self.m2),
            f"objective_{units}": self.objective * scale,
            "residuals": {
                "stationarity": self.stationarity_residual,
                "slack1": self.slack1,
                "slack2": self.slack2,
            },
            "certified": self.certified,
            "restarts": self.restarts,
            "distinct_kkt_points": [mx.to_json(p) for p in self.distinct_points],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KktSolution":
        res = obj.get("residuals", {})
        objective = obj.get("objective_nats")
        if objective is None and "objective_bits" in obj:
            objective = obj["objective_bits"] * math.log(2.0)
        return cls(
            kx=mx.from_json(obj["kx"]),
            m1=mx.from_json(obj["m1"]),
            m2=mx.from_json(obj["m2"]),
            stationarity_residual=float(res.get("stationarity", math.nan)),
            slack1=float(res.get("slack1", math.nan)),
            slack2=float(res.get("slack2", math.nan)),
            objective=float(objective) if objective is not None else math.nan,
            certified=bool(obj.get("certified", True)),
        )


# --------------------------------------------------------------------------
# objective pieces


def gaussian_objective(kx: Any, inst: ExtremalInstance) -> float:
    """``h(X+Z1) - mu h(X+Z2)`` in nats for Gaussian ``X`` with covariance ``kx``."""
    kx = sym(kx)
    n = inst.dim
    h1 = 0.5 * (n * LOG_2PIE + mx.logdet(kx + inst.kz1))
    h2 = 0.5 * (n * LOG_2PIE + mx.logdet(kx + inst.kz2))
    return h1 - inst.mu * h2


def gaussian_gradient(kx: Any, inst: ExtremalInstance) -> np.ndarray:
    """Matrix gradient ``1/2 (K+K_Z1)^-1 - mu/2 (K+K_Z2)^-1``."""
    kx = sym(kx)
    return sym(0.5 * mx.inv_pd(kx + inst.kz1) - 0.5 * inst.mu * mx.inv_pd(kx + inst.kz2))


def instance_terms(inst: ExtremalInstance) -> list[LogdetTerm]:
    return [LogdetTerm(1.0, inst.kz1), LogdetTerm(-inst.mu, inst.kz2)]


def terms_value(terms: Sequence[LogdetTerm], k: np.ndarray) -> float:
    return sum(0.5 * t.coef * mx.logdet(t.matrix(k)) for t in terms)


def terms_gradient(terms: Sequence[LogdetTerm], k: np.ndarray) -> np.ndarray:
    g = np.zeros_like(k)
    for t in terms:
        b = mx.inv_pd(t.matrix(k))
        g += 0.5 * t.coef * (b if t.lift is None else t.lift @ b @ t.lift.T)
    return sym(g)


def terms_residuals(terms, k, m1, m2, s) -> tuple[float, float, float]:
    """Stationarity defect and the two complementary-slackness norms."""
    g = terms_gradient(terms, k)
    stat = float(np.linalg.norm(g + m1 - m2))
    return stat, float(np.linalg.norm(m1 @ k)), float(np.linalg.norm(m2 @ (s - k)))


def project_feasible(k: Any, s: Any) -> np.ndarray:
    """Project onto ``0 <= K <= S`` by clipping the eigenvalues of ``S^-1/2 K S^-1/2``."""
    k, s = sym(k), sym(s)
    r, ri = mx.sqrtm_psd(s), mx.inv_sqrtm_pd(s)
    w, v = np.linalg.eigh(sym(ri @ k @ ri))
    wc = (v * np.clip(w, 0.0, 1.0)) @ v.T
    return sym(r @ wc @ r)


# --------------------------------------------------------------------------
# whitened problem


def _sym_basis(n: int) -> np.ndarray:
    """Columns are vec() of an orthonormal basis of symmetric n x n matrices."""
    cols = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            cols.append(e.ravel())
    return np.array(cols).T


class _Whitened:
    def __init__(self, terms: Sequence[LogdetTerm], s: np.ndarray):
        self.n = s.shape[0]
        self.r = mx.sqrtm_psd(s)
        self.ri = mx.inv_sqrtm_pd(s)
        self.terms = []
        for t in terms:
            lift = self.r if t.lift is None else self.r @ t.lift
            self.terms.append((0.5 * t.coef, lift, sym(t.noise)))
        self.basis = _sym_basis(self.n)
        self.eye = np.eye(self.n)

    def to_w(self, k):
        return sym(self.ri @ k @ self.ri)

    def to_k(self, w):
        return sym(self.r @ w @ self.r)

    def _inner(self, w):
        out = []
        for c, lift, noise in self.terms:
            m = lift.T @ w @ lift + noise
            out.append((c, lift, m))
        return out

    def value(self, w) -> float:
        total = 0.0
        for c, _, m in self._inner(w):
            sign, ld = np.linalg.slogdet(m)
            if sign <= 0:
                return -math.inf
            total += c * ld
        return total

    def grad(self, w) -> np.ndarray:
        g = np.zeros((self.n, self.n))
        for c, lift, m in self._inner(w):
            g += c * (lift @ np.linalg.inv(m) @ lift.T)
        return 0.5 * (g + g.T)

    def vec(self, a):
        return self.basis.T @ a.ravel()

    def unvec(self, x):
        return (self.basis @ x).reshape(self.n, self.n)

    def barrier_value(self, w, beta) -> float:
        """Barrier function ``-phi(W) - beta (logdet W + logdet(I - W))``; inf outside."""
        try:
            c1 = np.linalg.cholesky(w)
            c2 = np.linalg.cholesky(self.eye - w)
        except np.linalg.LinAlgError:
            return math.inf
        v = self.value(w)
        if not math.isfinite(v):
            return math.inf
        return -v - beta * 2.0 * (np.sum(np.log(np.diag(c1))) + np.sum(np.log(np.diag(c2))))

    def barrier_derivs(self, w, beta):
        """Gradient and Hessian of :meth:`barrier_value` in basis coordinates."""
        wi = np.linalg.inv(w)
        vi = np.linalg.inv(self.eye - w)
        g = -beta * (wi - vi)
        h = beta * (_kron_sym(wi) + _kron_sym(vi))
        for c, lift, m in self._inner(w):
            p = lift @ np.linalg.inv(m) @ lift.T
            g -= c * p
            h += c * _kron_sym(p)
        hb = self.basis.T @ h @ self.basis
        return self.vec(0.5 * (g + g.T)), 0.5 * (hb + hb.T)

    def max_step(self, w, d) -> float:
        """Largest ``t`` keeping ``0 < W + t D < I``."""
        t = math.inf
        for base, dirn in ((w, d), (self.eye - w, -d)):
            c = np.linalg.cholesky(base)
            ci = np.linalg.inv(c)
            e = np.linalg.eigvalsh(ci @ dirn @ ci.T)[0]
            if e < 0:
                t = min(t, -1.0 / e)
        return t


def _kron_sym(a):
    n = a.shape[0]
    return (a[:, None, :, None] * a[None, :, None, :]).reshape(n * n, n * n)


def _newton_stage(prob: _Whitened, w, beta, max_iter):
    """Damped modified-Newton minimization of the barrier function at fixed ``beta``."""
    f = prob.barrier_value(w, beta)
    for _ in range(max_iter):
        g, h = prob.barrier_derivs(w, beta)
        lam, vec = np.linalg.eigh(h)
        scale = max(float(np.max(np.abs(lam))), 1e-300)
        lam = np.maximum(np.abs(lam), 1e-12 * scale)
        d = -(vec @ ((vec.T @ g) / lam))
        decrement = -float(g @ d)
        # below this the Armijo test is dominated by rounding in f
        if decrement <= 1e-13 * beta or decrement < 1e-14 * (1.0 + abs(f)):
            break
        # self-concordance style damping for the beta-scaled barrier
        nd = math.sqrt(decrement / beta)
        t = 1.0 / (1.0 + nd) if nd > 0.25 else 1.0
        dm = prob.unvec(d)
        t = min(t, 0.99 * prob.max_step(w, dm))
        while t > 1e-14:
            wn = w + t * dm
            wn = 0.5 * (wn + wn.T)
            fn = prob.barrier_value(wn, beta)
            if fn <= f - 1e-4 * t * decrement:
                break
            t *= 0.5
        else:
            break
        w, f = wn, fn
    return w


def _barrier_paths(prob: _Whitened, starts, cfg: SolverConfig):
    """Follow the central path from every start, in lockstep over ``beta``.

    Starts that coincide (to 1e-10) after a stage would trace the same path
    from then on, so only the lowest-indexed one keeps going.
    """
    ws = [np.array(w, dtype=float) for w in starts]
    owner = list(range(len(ws)))
    alive = list(range(len(ws)))
    pool = None
    workers = resolve_workers(cfg.parallelism)
    if workers > 1 and len(ws) > 1:
        pool = ThreadPoolExecutor(max_workers=workers)
    try:
        beta = cfg.beta_start
        while True:
            def stage(i, beta=beta):
                return _newton_stage(prob, ws[i], beta, cfg.newton_max_iter)
            out = list(pool.map(stage, alive)) if pool else [stage(i) for i in alive]
            for i, w in zip(alive, out):
                ws[i] = w
            kept = []
            for i in alive:
                j = next((j for j in kept if np.linalg.norm(ws[i] - ws[j]) < 1e-10), None)
                if j is None:
                    kept.append(i)
                else:
                    owner[i] = j
            alive = kept
            if beta <= cfg.beta_stop:
                break
            beta = max(beta * cfg.beta_factor, cfg.beta_stop)
    finally:
        if pool:
            pool.shutdown()

    def root(i):
        while owner[i] != i:
            i = owner[i]
        return i

    return [ws[root(i)] for i in range(len(ws))]


def _cayley(a):
    n = a.shape[0]
    eye = np.eye(n)
    return np.linalg.solve(eye - 0.5 * a, eye + 0.5 * a)


@dataclass
class _Point:
    w: np.ndarray
    m1w: np.ndarray
    m2w: np.ndarray
    start: int
    polished: bool


def _polish(prob: _Whitened, w_start, eta, tol):
    """Solve the KKT system with eigen-directions below ``eta`` / above ``1-eta`` held active."""
    n = prob.n
    lam, vecs = np.linalg.eigh(w_start)
    lo = np.where(lam < eta)[0]
    hi = np.where(lam > 1.0 - eta)[0]
    fr = np.where((lam >= eta) & (lam <= 1.0 - eta))[0]
    v = vecs[:, np.concatenate([lo, fr, hi])]
    n0, nf, n1 = len(lo), len(fr), len(hi)
    s0, sf, s1 = slice(0, n0), slice(n0, n0 + nf), slice(n0 + nf, n)
    iu = np.triu_indices(nf)
    cross = [(s0, sf), (s0, s1), (sf, s1)]
    sizes = [n0 * nf, n0 * n1, nf * n1]
    p0 = np.concatenate([np.diag(lam[fr])[iu], np.zeros(sum(sizes))])

    def build(p):
        y = np.zeros((nf, nf))
        y[iu] = p[: len(iu[0])]
        y = y + y.T - np.diag(np.diag(y))
        a = np.zeros((n, n))
        pos = len(iu[0])
        for (ra, cb), sz in zip(cross, sizes):
            blk = p[pos:pos + sz].reshape(ra.stop - ra.start, cb.stop - cb.start)
            a[ra, cb] = blk
            a[cb, ra] = -blk.T
            pos += sz
        u = v @ _cayley(a)
        wb = np.zeros((n, n))
        wb[sf, sf] = y
        wb[s1, s1] = np.eye(n1)
        return sym(u @ wb @ u.T), u, y

    def resid(p):
        w, u, _ = build(p)
        try:
            g = prob.grad(w)
        except np.linalg.LinAlgError:
            return np.full(len(p), 1e6)
        gt = u.T @ g @ u
        parts = [gt[sf, sf][iu]] + [gt[ra, cb].ravel() for ra, cb in cross]
        return np.concatenate(parts)

    if len(p0):
        try:
            sol = optimize.root(resid, p0, method="hybr", options={"xtol": 1e-15})
            p = sol.x
        except (np.linalg.LinAlgError, ValueError):
            return None
        # Newton clean-up steps with a finite-difference Jacobian
        for _ in range(3):
            r = resid(p)
            if not np.all(np.isfinite(r)) or np.max(np.abs(r)) < 1e-15:
                break
            jac = np.empty((len(r), len(p)))
            hstep = 1e-7
            for j in range(len(p)):
                dp = np.zeros(len(p))
                dp[j] = hstep
                jac[:, j] = (resid(p + dp) - resid(p - dp)) / (2 * hstep)
            try:
                step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            pn = p + step
            if np.max(np.abs(resid(pn))) < np.max(np.abs(r)):
                p = pn
            else:
                break
    else:
        p = p0
    w, u, y = build(p)
    if nf:
        ylam = np.linalg.eigvalsh(y)
        if ylam[0] < -tol or ylam[-1] > 1.0 + tol:
            return None
    try:
        g = prob.grad(w)
    except np.linalg.LinAlgError:
        return None
    gt = u.T @ g @ u
    m1b = -gt[s0, s0]
    m2b = gt[s1, s1]
    for blk in (m1b, m2b):
        if blk.size and np.linalg.eigvalsh(sym(blk))[0] < -tol:
            return None
    u0, u1 = u[:, s0], u[:, s1]
    m1w = sym(u0 @ (mx.clip_psd(m1b) if n0 else m1b) @ u0.T) if n0 else np.zeros((n, n))
    m2w = sym(u1 @ (mx.clip_psd(m2b) if n1 else m2b) @ u1.T) if n1 else np.zeros((n, n))
    return w, m1w, m2w


def _project_multipliers(prob: _Whitened, w, thr):
    lam, vecs = np.linalg.eigh(w)
    g = prob.grad(w)
    p0 = vecs[:, lam <= thr]
    p1 = vecs[:, lam >= 1.0 - thr]
    m1 = p0 @ (p0.T @ (-g) @ p0) @ p0.T if p0.shape[1] else np.zeros_like(w)
    m2 = p1 @ (p1.T @ g @ p1) @ p1.T if p1.shape[1] else np.zeros_like(w)
    return mx.clip_psd(m1), mx.clip_psd(m2)


@dataclass(frozen=True, eq=False)
class CorePoint:
    """A stationary point of a general log-det objective over ``0 <= K <= S``."""

    kx: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    value: float
    stationarity: float
    slack1: float
    slack2: float
    certified: bool
    start: int

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.slack1, self.slack2)


def _starts(prob: _Whitened, cfg: SolverConfig, extra_k):
    n = prob.n
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7741]))
    starts = [0.5 * np.eye(n)]
    for k in extra_k:
        w = prob.to_w(project_feasible(k, prob.to_k(np.eye(n))))
        starts.append(sym(0.96 * w + 0.02 * np.eye(n)))
    while len(starts) < max(cfg.max_restarts, 1):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        u = rng.uniform(0.05, 0.95, size=n)
        starts.append(sym((q * u) @ q.T))
    return starts[: max(cfg.max_restarts, 1)]


def maximize_logdet_terms(
    terms: Sequence[LogdetTerm],
    s: Any,
    cfg: SolverConfig | None = None,
    extra_starts: Sequence[Any] = (),
) -> list[CorePoint]:
    """Multi-start maximization of ``sum coef/2 logdet(L^T K L + N)`` over ``0 <= K <= S``.

    Returns every distinct end point (best first).  ``S`` must be positive
    definite.
    """
    cfg = cfg or SolverConfig()
    s = sym(s)
    if mx.numerical_rank(s) < s.shape[0]:
        raise PreconditionError("S is rank deficient; apply reduce_rank_deficient first")
    prob = _Whitened(terms, s)
    starts = _starts(prob, cfg, extra_starts)

    ends = _barrier_paths(prob, starts, cfg)

    # one polish per cluster of barrier end points
    reps: list[tuple[int, np.ndarray]] = []
    for i, w in enumerate(ends):
        if not any(np.linalg.norm(w - rw) < 1e-6 for _, rw in reps):
            reps.append((i, w))

    points = []
    for i, w in reps:
        best = None
        for eta in (1e-7, 1e-5, 1e-3):
            out = _polish(prob, w, eta, cfg.multiplier_tol)
            if out is None:
                continue
            pt = _finish(prob, terms, s, out, i, cfg)
            if best is None or pt.residual < best.residual:
                best = pt
            if pt.certified:
                break
        if best is None or not best.certified:
            m1w, m2w = _project_multipliers(prob, w, cfg.multiplier_tol * prob.n)
            pt = _finish(prob, terms, s, (w, m1w, m2w), i, cfg)
            if best is None or pt.residual < best.residual:
                best = pt
        points.append(best)
    return _rank_points(points)


def _finish(prob, terms, s, out, start, cfg) -> CorePoint:
    w, m1w, m2w = out
    k = prob.to_k(w)
    m1 = sym(prob.ri @ m1w @ prob.ri)
    m2 = sym(prob.ri @ m2w @ prob.ri)
    value = terms_value(terms, k)
    stat, sl1, sl2 = terms_residuals(terms, k, m1, m2, s)
    feasible = (
        mx.min_eig(k) >= -cfg.feas_tol and mx.loewner_margin(k, s) >= -cfg.feas_tol
    )
    certified = feasible and max(stat, sl1, sl2) < cfg.kkt_tol
    return CorePoint(k, m1, m2, value, stat, sl1, sl2, certified, start)


def _rank_points(points: list[CorePoint]) -> list[CorePoint]:
    best_val = max(p.value for p in points)
    slack = 1e-9 * (1.0 + abs(best_val))
    top = [p for p in points if p.certified and p.value >= best_val - slack]
    if top:
        top.sort(key=lambda p: (p.residual, p.start))
        first = top[0]
    else:
        first = max(points, key=lambda p: (p.value, -p.start))
    rest = sorted((p for p in points if p is not first), key=lambda p: (-p.value, p.residual, p.start))
    # merge duplicates that polished onto the same point
    uniq = [first]
    for p in rest:
        if all(np.linalg.norm(p.kx - q.kx) > 1e-7 * (1 + np.linalg.norm(q.kx)) for q in uniq):
            uniq.append(p)
    return uniq


# --------------------------------------------------------------------------
# public operations


def _constant_objective(inst: ExtremalInstance) -> bool:
    scale = max(1.0, float(np.max(np.abs(inst.kz1))))
    return inst.mu == 1.0 and float(np.max(np.abs(inst.kz1 - inst.kz2))) <= 1e-14 * scale


def solve(inst: ExtremalInstance, cfg: SolverConfig | None = None) -> KktSolution:
    """Optimal Gaussian covariance with KKT multipliers for a full-rank ``S``."""
    cfg = cfg or SolverConfig()
    n = inst.dim
    if mx.numerical_rank(inst.s) < n:
        raise PreconditionError(
            "S is rank deficient; apply reduce_rank_deficient and solve the reduced instance"
        )
    if _constant_objective(inst):
        zero = np.zeros((n, n))
        return KktSolution(inst.s.copy(), zero, zero.copy(), 0.0, 0.0, 0.0,
                           gaussian_objective(inst.s, inst), True, 0)

    extra = []
    if inst.mu != 1.0:
        extra.append((inst.kz2 - inst.mu * inst.kz1) / (inst.mu - 1.0))
    points = maximize_logdet_terms(instance_terms(inst), inst.s, cfg, extra)
    best = points[0]
    others = tuple(p.kx for p in points[1:] if p.certified)
    return KktSolution(
        kx=best.kx,
        m1=best.m1,
        m2=best.m2,
        stationarity_residual=best.stationarity,
        slack1=best.slack1,
        slack2=best.slack2,
        objective=gaussian_objective(best.kx, inst),
        certified=best.certified,
        restarts=cfg.max_restarts,
        distinct_points=others,
    )


def optimal_value(inst: ExtremalInstance, cfg: SolverConfig | None = None) -> tuple[float, np.ndarray]:
    """Optimal Gaussian objective and covariance for any PSD ``S`` (reduces rank first)."""
    if mx.numerical_rank(inst.s) == inst.dim:
        sol = solve(inst, cfg)
        return sol.objective, sol.kx
    red = mx.reduce_rank_deficient(inst)
    if red.reduced_dim == 0:
        kx = np.zeros_like(inst.s)
        return gaussian_objective(kx, inst), kx
    sub = solve(red.reduced, cfg)
    return sub.objective + red.offset(inst.mu), red.lift(sub.kx)


def recover_multipliers(kx: Any, inst: ExtremalInstance, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers supported on the null spaces of ``K`` and ``S - K``.

    The null spaces are found in whitened coordinates with eigenvalue
    threshold ``tol * n``; the gradient is projected onto them and the
    results clipped to the PSD cone.
    """
    kx = sym(kx)
    try:
        prob = _Whitened(instance_terms(inst), inst.s)
    except SingularMatrixError as exc:
        raise PreconditionError(
            "null spaces of K and S-K overlap (singular S); inspect manually"
        ) from exc
    w = prob.to_w(kx)
    m1w, m2w = _project_multipliers(prob, w, tol * inst.dim)
    return sym(prob.ri @ m1w @ prob.ri), sym(prob.ri @ m2w @ prob.ri)


def kkt_residuals(sol: KktSolution, inst: ExtremalInstance) -> tuple[float, float, float]:
    g = gaussian_gradient(sol.kx, inst)
    stat = float(np.linalg.norm(g + sol.m1 - sol.m2))
    return stat, float(np.linalg.norm(sol.m1 @ sol.kx)), float(np.linalg.norm(sol.m2 @ (inst.s - sol.kx)))


def kkt_residual(sol: KktSolution, inst: ExtremalInstance) -> float:
    """Largest of the stationarity defect and the two slackness norms (0 at an exact KKT point)."""
    return max(kkt_residuals(sol, inst))


def with_residuals(sol: KktSolution, inst: ExtremalInstance, cfg: SolverConfig | None = None) -> KktSolution:
    """Recompute residuals, objective and the certified flag of ``sol`` against ``inst``."""
    cfg = cfg or SolverConfig()
    stat, s1, s2 = kkt_residuals(sol, inst)
    feasible = mx.min_eig(sol.kx) >= -cfg.feas_tol and mx.loewner_margin(sol.kx, inst.s) >= -cfg.feas_tol
    return replace(
        sol,
        stationarity_residual=stat,
        slack1=s1,
        slack2=s2,
        objective=gaussian_objective(sol.kx, inst),
        certified=feasible and max(stat, s1, s2) < cfg.kkt_tol,
    )


@dataclass(frozen=True)
class ConcavityReport:
    g1: float
    g2: float
    g_mid: float
    t: float
    slack: float
    holds: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "g1_nats": self.g1,
            "g2_nats": self.g2,
            "g_mid_nats": self.g_mid,
            "t": self.t,
            "slack_nats": self.slack,
            "holds": self.holds,
        }


def concavity_check(kz1, kz2, mu, s1, s2, t, cfg: SolverConfig | None = None, tol: float = 1e-7) -> ConcavityReport:
    """Test ``g(t S1 + (1-t) S2) >= t g(S1) + (1-t) g(S2)`` for the optimal value ``g``."""
    if not 0.0 <= t <= 1.0:
        raise PreconditionError("t must lie in [0, 1]")
    if mu < 1.0:
        raise PreconditionError("concavity in S is only claimed for mu >= 1")
    s1, s2 = sym(s1), sym(s2)
    g1, _ = optimal_value(ExtremalInstance(kz1, kz2, s1, mu), cfg)
    g2, _ = optimal_value(ExtremalInstance(kz1, kz2, s2, mu), cfg)
    gm, _ = optimal_value(ExtremalInstance(kz1, kz2, t * s1 + (1.0 - t) * s2, mu), cfg)
    slack = gm - (t * g1 + (1.0 - t) * g2)
    return ConcavityReport(g1, g2, gm, t, slack, slack >= -tol)
