"""Induced thermodynamics: variations, partition sums, pressure, Gibbs states.

All induced-word bookkeeping is anchored at periodic points of composed
inverse branches (each word cylinder contains exactly one), and every
quantity depending on (t, s) factors through the t- and s-independent orbit
data (sum of log|Df| and total time), so pressure root-finding reuses one
enumeration.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math
import warnings

import numpy as np

from .errors import (
    BranchNotContractingError,
    PressureUnbracketedError,
    ProjectionUnstableWarning,
    SingularPotentialError,
    TransferOperatorDivergedError,
    UnstablePressureWarning,
    VariationNotSummableWarning,
)
from .inducing import InducingScheme
from .maps import IntervalMap
from .util import IntervalHistogram, fmt12

FIX_TOL = 1e-15
FIX_ITERS = 200
WORD_CAP = 2_000_000


# ---------------------------------------------------------------------------
# Word enumeration and periodic anchors
# ---------------------------------------------------------------------------

def enumerate_words(scheme: InducingScheme, k, budget=None, start=None,
                    max_words=WORD_CAP):
    """All k-words of branch indices with total inducing time <= budget.

    Lexicographic in branch indices (branches are ordered left to right),
    hence deterministic.  budget=None means unconstrained.
    """
    taus = scheme.taus
    nb = len(taus)
    if nb == 0:
        return []
    words = []
    mintau = int(taus.min())
    first = range(nb) if start is None else (start,)

    def rec(prefix, used):
        if len(words) > max_words:
            raise MemoryError("word enumeration exceeded max_words")
        depth = len(prefix)
        if depth == k:
            words.append(tuple(prefix))
            return
        remaining = (k - depth - 1) * mintau
        for i in (first if depth == 0 else range(nb)):
            ti = used + int(taus[i])
            if budget is not None and ti + remaining > budget:
                continue
            prefix.append(i)
            rec(prefix, ti)
            prefix.pop()

    rec([], 0)
    return words


def _branch_symbol_arrays(scheme):
    return [np.array(b.itinerary, dtype=np.int16) for b in scheme.branches]


def _invert_by_symbol(m: IntervalMap, syms, z):
    out = np.empty_like(z)
    for b in np.unique(syms):
        mask = syms == b
        out[mask] = m.invert(int(b), z[mask])
    return out


def _group_words(scheme, words):
    """Group words by total symbol length L; yields (row_idx, sym_matrix)."""
    syms_of = _branch_symbol_arrays(scheme)
    taus = scheme.taus
    totals = np.array([int(sum(taus[i] for i in w)) for w in words], dtype=int)
    for L in np.unique(totals):
        rows = np.nonzero(totals == L)[0]
        sym = np.empty((len(rows), L), dtype=np.int16)
        for r, wi in enumerate(rows):
            sym[r] = np.concatenate([syms_of[i] for i in words[wi]])
        yield rows, sym


def periodic_anchors(scheme: InducingScheme, words):
    """Fixed point of the composed inverse branch of each word.

    Iterates the contraction from the base midpoint until the update falls
    below FIX_TOL (cap FIX_ITERS) and verifies contraction by two-point
    shrinkage.  Returns (x_fix, sumlog, total_tau) aligned with words.
    """
    m = scheme.map
    n = len(words)
    xf, sl = np.empty(n), np.empty(n)
    lt = np.empty(n, dtype=int)
    if n == 0:
        return xf, sl, lt
    mid = 0.5 * (scheme.base_lo + scheme.base_hi)
    probe = scheme.base_lo + 0.25 * scheme.base_width
    for rows, sym in _group_words(scheme, words):
        L = sym.shape[1]
        x = np.full(len(rows), mid)
        for it in range(FIX_ITERS):
            z = x.copy()
            for j in range(L - 1, -1, -1):
                z = _invert_by_symbol(m, sym[:, j], z)
            if it == 0:
                zy = np.full(len(rows), probe)
                for j in range(L - 1, -1, -1):
                    zy = _invert_by_symbol(m, sym[:, j], zy)
                shrink = np.abs(z - zy) / abs(mid - probe)
                if np.any(shrink >= 1.0):
                    bad = int(rows[int(np.argmax(shrink))])
                    raise BranchNotContractingError(
                        f"word {words[bad]} failed two-point shrinkage"
                    )
            delta = float(np.max(np.abs(z - x)))
            x = z
            if delta < FIX_TOL:
                break
        # Orbit sum of log|Df| along the backward (contracting) sweep: the
        # pullback intermediates are f^j(x) computed stably, unlike forward
        # iteration whose float orbits lose coherence past ~53 steps.
        logd = np.zeros(len(rows))
        z = x.copy()
        for j in range(L - 1, -1, -1):
            z = _invert_by_symbol(m, sym[:, j], z)
            d = np.abs(m.df(z))
            if np.any(d < 1e-300):
                raise SingularPotentialError("orbit hit zero derivative")
            logd += np.log(d)
        xf[rows], sl[rows], lt[rows] = x, logd, L
    return xf, sl, lt


@lru_cache(maxsize=128)
def _word_data(scheme, k, budget, start):
    words = enumerate_words(scheme, k, budget, start)
    xf, sl, lt = periodic_anchors(scheme, words)
    return words, xf, sl, lt


def count_words(scheme, k, budget):
    """Number of k-words with total time <= budget, without enumerating."""
    taus = scheme.taus
    if budget is None:
        return len(taus) ** k
    hist = np.bincount(taus, minlength=budget + 1)[: budget + 1].astype(float)
    ways = hist.copy()
    for _ in range(k - 1):
        ways = np.convolve(ways, hist)[: budget + 1]
    return int(round(ways.sum()))


def _pullback_samples(scheme, words, fracs):
    """Pull base sample points back through each word.

    Returns (points, total_sumlog, first_step_sumlog, total_tau) as
    (n_words, n_fracs) arrays; first_step_sumlog covers only the word's
    first branch (for one-step potential oscillation).
    """
    m = scheme.map
    n, F = len(words), len(fracs)
    pts = np.empty((n, F))
    sl_tot = np.empty((n, F))
    sl_first = np.empty((n, F))
    lt = np.empty(n, dtype=int)
    base = scheme.base_lo + np.asarray(fracs) * scheme.base_width
    tau1 = np.array([scheme.taus[w[0]] for w in words], dtype=int)
    for rows, sym in _group_words(scheme, words):
        L = sym.shape[1]
        z = np.tile(base, (len(rows), 1))
        logd = np.zeros_like(z)
        for j in range(L - 1, -1, -1):
            for b in np.unique(sym[:, j]):
                mask = sym[:, j] == b
                z[mask] = m.invert(int(b), z[mask])
            logd += np.log(np.maximum(np.abs(m.df(z)), 1e-300))
        pts[rows] = z
        sl_tot[rows] = logd
        lt[rows] = L
        # forward pass for the first-branch share, masked per row
        t1 = tau1[rows]
        cur = z.copy()
        acc = np.zeros_like(z)
        for step in range(int(t1.max())):
            active = step < t1
            d = np.log(np.maximum(np.abs(m.df(cur)), 1e-300))
            acc[active] += d[active]
            cur = np.asarray(m.f(cur))
        sl_first[rows] = acc
    return pts, sl_tot, sl_first, lt


def forward_sumlog(m: IntervalMap, x, steps):
    """Sum of log|Df| along the first `steps` iterates (vectorised)."""
    z = np.asarray(x, dtype=float).copy()
    s = np.zeros_like(z)
    for _ in range(steps):
        d = np.abs(m.df(z))
        if np.any(d < 1e-300):
            raise SingularPotentialError("orbit hit zero derivative")
        s += np.log(d)
        z = np.asarray(m.f(z))
    return s, z


@lru_cache(maxsize=64)
def _branch_orbit_data(scheme):
    """(x_fix, sumlog_fix, sumlog_mid) for the single-branch words."""
    words = [(i,) for i in range(len(scheme.branches))]
    xf, slf, _ = periodic_anchors(scheme, words)
    mids = np.array([b.midpoint for b in scheme.branches])
    slm = np.empty(len(mids))
    taus = scheme.taus
    for tval in np.unique(taus):
        rows = taus == tval
        slm[rows], _ = forward_sumlog(scheme.map, mids[rows], int(tval))
    return xf, slf, slm


# ---------------------------------------------------------------------------
# Induced potential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InducedPotential:
    """Per-branch values of Psi = Phi - s*tau with Phi = -t log|DF|.

    Carries the t-independent orbit sums so any (t, s) reweighting is a
    closed-form operation.
    """

    scheme: InducingScheme
    t: float
    s: float
    tau: np.ndarray = field(repr=False)
    x_fix: np.ndarray = field(repr=False)
    sumlog_fix: np.ndarray = field(repr=False)
    sumlog_mid: np.ndarray = field(repr=False)

    @property
    def phi_fix(self):
        return -self.t * self.sumlog_fix

    @property
    def phi_mid(self):
        return -self.t * self.sumlog_mid

    @property
    def psi_fix(self):
        return self.phi_fix - self.s * self.tau

    @property
    def psi_mid(self):
        return self.phi_mid - self.s * self.tau


def induced_potential(scheme: InducingScheme, t, s) -> InducedPotential:
    """Branch potential data at midpoints and branch fixed points."""
    bad = sum(1 for b in scheme.branches if not b.extension_ok)
    if bad:
        warnings.warn(f"{bad} branches lack the extension margin", UserWarning)
    xf, slf, slm = _branch_orbit_data(scheme)
    return InducedPotential(scheme, float(t), float(s), scheme.taus, xf, slf, slm)


# ---------------------------------------------------------------------------
# Variations and distortion constants
# ---------------------------------------------------------------------------

def _alphabet_words(alphabet, k):
    """All k-tuples over the given branch alphabet, lexicographic."""
    out = [()]
    for _ in range(k):
        out = [w + (int(i),) for w in out for i in alphabet]
    return out


@dataclass(frozen=True)
class VariationProfile:
    """V_k = oscillation of the one-step induced potential over k-cylinders;
    B_k = exp(sum_{j>k} V_j) with a geometric tail extrapolation."""

    V: np.ndarray
    B: np.ndarray
    tail_rate: float

    @property
    def summable(self):
        return self.tail_rate < 1.0


def variation_profile(scheme, pot: InducedPotential, k_max,
                      words_per_k=1500) -> VariationProfile:
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    # Sample words over the heaviest branches so deep levels stay tractable:
    # alphabet size drops with depth, keeping ~words_per_k words per level.
    rank = np.argsort(-np.exp(pot.psi_fix), kind="stable")
    Vs = []
    for k in range(1, k_max + 1):
        nb = max(2, int(round(words_per_k ** (1.0 / k))))
        alphabet = np.sort(rank[:nb])
        words = [
            w for w in _alphabet_words(alphabet, k)
            if sum(int(scheme.taus[i]) for i in w) <= scheme.n_max + 2 * k
        ]
        if not words:
            Vs.append(0.0)
            continue
        _, _, sl_first, _ = _pullback_samples(scheme, words, (1 / 6, 1 / 2, 5 / 6))
        psi = -pot.t * sl_first  # the -s*tau1 shift is constant per word
        Vs.append(float((psi.max(axis=1) - psi.min(axis=1)).max()))
    V = np.array(Vs)
    lam = 1.0
    pos = np.nonzero(V > 1e-14)[0]
    if len(pos) >= 2 and V[pos[-1]] < V[pos[-2]]:
        lam = float((V[pos[-1]] / V[pos[-2]]) ** (1.0 / (pos[-1] - pos[-2])))
    if lam >= 1.0 and V[-1] > 1e-14:
        warnings.warn("V_k tail not decreasing; geometric fit impossible",
                      VariationNotSummableWarning)
        lam = 1.0
    tail = V[-1] * lam / (1.0 - lam) if lam < 1.0 else 0.0
    B = np.array([math.exp(float(V[k:].sum()) + tail) for k in range(k_max + 1)])
    return VariationProfile(V, B, lam)


# ---------------------------------------------------------------------------
# Partition sums and Gurevich pressure
# ---------------------------------------------------------------------------

def zk_sum(scheme, pot: InducedPotential, k, N, start=None):
    """Z_k = sum over k-periodic words (total time <= N) of exp(Psi_k).

    Each word cylinder contains a unique periodic point of the composed
    inverse branch; Psi_k is evaluated there.  `start` restricts the sum to
    words beginning in one 1-cylinder (the paper's convention); the default
    sums over all of them.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _, xf, sl, lt = _word_data(scheme, k, N, start)
    if len(xf) == 0:
        return 0.0
    return float(np.exp(-pot.t * sl - pot.s * lt).sum())


@dataclass(frozen=True)
class PressureEstimate:
    estimate: float         # Cauchy difference log Z_k - log Z_{k-1}
    last: float             # (1/k_max) log Z_{k_max}
    sup_lower: float        # sup_k (1/k) log Z_k over the computed ladder
    sequence: tuple
    cylinder_spread: float  # gap between two start-cylinder restrictions


def gurevich_pressure(scheme, pot: InducedPotential, k_max, N,
                      return_detail=False):
    """Growth-rate estimate of (1/k) log Z_k for k <= k_max.

    Returns the Cauchy-difference (Richardson-style) estimate; the detail
    object also carries the raw sequence, the last value, the
    superadditivity lower bound, and the spread between two start-cylinder
    restrictions (the limit does not depend on that choice).
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    logz = []
    for k in range(1, k_max + 1):
        z = zk_sum(scheme, pot, k, N)
        if z <= 0.0:
            raise ValueError(f"empty word set at depth {k} under budget {N}")
        logz.append(math.log(z))
    seq = tuple(lz / (k + 1) for k, lz in enumerate(logz))
    estimate = logz[-1] - logz[-2]
    diffs = np.diff(np.array(logz))
    if len(diffs) >= 3 and abs(diffs[-1] - diffs[-2]) > 2 * abs(diffs[-2] - diffs[-3]) + 1e-9:
        warnings.warn(
            f"erratic Z_k ladder: {[round(s, 6) for s in seq]}",
            UnstablePressureWarning,
        )
    spread = 0.0
    if len(scheme.branches) >= 2:
        alt = []
        for i in (0, 1):
            z1 = zk_sum(scheme, pot, 1, N, start=i)
            z2 = zk_sum(scheme, pot, 2, N, start=i)
            if z1 > 0 and z2 > 0:
                alt.append(math.log(z2) - math.log(z1))
        if len(alt) == 2:
            spread = abs(alt[0] - alt[1])
    if return_detail:
        return PressureEstimate(estimate, seq[-1], max(seq), seq, spread)
    return estimate


# ---------------------------------------------------------------------------
# Spectral transfer operator on a base grid
# ---------------------------------------------------------------------------

class SpectralOperator:
    """Truncated transfer operator (L g)(x) = sum_i e^(Psi(y_i)) g(y_i) with
    y_i the branch-i preimage of x, discretised on base cell centers with
    linear interpolation of g.

    Branch pullbacks and orbit sums are (t, s)-independent; one assembly
    serves the whole potential family.
    """

    def __init__(self, scheme: InducingScheme, grid=256):
        self.scheme = scheme
        m = scheme.map
        G = int(grid)
        a0, a1 = scheme.base_lo, scheme.base_hi
        h = (a1 - a0) / G
        self.xs = a0 + (np.arange(G) + 0.5) * h
        B = len(scheme.branches)
        Y = np.empty((B, G))
        SL = np.empty((B, G))
        for i, b in enumerate(scheme.branches):
            z = self.xs.copy()
            logd = np.zeros(G)
            for sym in b.itinerary[::-1]:
                z = m.invert(int(sym), z)
                logd += np.log(np.maximum(np.abs(m.df(z)), 1e-300))
            Y[i] = z
            SL[i] = logd
        self.tau = scheme.taus.astype(float)
        self.sumlog = SL
        pos = (Y - self.xs[0]) / h
        self.idx = np.clip(np.floor(pos).astype(int), 0, G - 2)
        self.frac = np.clip(pos - self.idx, 0.0, 1.0)
        self._g_warm = np.ones(G)

    def weights(self, t, s):
        return np.exp(-t * self.sumlog - s * self.tau[:, None])

    def apply(self, g, W):
        gy = g[self.idx] * (1.0 - self.frac) + g[self.idx + 1] * self.frac
        return (W * gy).sum(axis=0)

    def apply_adjoint(self, nu, W):
        """Adjoint action on cell masses (conformal-measure side)."""
        out = np.zeros(len(self.xs))
        np.add.at(out, self.idx, W * (1.0 - self.frac) * nu[None, :])
        np.add.at(out, self.idx + 1, W * self.frac * nu[None, :])
        return out

    def left_eigen(self, W, tol=1e-12, max_iter=3000):
        """Leading left eigenvector (cell masses of the conformal measure)."""
        nu = np.ones(len(self.xs)) / len(self.xs)
        lam = 0.0
        for _ in range(max_iter):
            nn = self.apply_adjoint(nu, W)
            lam_new = float(nn.sum())
            nn /= lam_new
            diff = float(np.max(np.abs(nn - nu)))
            nu = nn
            done = abs(lam_new - lam) < tol * max(abs(lam_new), 1e-300) \
                and diff < 1e-12
            lam = lam_new
            if done:
                break
        else:
            raise TransferOperatorDivergedError(
                f"adjoint iteration not converged after {max_iter} steps"
            )
        return lam, nu

    def eigen(self, t, s, tol=1e-12, max_iter=3000, warm=True):
        """Leading eigenvalue and positive eigenfunction by power iteration."""
        W = self.weights(t, s)
        g = self._g_warm if warm else np.ones(len(self.xs))
        g = np.maximum(g, 1e-12)
        lam = 0.0
        for _ in range(max_iter):
            gn = self.apply(g, W)
            lam_new = float(gn.sum() / g.sum())
            gn /= lam_new
            diff = float(np.max(np.abs(gn - g))) / max(float(np.max(gn)), 1e-300)
            g = gn
            done = abs(lam_new - lam) < tol * max(abs(lam_new), 1e-300) and diff < 1e-10
            lam = lam_new
            if done:
                break
        else:
            raise TransferOperatorDivergedError(
                f"power iteration not converged after {max_iter} steps"
            )
        self._g_warm = g
        return lam, g

    def interp(self, x, g):
        """Evaluate a grid function at arbitrary points."""
        G = len(self.xs)
        h = self.xs[1] - self.xs[0]
        pos = (np.asarray(x, dtype=float) - self.xs[0]) / h
        idx = np.clip(np.floor(pos).astype(int), 0, G - 2)
        frac = np.clip(pos - idx, 0.0, 1.0)
        return g[idx] * (1.0 - frac) + g[idx + 1] * frac


@lru_cache(maxsize=32)
def _spectral(scheme, grid):
    return SpectralOperator(scheme, grid)


# ---------------------------------------------------------------------------
# Pressure equation
# ---------------------------------------------------------------------------

def pressure_estimate(scheme, t, s, estimator="spectral", grid=256,
                      word_cap=500_000):
    """P_G(Phi - s tau) under the chosen estimator.

    spectral: log of the leading transfer-operator eigenvalue (default;
    bias limited to grid interpolation and branch truncation).  zk: Cauchy
    difference of complete Z_k ladders (small schemes).  factorized: log of
    the branch-weight sum (exact when variations vanish, e.g. tents).
    """
    if estimator == "spectral":
        op = _spectral(scheme, grid)
        lam, _ = op.eigen(t, s)
        return math.log(lam)
    pot = induced_potential(scheme, t, s)
    if estimator == "factorized":
        return math.log(float(np.exp(pot.psi_fix).sum()))
    if estimator == "zk":
        B = max(len(scheme.branches), 2)
        k = 2
        while B ** (k + 1) <= word_cap and k < 5:
            k += 1
        z1 = zk_sum(scheme, pot, k - 1, None)
        z2 = zk_sum(scheme, pot, k, None)
        return math.log(z2) - math.log(z1)
    raise ValueError(f"unknown estimator '{estimator}'")


def solve_pressure(scheme, t, bracket=(-5.0, 5.0), tol=1e-4,
                   estimator="spectral", grid=256):
    """Root of s -> P_G(Phi - s tau) by bisection.

    The map is strictly decreasing in s because tau >= 1; bisection inside
    the bracket is unconditionally safe.  Returns s* with |P_G(s*)| < tol.
    """
    lo, hi = bracket

    def g(s):
        return pressure_estimate(scheme, t, s, estimator=estimator, grid=grid)

    glo, ghi = g(lo), g(hi)
    if not (glo > 0.0 > ghi):
        raise PressureUnbracketedError(
            f"P_G({lo})={glo:.3g}, P_G({hi})={ghi:.3g}: no root in bracket"
        )
    a, b = lo, hi
    s_star, resid = None, None
    for _ in range(80):
        mid = 0.5 * (a + b)
        val = g(mid)
        if val > 0.0:
            a = mid
        else:
            b = mid
        if abs(val) < tol * 1e-3:
            s_star, resid = mid, val
            break
        if (b - a) < 1e-13:
            break
    if s_star is None:
        s_star = 0.5 * (a + b)
        resid = g(s_star)
    if abs(resid) > tol:
        warnings.warn(
            f"pressure residual {resid:.2e} above tolerance {tol}",
            UnstablePressureWarning,
        )
    return s_star


# ---------------------------------------------------------------------------
# Gibbs states
# ---------------------------------------------------------------------------

@dataclass
class GibbsState:
    scheme: InducingScheme
    t: float
    pressure: float            # P(phi_t): the root s*
    gurevich_residual: float   # P_G of the induced potential at s*
    log_lambda: float          # eigenvalue fold-in: Psi_eff = Psi - log(lambda)
    rho_grid_x: np.ndarray = field(repr=False)
    rho_grid: np.ndarray = field(repr=False)
    nu_grid: np.ndarray = field(repr=False)     # conformal cell masses, sum 1
    branch_mu: np.ndarray = field(repr=False)   # invariant branch masses, sum 1
    branch_m: np.ndarray = field(repr=False)    # conformal branch masses, sum 1
    branch_rho: np.ndarray = field(repr=False)
    x_fix: np.ndarray = field(repr=False)
    sumlog_fix: np.ndarray = field(repr=False)
    cylinder_weights: dict = field(repr=False)  # word -> anchored conformal mass
    mu_weights: dict = field(repr=False)        # word -> anchored invariant mass
    weight_depth: int = 1
    weight_sums: tuple = ()
    gibbs_constant: float = 1.0
    h_bound: float = 1.0
    variation: VariationProfile = None
    tail_allowance: float = 0.05
    _op: SpectralOperator = field(default=None, repr=False)
    _W: np.ndarray = field(default=None, repr=False)
    _GY: np.ndarray = field(default=None, repr=False)
    _m_norm: float = 1.0   # raw total of the operator branch m-masses

    @property
    def taus(self):
        return self.scheme.taus

    def rho(self, x):
        return self._op.interp(x, self.rho_grid)

    def psi_eff(self, sumlog, total_tau, k):
        """Normalised k-step potential Phi - s*tau - k log(lambda)."""
        return (-self.t * np.asarray(sumlog)
                - self.pressure * np.asarray(total_tau)
                - k * self.log_lambda)


def gibbs_state(scheme, t, weight_depth=4, weight_budget=None, grid=256,
                rho_tol=1e-8, rho_iters=1000, tail_allowance=0.05,
                variation_kmax=6, estimator="spectral",
                pressure_tol=1e-4, bracket=(-5.0, 5.0)) -> GibbsState:
    """Pressure root, density, conformal/invariant cylinder weights.

    The density solves L_Psi rho = lambda rho on the base grid, iterating
    from rho = 1 until the successive sup-distance drops below rho_tol;
    lambda is folded into the normalised potential so stored weights satisfy
    the Gibbs property with zero pressure.
    """
    s_star = solve_pressure(scheme, t, bracket=bracket, tol=pressure_tol,
                            estimator=estimator, grid=grid)
    op = _spectral(scheme, grid)
    W = op.weights(t, s_star)
    g = np.ones(len(op.xs))
    lam = 1.0
    converged = False
    for _ in range(rho_iters):
        gn = op.apply(g, W)
        lam = float(gn.sum() / g.sum())
        gn /= lam
        if float(np.max(np.abs(gn - g))) < rho_tol:
            g = gn
            converged = True
            break
        g = gn
    if not converged:
        raise TransferOperatorDivergedError(
            f"rho iteration not converged in {rho_iters} steps"
        )
    log_lam = math.log(lam)
    # Conformal measure as cell masses: left eigenvector of the same matrix.
    _, nu = op.left_eigen(W)
    # Normalise rho so that int rho dm = 1 on the grid.
    g = g / float((nu * g).sum())

    xf, slf, _ = _branch_orbit_data(scheme)
    taus = scheme.taus

    def psi_eff(sumlog, total, k):
        return -t * sumlog - s_star * total - k * log_lam

    m_raw1 = np.exp(psi_eff(slf, taus.astype(float), 1))
    rho_b = op.interp(xf, g)
    mu_raw1 = m_raw1 * rho_b
    # Operator-quadrature branch masses: mu(X_i) = sum_l nu_l W_il rho(y_il),
    # m(X_i) = sum_l nu_l W_il (exact up to grid interpolation; the anchored
    # word weights keep the Z_k bookkeeping but are 1-point estimates).
    Wn = W * math.exp(-log_lam)
    GY = g[op.idx] * (1.0 - op.frac) + g[op.idx + 1] * op.frac
    branch_mu_op = (Wn * GY * nu[None, :]).sum(axis=1)
    branch_m_op = (Wn * nu[None, :]).sum(axis=1)
    m_norm = float(branch_m_op.sum())
    branch_mu_op = branch_mu_op / float(branch_mu_op.sum())
    branch_m_op = branch_m_op / m_norm

    budget = weight_budget if weight_budget is not None else scheme.n_max + 8
    words_by_depth = {1: [(i,) for i in range(len(taus))]}
    raw_by_depth = {1: (m_raw1, mu_raw1)}
    for k in range(2, weight_depth + 1):
        # Stop at the depth where complete enumeration stops being tractable;
        # stored depths then carry complete (budget-truncated) word sets.
        if count_words(scheme, k, budget) > 300_000:
            break
        wk, xfk, slk, ltk = _word_data(scheme, k, budget, None)
        if not wk:
            break
        mk = np.exp(psi_eff(slk, ltk.astype(float), k))
        words_by_depth[k] = wk
        raw_by_depth[k] = (mk, mk * op.interp(xfk, g))

    depth_sums = {k: float(raw_by_depth[k][0].sum()) for k in raw_by_depth}
    c_m = 1.0 / max(depth_sums.values())
    c_mu = 1.0 / float(mu_raw1.sum())
    cylinder_weights, mu_weights = {}, {}
    for k, wk in words_by_depth.items():
        mk, muk = raw_by_depth[k]
        for w, mv, uv in zip(wk, mk, muk):
            cylinder_weights[w] = float(mv) * c_m
            mu_weights[w] = float(uv) * c_mu

    pot = InducedPotential(scheme, float(t), s_star, taus, xf, slf,
                           _branch_orbit_data(scheme)[2])
    var = variation_profile(scheme, pot, variation_kmax)

    gs = GibbsState(
        scheme=scheme, t=float(t), pressure=s_star,
        gurevich_residual=pressure_estimate(scheme, t, s_star,
                                            estimator=estimator, grid=grid),
        log_lambda=log_lam, rho_grid_x=op.xs, rho_grid=g, nu_grid=nu,
        branch_mu=branch_mu_op, branch_m=branch_m_op, branch_rho=rho_b,
        x_fix=xf, sumlog_fix=slf,
        cylinder_weights=cylinder_weights, mu_weights=mu_weights,
        weight_depth=max(words_by_depth),
        weight_sums=tuple(depth_sums[k] * c_m for k in sorted(depth_sums)),
        h_bound=float(var.B[0] ** 4), variation=var,
        tail_allowance=tail_allowance, _op=op, _W=Wn, _GY=GY, _m_norm=m_norm,
    )
    gs.gibbs_constant = gibbs_sandwich_report(gs)
    return gs


def _cell_cumulative(gs: GibbsState, cell_masses):
    """Cumulative mass function of per-cell masses on the base grid."""
    op = gs._op
    h = op.xs[1] - op.xs[0]
    edges0 = op.xs[0] - 0.5 * h
    cum = np.concatenate([[0.0], np.cumsum(cell_masses)])

    def M(x):
        pos = np.clip((np.asarray(x, dtype=float) - edges0) / h,
                      0.0, len(cell_masses))
        cell = np.minimum(pos.astype(int), len(cell_masses) - 1)
        return cum[cell] + cell_masses[cell] * (pos - cell)

    return M


def branch_children(gs: GibbsState, i, cap=200, coverage=0.995):
    """Depth-2 refinement of branch i: child intervals and masses.

    The branch's invariant mass is distributed over its continuations by
    slicing the operator-quadrature cell masses mu_i(dy) = nu(dy) W_i(y)
    rho(y_i) along the continuation intervals.  Children are the strongest
    continuations (deterministic order); mass not captured by them is the
    caller's remainder.
    """
    scheme = gs.scheme
    m = scheme.map
    # mu-mass profile of branch i over base cells, rescaled to the stored mass
    c = gs.nu_grid * gs._W[i] * gs._GY[i]
    csum = float(c.sum())
    if csum > 0:
        c = c * (float(gs.branch_mu[i]) / csum)
    M = _cell_cumulative(gs, c)
    order = np.argsort(-gs.branch_mu, kind="stable")
    total = np.cumsum(gs.branch_mu[order])
    keep = min(len(order), cap, int(np.searchsorted(total, coverage)) + 1)
    sel = np.sort(order[:keep])
    los = np.array([scheme.branches[j].lo for j in sel])
    his = np.array([scheme.branches[j].hi for j in sel])
    masses = M(his) - M(los)
    # geometry: the refinement piece is the pullback of X_j through branch i
    pts = np.concatenate([los, his])
    for sym in scheme.branches[i].itinerary[::-1]:
        pts = m.invert(int(sym), pts)
    nc = len(sel)
    lo = np.minimum(pts[:nc], pts[nc:])
    hi = np.maximum(pts[:nc], pts[nc:])
    return sel, lo, hi, masses


# ---------------------------------------------------------------------------
# Projection to the interval
# ---------------------------------------------------------------------------

@dataclass
class EquilibriumMeasure:
    map: IntervalMap
    t: float
    masses: np.ndarray
    tau_mean: float

    @property
    def bins(self):
        return len(self.masses)

    @property
    def centers(self):
        n = self.bins
        return (np.arange(n) + 0.5) / n

    def integrate(self, g):
        return float(np.sum(self.masses * g(self.centers)))

    def density_values(self):
        return self.masses * self.bins


def project_measure(scheme, gs: GibbsState, bins=4096, children_cap=None,
                    split_parts=32) -> EquilibriumMeasure:
    """Push branch masses through f^k for 0 <= k < tau into a histogram.

    Branch mass is spread across its depth-2 refinement for resolution, and
    each refinement piece is subdivided into `split_parts` equal parts whose
    endpoints are iterated together, so the image mass carries the Jacobian
    of f^k instead of being flattened.  Normalised by the total pushed mass
    (the Kac denominator tau-mean).
    """
    m = scheme.map
    hist = IntervalHistogram(bins)
    nb = len(scheme.branches)
    if children_cap is None:
        children_cap = max(8, min(200, 40_000 // max(nb, 1)))
    tau_mean = float((gs.branch_mu * gs.taus).sum())
    if tau_mean > 1e3:
        warnings.warn("tau-mean exceeds 1e3; tail truncation dominates",
                      ProjectionUnstableWarning)
    fracs = np.linspace(0.0, 1.0, split_parts + 1)
    for i, b in enumerate(scheme.branches):
        sel, clo, chi, masses = branch_children(gs, i, cap=children_cap)
        leftover = max(float(gs.branch_mu[i]) - float(masses.sum()), 0.0)
        # Remainder mass lives in the complement of the kept children (deep
        # continuations cluster there); spread it over those gaps by length.
        order = np.argsort(clo)
        glo, ghi = [], []
        cursor = b.lo
        for u, v in zip(clo[order], chi[order]):
            if u - cursor > 1e-12:
                glo.append(cursor)
                ghi.append(u)
            cursor = max(cursor, v)
        if b.hi - cursor > 1e-12:
            glo.append(cursor)
            ghi.append(b.hi)
        if glo and leftover > 0:
            glo, ghi = np.array(glo), np.array(ghi)
            gw = ghi - glo
            gm = leftover * gw / gw.sum()
            lo = np.concatenate([clo, glo])
            hi = np.concatenate([chi, ghi])
            ms = np.concatenate([masses, gm])
        else:
            lo, hi, ms = clo, chi, masses
        # Subdivide every piece; f^k is monotone on the branch for k <= tau,
        # so consecutive point images bound the part images exactly.
        pts = lo[:, None] + fracs * (hi - lo)[:, None]
        part_mass = np.repeat(ms / split_parts, split_parts)
        for _ in range(b.tau):
            u = pts[:, :-1].ravel()
            v = pts[:, 1:].ravel()
            hist.add_many(u, v, part_mass)
            pts = np.asarray(m.f(pts))
    values = hist.values()
    total = float(values.sum())
    if total <= 0:
        raise ValueError("projection produced no mass")
    return EquilibriumMeasure(m, gs.t, values / total, tau_mean)


def invariance_residual(m: IntervalMap, mu: EquilibriumMeasure, tests):
    """max over test observables g of |int g(f x) dmu - int g dmu|."""
    if not tests:
        raise ValueError("tests must be nonempty")
    c = mu.centers
    fc = np.asarray(m.f(c))
    worst = 0.0
    for g in tests.values():
        r = abs(float(np.sum(mu.masses * g(fc)) - np.sum(mu.masses * g(c))))
        worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# Reports used by the acceptance suites
# ---------------------------------------------------------------------------

def conformality_report(gs: GibbsState, max_continuations=64):
    """Per-branch conformal identity at depth 2.

    For each branch i and its refinement pieces C_ij, checks
    m(F(C_ij)) = int_(C_ij) e^(-Psi) dm summed over the strongest
    continuations j: the left side from the continuations' conformal
    masses, the right side by 3-point quadrature of e^(-Psi) against the
    conformal mass profile of C_ij.  Returns the worst relative error.
    """
    scheme = gs.scheme
    m = scheme.map
    taus = gs.taus
    order = np.argsort(-gs.branch_m, kind="stable")
    conts = np.sort(order[:max_continuations])
    los = np.array([scheme.branches[j].lo for j in conts])
    his = np.array([scheme.branches[j].hi for j in conts])
    lhs = float(gs.branch_m[conts].sum())
    worst = 0.0
    for i in range(len(scheme.branches)):
        # conformal mass profile of branch i over base cells
        cm = gs.nu_grid * gs._W[i]
        M = _cell_cumulative(gs, cm)
        piece_m = M(his) - M(los)
        quad = los[:, None] + np.array([0.25, 0.5, 0.75]) * (his - los)[:, None]
        pts = quad.ravel()
        logd = np.zeros_like(pts)
        for sym in scheme.branches[i].itinerary[::-1]:
            pts = m.invert(int(sym), pts)
            logd += np.log(np.maximum(np.abs(m.df(pts)), 1e-300))
        psi1 = gs.psi_eff(logd.reshape(len(conts), 3), float(taus[i]), 1)
        # piece_m is in raw operator units; bring it to branch_m's scale
        rhs = float(np.sum(np.exp(-psi1).mean(axis=1) * piece_m)) / gs._m_norm
        worst = max(worst, abs(lhs - rhs) / lhs)
    return worst


def gibbs_sandwich_report(gs: GibbsState, depth=None):
    """Largest two-sided ratio mu(C_w)/e^(Psi_k) over stored words.

    Three pulled-back base samples per word plus the periodic anchor.
    """
    depth = depth or gs.weight_depth
    words = [w for w in gs.mu_weights if len(w) <= depth]
    pts, sl_tot, _, lt = _pullback_samples(gs.scheme, words, (0.25, 0.5, 0.75))
    K = 1.0
    for r, w in enumerate(words):
        psi = gs.psi_eff(sl_tot[r], float(lt[r]), len(w))
        ratios = gs.mu_weights[w] / np.exp(psi)
        K = max(K, float(ratios.max()), float(1.0 / ratios.min()))
    return K


def tau_mean_consistency(gs: GibbsState):
    """Relative gap between the tau-mean from depth-1 masses and the one
    recomputed through the depth-2 refinement (children + gap remainder
    measured separately, so the gap quantifies refinement truncation)."""
    d1 = float((gs.branch_mu * gs.taus).sum())
    d2 = 0.0
    for i in range(len(gs.scheme.branches)):
        _, _, _, masses = branch_children(gs, i, cap=100_000, coverage=1.0)
        d2 += float(gs.taus[i]) * float(masses.sum())
    return abs(d2 - d1) / d1


def gibbs_to_csv(gs: GibbsState, path):
    with open(path, "w") as fh:
        fh.write("word,tau_sum,weight,psi_k\n")
        for w in sorted(gs.cylinder_weights):
            tau_sum = int(sum(gs.taus[i] for i in w))
            mw = gs.cylinder_weights[w]
            psi = math.log(mw) if mw > 0 else float("-inf")
            fh.write(f"{'-'.join(map(str, w))},{tau_sum},{fmt12(mw)},{fmt12(psi)}\n")


def measure_to_csv(mu: EquilibriumMeasure, path):
    with open(path, "w") as fh:
        fh.write("bin_left,mass\n")
        n = mu.bins
        for i, v in enumerate(mu.masses):
            fh.write(f"{fmt12(i / n)},{fmt12(v)}\n")
