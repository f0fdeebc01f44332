"""Stability experiments: parameter ladders, weak* and L1 distances,
pressure curves, tail fits, matched-cylinder mass.

Each ladder rung runs the full pipeline (partition -> tower -> scheme ->
Gibbs state -> projection) for a perturbed parameter and is compared
against the base map.  Rungs are independent; failures are annotated per
rung and never silently dropped.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .cylinders import partition
from .errors import TailUnderresolvedError, IncomparableSchemesError, ThermoformError
from .inducing import build_scheme, choose_base
from .maps import FAMILY_PARAM, c2_distance, make_map
from .thermo import EquilibriumMeasure, GibbsState, gibbs_state, project_measure
from .tower import build_tower, transitive_component
from .util import fmt12


# ---------------------------------------------------------------------------
# Test dictionaries and weak* distances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestDictionary:
    """Named bounded observables on [0,1] (sup norm <= 1 after scaling)."""

    functions: tuple  # of (name, callable)

    def items(self):
        return self.functions

    def __len__(self):
        return len(self.functions)


def chebyshev_dictionary(n=8) -> TestDictionary:
    """First n Chebyshev polynomials rescaled to [0,1]."""

    def make(j):
        def g(x):
            return np.cos(j * np.arccos(np.clip(2.0 * np.asarray(x) - 1.0, -1.0, 1.0)))

        return g

    return TestDictionary(tuple((f"T{j}", make(j)) for j in range(n)))


def weak_star_vector(a: EquilibriumMeasure, b: EquilibriumMeasure,
                     dictionary: TestDictionary):
    """Per-observable |int g da - int g db| (same grid required)."""
    if a.bins != b.bins:
        raise ValueError("measures on different grids")
    c = a.centers
    return tuple(
        abs(float(np.sum((a.masses - b.masses) * g(c))))
        for _, g in dictionary.items()
    )


def weak_star_distance(a, b, dictionary: TestDictionary):
    """max over the dictionary of |int g da - int g db|."""
    return max(weak_star_vector(a, b, dictionary))


# ---------------------------------------------------------------------------
# Tail fits
# ---------------------------------------------------------------------------

def _fit_line(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef[0], coef[1], r2


def tail_profile(scheme, gs: GibbsState, N_grid=None):
    """Fit of the inducing-time tail mu_F(tau > N).

    Least squares of log tail against N (exponential) and against log N
    (polynomial); returns (C, rate, kind, r2) for the better model.
    """
    taus = gs.taus
    if N_grid is None:
        N_grid = list(range(2, int(taus.max()), 2))
    mu = gs.branch_mu
    pts = []
    for N in N_grid:
        tail = float(mu[taus > N].sum())
        if tail > 1e-300 and N < taus.max():
            pts.append((N, tail))
    if len(pts) < 3:
        raise TailUnderresolvedError(f"{len(pts)} usable tail points")
    N = np.array([p[0] for p in pts], dtype=float)
    logt = np.log(np.array([p[1] for p in pts]))
    se, ie, r2e = _fit_line(N, logt)
    sp_, ip_, r2p = _fit_line(np.log(N), logt)
    if r2e >= r2p:
        return math.exp(ie), -se, "exponential", r2e
    return math.exp(ip_), -sp_, "polynomial", r2p


# ---------------------------------------------------------------------------
# Matched-cylinder mass
# ---------------------------------------------------------------------------

def cylinder_mass_mismatch(scheme_a, scheme_b, gs_b: GibbsState, tau_cap):
    """gs_b-mass of the symmetric differences of itinerary-matched branches
    plus the mass of unmatched branches, up to inducing time tau_cap."""
    if scheme_a.base_itinerary != scheme_b.base_itinerary:
        raise IncomparableSchemesError(
            f"bases {scheme_a.base_itinerary} vs {scheme_b.base_itinerary}"
        )
    bys_a = {b.itinerary: b for b in scheme_a.branches if b.tau <= tau_cap}
    total = 0.0
    matched_a = set()
    dens_b = np.array([
        float(gs_b.branch_mu[j]) / max(b.width, 1e-300)
        for j, b in enumerate(scheme_b.branches)
    ])
    for j, bb in enumerate(scheme_b.branches):
        if bb.tau > tau_cap:
            continue
        ba = bys_a.get(bb.itinerary)
        if ba is None:
            total += float(gs_b.branch_mu[j])
            continue
        matched_a.add(bb.itinerary)
        if ba.hi <= bb.lo or bb.hi <= ba.lo:
            sym = ba.width + bb.width
        else:
            sym = abs(ba.lo - bb.lo) + abs(ba.hi - bb.hi)
        total += dens_b[j] * sym
    for itin, ba in bys_a.items():
        if itin in matched_a:
            continue
        # a-branch with no b-partner: weigh its interval with b's density
        for j, bb in enumerate(scheme_b.branches):
            lo = max(ba.lo, bb.lo)
            hi = min(ba.hi, bb.hi)
            if hi > lo:
                total += dens_b[j] * (hi - lo)
    return total


# ---------------------------------------------------------------------------
# The sweep harness
# ---------------------------------------------------------------------------

SWEEP_DEFAULTS = {
    "t_values": (1.0,),
    "ladder": (0.05, 0.02, 0.01, 0.005),
    "ladder_direction": 1.0,
    "base_depth": 2,
    "delta": 0.1,
    "n_max": 20,
    "bins": 4096,
    "tower_height": 8,
    "pressure_grid": 256,
    "split_parts": 8,
    "tau_cap": 8,
    "weight_depth": 1,
    "variation_kmax": 4,
    "require_boundary": False,
    "c2_grid": 1000,
    "dictionary_size": 8,
    "seed": 2026,
    "threads": 1,
}


@dataclass
class RungResult:
    offset: float
    parameter: float
    t: float
    c2: float = math.nan
    pressure: float = math.nan
    delta_p: float = math.nan
    weak_star: float = math.nan
    ws_vector: tuple = ()
    l1: float = None
    tail_c: float = math.nan
    tail_rate: float = math.nan
    tail_kind: str = ""
    tail_r2: float = math.nan
    mismatch: float = math.nan
    gibbs_k: float = math.nan
    coverage: float = math.nan
    branches: int = 0
    error: str = ""


@dataclass
class StabilityReport:
    family: str
    parameter: float
    base_itinerary: tuple
    t_values: tuple
    ladder: tuple
    rows: list = field(default_factory=list)
    base_pressure: dict = field(default_factory=dict)  # t -> P at the base map


def _make_member(family, parameter):
    key = FAMILY_PARAM[family]
    return make_map(family, {key: parameter} if key else {})


def _pipeline_state(family, parameter, base_itin, cfg):
    """partition -> tower -> scheme for one family member."""
    m = _make_member(family, parameter)
    tw = build_tower(m, cfg["tower_height"])
    transitive_component(tw)
    part = partition(m, cfg["base_depth"])
    cands = [c for c in part.cylinders if c.itinerary == base_itin]
    if not cands:
        raise IncomparableSchemesError(
            f"no cylinder with itinerary {base_itin} at parameter {parameter}"
        )
    scheme = build_scheme(m, tw, cands[0], delta=cfg["delta"], n_max=cfg["n_max"])
    return m, scheme


def _equilibrium(scheme, t, cfg):
    gs = gibbs_state(
        scheme, t,
        weight_depth=cfg["weight_depth"], grid=cfg["pressure_grid"],
        variation_kmax=cfg["variation_kmax"],
    )
    mu = project_measure(scheme, gs, bins=cfg["bins"],
                         split_parts=cfg["split_parts"])
    return gs, mu


def run_sweep(config) -> StabilityReport:
    """Execute the stability experiment described by the config mapping.

    Keys: family, parameter, plus SWEEP_DEFAULTS overrides.  Deterministic
    given the config; per-rung errors are annotated, never dropped.
    """
    cfg = dict(SWEEP_DEFAULTS)
    cfg.update(config)
    family = cfg["family"]
    parameter = float(cfg["parameter"])
    ladder = tuple(float(x) for x in cfg["ladder"])
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder offsets must be strictly decreasing")
    t_values = tuple(float(t) for t in cfg["t_values"])
    dictionary = chebyshev_dictionary(cfg["dictionary_size"])

    base_map = _make_member(family, parameter)
    base_tower = build_tower(base_map, cfg["tower_height"])
    transitive_component(base_tower)
    base_cyl = choose_base(base_map, base_tower, cfg["base_depth"],
                           delta=cfg["delta"],
                           require_boundary=cfg["require_boundary"])
    base_itin = base_cyl.itinerary
    base_scheme = build_scheme(base_map, base_tower, base_cyl,
                               delta=cfg["delta"], n_max=cfg["n_max"])
    base_states = {t: _equilibrium(base_scheme, t, cfg) for t in t_values}

    report = StabilityReport(family, parameter, base_itin, t_values, ladder)
    report.base_pressure = {t: base_states[t][0].pressure for t in t_values}

    tasks = []
    for off in ladder:
        rung_param = parameter + cfg["ladder_direction"] * off
        tasks.append((off, rung_param))

    def run_rung(off, rung_param):
        rows = []
        try:
            rung_map, rung_scheme = _pipeline_state(family, rung_param,
                                                    base_itin, cfg)
            c2 = c2_distance(rung_map, base_map, cfg["c2_grid"])
        except ThermoformError as e:
            for t in t_values:
                rows.append(RungResult(off, rung_param, t,
                                       error=f"{type(e).__name__}: {e}"))
            return rows
        for t in t_values:
            row = RungResult(off, rung_param, t, c2=c2)
            try:
                gs, mu = _equilibrium(rung_scheme, t, cfg)
                base_gs, base_mu = base_states[t]
                row.pressure = gs.pressure
                row.delta_p = abs(gs.pressure - base_gs.pressure)
                vec = weak_star_vector(mu, base_mu, dictionary)
                row.ws_vector = vec
                row.weak_star = max(vec)
                if t == 1.0:
                    row.l1 = float(np.abs(mu.masses - base_mu.masses).sum())
                row.tail_c, row.tail_rate, row.tail_kind, row.tail_r2 = \
                    tail_profile(rung_scheme, gs)
                row.mismatch = cylinder_mass_mismatch(
                    base_scheme, rung_scheme, gs, cfg["tau_cap"])
                row.gibbs_k = gs.gibbs_constant
                row.coverage = rung_scheme.coverage
                row.branches = len(rung_scheme.branches)
            except ThermoformError as e:
                row.error = f"{type(e).__name__}: {e}"
            rows.append(row)
        return rows

    threads = int(cfg.get("threads", 1))
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as ex:
            futures = [ex.submit(_rung_worker, dict(cfg), off, p, base_itin)
                       for off, p in tasks]
            chunks = [f.result() for f in futures]
    else:
        chunks = [run_rung(off, p) for off, p in tasks]
    for chunk in chunks:
        report.rows.extend(chunk)
    return report


def _rung_worker(cfg, off, rung_param, base_itin):
    """Process-pool entry; rebuilds the base states in the worker."""
    sub = dict(cfg)
    sub["ladder"] = (off,)
    sub["threads"] = 1
    rep = run_sweep(sub)
    return [r for r in rep.rows]


REPORT_COLUMNS = (
    "family", "parameter", "offset", "rung_parameter", "t", "c2_distance",
    "pressure", "delta_p", "weak_star", "l1_density", "tail_c", "tail_rate",
    "tail_kind", "tail_r2", "mismatch_mass", "gibbs_k", "coverage",
    "branches", "error",
)


def report_to_csv(report: StabilityReport, path, dictionary_size=8):
    ws_cols = [f"ws_T{j}" for j in range(dictionary_size)]
    with open(path, "w") as fh:
        fh.write(",".join(REPORT_COLUMNS + tuple(ws_cols)) + "\n")
        for r in report.rows:
            vals = [
                report.family, fmt12(report.parameter), fmt12(r.offset),
                fmt12(r.parameter), fmt12(r.t), fmt12(r.c2), fmt12(r.pressure),
                fmt12(r.delta_p), fmt12(r.weak_star),
                fmt12(r.l1) if r.l1 is not None else "",
                fmt12(r.tail_c), fmt12(r.tail_rate), r.tail_kind,
                fmt12(r.tail_r2), fmt12(r.mismatch), fmt12(r.gibbs_k),
                fmt12(r.coverage), str(r.branches), r.error,
            ]
            ws = [fmt12(v) for v in r.ws_vector]
            ws += [""] * (dictionary_size - len(ws))
            fh.write(",".join(str(v) for v in vals + ws) + "\n")
