"""Command-line frontend: wires configs to pipeline stages and writes reports.

Exit codes: 0 success, 1 stage error, 2 config error.  All numeric output
is printed with 12 significant digits.
"""

import argparse
import os
import sys

from .config import ExperimentConfig, load_config
from .cylinders import partition, partition_to_csv
from .density import lyapunov, measure_density
from .errors import ConfigError, ThermoformError
from .inducing import build_scheme, choose_base, scheme_to_csv
from .maps import FAMILY_PARAM, make_map
from .stability import report_to_csv, run_sweep
from .thermo import gibbs_state, measure_to_csv, project_measure, solve_pressure
from .tower import build_tower, tower_to_dot, transitive_component
from .util import fmt12


def _member(cfg: ExperimentConfig):
    key = FAMILY_PARAM[cfg["family"]]
    params = {key: cfg["parameter"]} if key else {}
    return make_map(cfg["family"], params)


def _scheme(cfg: ExperimentConfig):
    m = _member(cfg)
    tower = build_tower(m, cfg["height"], cfg["max_domains"])
    transitive_component(tower)
    base = choose_base(m, tower, cfg["base_depth"], delta=cfg["delta"],
                       require_boundary=cfg["require_boundary"])
    scheme = build_scheme(m, tower, base, delta=cfg["delta"],
                          n_max=cfg["n_max"])
    return m, tower, scheme


def cmd_partition(cfg, out):
    m = _member(cfg)
    part = partition(m, cfg["base_depth"])
    path = os.path.join(out, "partition.csv")
    partition_to_csv(part, path)
    print(f"partition level {cfg['base_depth']}: {len(part)} cylinders -> {path}")
    return 0


def cmd_tower(cfg, out):
    m = _member(cfg)
    tower = build_tower(m, cfg["height"], cfg["max_domains"])
    transitive_component(tower)
    path = os.path.join(out, "tower.dot")
    tower_to_dot(tower, path)
    edges = sum(len(v) for v in tower.edges.values())
    print(f"tower height {cfg['height']}: {tower.n_domains} domains, "
          f"{edges} edges, transitive {len(tower.transitive_ids)} -> {path}")
    return 0


def cmd_induce(cfg, out):
    _, _, scheme = _scheme(cfg)
    path = os.path.join(out, "scheme.csv")
    scheme_to_csv(scheme, path)
    print(f"scheme base {scheme.base_itinerary}: {len(scheme.branches)} "
          f"branches, coverage {fmt12(scheme.coverage)} -> {path}")
    return 0


def cmd_pressure(cfg, out):
    _, _, scheme = _scheme(cfg)
    path = os.path.join(out, "pressure.csv")
    with open(path, "w") as fh:
        fh.write("t,pressure\n")
        for t in cfg["t_values"]:
            p = solve_pressure(scheme, t, bracket=(cfg["bracket_lo"],
                                                   cfg["bracket_hi"]),
                               tol=cfg["tol"], estimator=cfg["estimator"],
                               grid=cfg["grid"])
            print(f"t={fmt12(t)} P={fmt12(p)}")
            fh.write(f"{fmt12(t)},{fmt12(p)}\n")
    return 0


def cmd_equilibrium(cfg, out):
    m, _, scheme = _scheme(cfg)
    for t in cfg["t_values"]:
        gs = gibbs_state(scheme, t, weight_depth=cfg["weight_depth"],
                         grid=cfg["grid"], rho_tol=cfg["rho_tol"],
                         rho_iters=cfg["rho_iters"],
                         tail_allowance=cfg["tail_allowance"],
                         variation_kmax=cfg["variation_kmax"],
                         estimator=cfg["estimator"])
        mu = project_measure(scheme, gs, bins=cfg["bins"],
                             split_parts=cfg["split_parts"])
        tag = fmt12(t).replace(".", "p")
        path = os.path.join(out, f"equilibrium_t{tag}.csv")
        measure_to_csv(mu, path)
        lam = lyapunov(m, measure_density(mu))
        print(f"t={fmt12(t)} P={fmt12(gs.pressure)} tau_mean={fmt12(mu.tau_mean)} "
              f"lyapunov={fmt12(lam)} K={fmt12(gs.gibbs_constant)} -> {path}")
        if cfg["plot"]:
            from .svgplot import line_chart

            dens = measure_density(mu)
            line_chart(os.path.join(out, f"equilibrium_t{tag}.svg"),
                       [("density", dens.centers, dens.values)],
                       title=f"equilibrium density t={fmt12(t)}",
                       xlabel="x", ylabel="density")
    return 0


def cmd_stability(cfg, out):
    sweep = cfg.sweep_config()
    report = run_sweep(sweep)
    path = os.path.join(out, "stability.csv")
    report_to_csv(report, path)
    print(f"stability sweep {report.family} base {fmt12(report.parameter)}: "
          f"{len(report.rows)} rows -> {path}")
    for r in report.rows:
        status = r.error if r.error else "ok"
        print(f"  offset={fmt12(r.offset)} t={fmt12(r.t)} "
              f"weak*={fmt12(r.weak_star)} dP={fmt12(r.delta_p)} [{status}]")
    if cfg["plot"]:
        from .svgplot import line_chart

        for t in report.t_values:
            rows = [r for r in report.rows if r.t == t and not r.error]
            if not rows:
                continue
            offs = [r.offset for r in rows]
            tag = fmt12(t).replace(".", "p")
            line_chart(os.path.join(out, f"stability_weakstar_t{tag}.svg"),
                       [("weak*", offs, [r.weak_star for r in rows])],
                       title=f"weak* distance vs offset (t={fmt12(t)})",
                       xlabel="log10 offset", ylabel="log10 distance",
                       logx=True, logy=True)
            if t == 1.0:
                line_chart(os.path.join(out, "stability_l1.svg"),
                           [("L1", offs, [r.l1 for r in rows])],
                           title="L1 density distance vs offset",
                           xlabel="log10 offset", ylabel="log10 distance",
                           logx=True, logy=True)
    return 0


_COMMANDS = {
    "partition": cmd_partition,
    "tower": cmd_tower,
    "induce": cmd_induce,
    "pressure": cmd_pressure,
    "equilibrium": cmd_equilibrium,
    "stability": cmd_stability,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="thermoform",
        description="Thermodynamic formalism pipelines for interval maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--plot", action="store_true", help="write SVG charts")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.values["out_dir"] = args.out
        if args.plot:
            cfg.values["plot"] = True
        if args.threads is not None:
            cfg.values["threads"] = args.threads
        if args.seed is not None:
            cfg.values["seed"] = args.seed
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg, out)
    except ThermoformError as e:
        print(f"stage error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
