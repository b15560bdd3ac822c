"""Command-line front end.

    ohmic-if expsum   --config run.ini --out results/
    ohmic-if plan     --config run.ini
    ohmic-if simulate --config run.ini --out results/ --override bath.alpha=0.05
    ohmic-if validate --seed 7

Without ``--config`` the shipped default configuration is used.  Exit codes:
0 success, 1 validation failure, 2 configuration or parameter error, 3 resource error.
The ``OHMIC_IF_THREADS`` environment variable caps the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import expsum as es_mod
from .config import SimConfig, load_config
from .dynamics import observables, propagate
from .errors import ConfigError, ContractError, OhmicIFError, ParameterError, ResourceError
from .fock import assemble_if_tensor, build_basis, plan_truncation
from .kernel import Discretization, eta_discrete
from .validation import run_validation, tensor_decomposition

log = logging.getLogger("ohmic_if")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3
THREADS_ENV = "OHMIC_IF_THREADS"


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


@dataclass
class RunReport:
    chi: float
    n_modes_total: int
    n_modes_used: int
    nu_star: float
    n_star: int
    per_mode_cap: int
    global_cap: int
    d_estimate: int
    d_actual: int
    certified_l1: float
    window_l1: Optional[float]
    trace_deviation: float
    final_norm: float
    max_norm_growth: float
    wall_time: float

    def text(self, with_time: bool = True) -> str:
        rows = [
            ("chi", _fmt(self.chi)),
            ("K (modes in decomposition)", str(self.n_modes_total)),
            ("modes in tensor", str(self.n_modes_used)),
            ("nu_star", _fmt(self.nu_star)),
            ("n_star (bound)", str(self.n_star)),
            ("caps used (per mode, global)", f"{self.per_mode_cap}, {self.global_cap}"),
            ("D estimate", str(self.d_estimate)),
            ("D actual", str(self.d_actual)),
            ("certified L1", _fmt(self.certified_l1)),
            ("L1 of tensor modes", "n/a" if self.window_l1 is None else _fmt(self.window_l1)),
            ("final trace deviation", _fmt(self.trace_deviation)),
            ("final state norm", _fmt(self.final_norm)),
            ("max norm growth per IF step", _fmt(self.max_norm_growth)),
        ]
        if with_time:
            rows.append(("wall time [s]", f"{self.wall_time:.3f}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def cmd_expsum(cfg: SimConfig, out: Path) -> int:
    full = es_mod.build(cfg.bath, cfg.total_time, cfg.epsilon, n_eps=cfg.n_eps, m_eps=cfg.m_eps)
    l1 = es_mod.certify_l1(full, cfg.bath, cfg.total_time)
    nu = es_mod.nu_values(full).nu
    rows = [
        (int(m.k), float(m.lambda_sq.real), float(m.lambda_sq.imag), float(m.gamma), float(m.omega), float(v))
        for m, v in zip(full.modes, nu)
    ]
    path = out / cfg.outputs["modes"]
    _write_csv(path, ["k", "re_lambda_sq", "im_lambda_sq", "gamma", "omega", "nu"], rows)
    with open(path, "a", newline="") as fh:
        fh.write(f"# chi={_fmt(full.chi)},K={full.n_modes},certified_l1={_fmt(l1)}\n")
    ok = l1 <= full.target_l1
    print(f"chi={_fmt(full.chi)} K={full.n_modes} certified_l1={_fmt(l1)} "
          f"target={_fmt(full.target_l1)} {'certified' if ok else 'NOT certified'}")
    print(f"wrote {path}")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_plan(cfg: SimConfig, out: Path) -> int:
    full, used = tensor_decomposition(cfg)
    plan = plan_truncation(full, cfg.bath.omega_c, cfg.total_time, cfg.epsilon,
                           per_mode_ceiling=cfg.per_mode_cap, global_cap=cfg.global_cap)
    rows = [
        ("chi", _fmt(plan.chi)),
        ("K", str(full.n_modes)),
        ("n_eps_plus_m_eps", str(plan.k_count)),
        ("nu_star", _fmt(plan.nu_star)),
        ("n_star", str(plan.n_star)),
        ("per_mode_cap", str(plan.per_mode_cap)),
        ("global_cap", str(plan.global_cap)),
        ("d_estimate", str(plan.d_estimate)),
        ("d_actual", str(plan.d_actual)),
        ("memory_bytes", str(plan.memory_bytes)),
        ("certified_l1", _fmt(full.certified_l1)),
    ]
    if cfg.mode_window is not None:
        sub = plan_truncation(used, cfg.bath.omega_c, cfg.total_time, cfg.epsilon,
                              per_mode_ceiling=cfg.per_mode_cap, global_cap=cfg.global_cap)
        rows += [
            ("window", f"{cfg.mode_window[0]}:{cfg.mode_window[1]}"),
            ("window_modes", str(used.n_modes)),
            ("window_d_actual", str(sub.d_actual)),
        ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {value}")
    path = out / cfg.outputs["plan"]
    _write_csv(path, ["quantity", "value"], rows)
    print(f"wrote {path}")
    return EXIT_OK


def simulate(cfg: SimConfig):
    """Run the configured evolution; returns ``(rows, RunReport)``."""
    t0 = time.perf_counter()
    full, used = tensor_decomposition(cfg)
    if used.n_modes:
        plan = plan_truncation(full, cfg.bath.omega_c, cfg.total_time, cfg.epsilon,
                               per_mode_ceiling=cfg.per_mode_cap, global_cap=cfg.global_cap)
        nu_star, n_star, d_est = plan.nu_star, plan.n_star, plan.d_estimate
        per_mode, gcap = plan.per_mode_cap, plan.global_cap
    else:
        nu_star, n_star, d_est, per_mode, gcap = 0.0, 0, 0, 0, 0
    basis = build_basis(2 * used.n_modes, per_mode, gcap)
    disc = Discretization(cfg.delta_t, cfg.n_steps)
    eta00 = float(eta_discrete(cfg.bath, cfg.delta_t, 0).real)
    tensor = assemble_if_tensor(used, disc, basis, eta00, shift=cfg.shift)
    result = propagate(tensor, cfg.spin_model(), cfg.rho0, cfg.n_steps)
    window_l1 = None
    if cfg.mode_window is not None and used.n_modes:
        window_l1 = es_mod.certify_l1(used, cfg.bath, cfg.total_time, abs_tol=1e-3 * full.target_l1)
    rows = []
    for i, (rho, nrm) in enumerate(zip(result.rhos, result.state_norms)):
        ob = observables(rho)
        rows.append([i * cfg.delta_t]
                    + [float(f(rho[a, b])) for a in range(2) for b in range(2) for f in (np.real, np.imag)]
                    + [ob.sz, ob.sx, ob.sy, ob.trace.real, ob.trace.imag, ob.purity, float(nrm)])
    final = result.rhos[-1]
    report = RunReport(
        chi=full.chi, n_modes_total=full.n_modes, n_modes_used=used.n_modes, nu_star=nu_star,
        n_star=n_star, per_mode_cap=per_mode, global_cap=gcap, d_estimate=d_est,
        d_actual=basis.dimension, certified_l1=float(full.certified_l1), window_l1=window_l1,
        trace_deviation=float(abs(np.trace(final) - 1)), final_norm=float(result.state_norms[-1]),
        max_norm_growth=float(result.max_norm_growth), wall_time=time.perf_counter() - t0,
    )
    return rows, report


TRAJECTORY_HEADER = [
    "t", "rho_uu_re", "rho_uu_im", "rho_ud_re", "rho_ud_im", "rho_du_re", "rho_du_im",
    "rho_dd_re", "rho_dd_im", "sz", "sx", "sy", "trace_re", "trace_im", "purity", "state_norm",
]


def cmd_simulate(cfg: SimConfig, out: Path) -> int:
    rows, report = simulate(cfg)
    traj = out / cfg.outputs["trajectory"]
    _write_csv(traj, TRAJECTORY_HEADER, rows)
    rep = out / cfg.outputs["report"]
    rep.write_text(report.text(with_time=False))
    print(report.text(), end="")
    print(f"wrote {traj} and {rep}")
    return EXIT_OK


def cmd_validate(cfg: SimConfig, seed: int) -> int:
    results = run_validation(cfg, seed)
    for res in results:
        print(res.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ohmic-if",
        description="Ohmic spin-boson influence functional as a bosonic matrix-product state",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("expsum", "build and certify the exponential-sum decomposition; write the mode CSV"),
        ("plan", "report the excitation cap and basis-size accounting"),
        ("simulate", "evolve the spin and write a trajectory CSV and run report"),
        ("validate", "run the oracle suite and print a pass/fail table"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="config file (default: shipped default)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for random checks (default: config, 42)")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config value; repeatable")
    return parser


def _thread_cap() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.override)
        seed = cfg.seed if args.seed is None else args.seed
        with threadpool_limits(limits=_thread_cap()):
            if args.command == "expsum":
                return cmd_expsum(cfg, args.out)
            if args.command == "plan":
                return cmd_plan(cfg, args.out)
            if args.command == "simulate":
                return cmd_simulate(cfg, args.out)
            return cmd_validate(cfg, seed)
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ParameterError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OhmicIFError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
