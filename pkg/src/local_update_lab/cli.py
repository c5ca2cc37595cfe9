"""Command-line interface.

Subcommands:

  frontier   closed-form Pareto frontier sweeps (CSV/JSON/SVG)
  maml-sim   simulated last-gradient frontiers on random matrices
  simulate   deterministic full-participation trajectories (CSV/JSON)
  verify     run the analytic verification suites (JSON report)
  mad-check  mean-absolute-deviation suites only (JSON/CSV)
  tightness  the scalar distance construction (b2) and the diagonal
             condition-number equalities (b3)

Every command is deterministic given its flags and seed: rerunning writes
byte-identical output. The seed defaults to the LUL_SEED environment
variable, then 0. Exit codes: 0 success, 2 flag or parse error, 3
precondition error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bounds as tb
from . import quadratics as qw
from .engine import (
    RunConfig,
    ServerOptSpec,
    auto_tune,
    client_update,
    export_trajectory_csv,
    run,
)
from .errors import (
    ConditioningError,
    DivergenceError,
    InfeasibleSpectrumError,
    InvalidInputError,
    LocalUpdateError,
    PopulationFormatError,
    SingularMatrixError,
)
from .frontier import (
    Frontier,
    SweepSpec,
    default_gamma_grid,
    default_k_grid,
    frontier_csv,
    frontier_json_payload,
    simulated_maml_sweep,
    sweep,
)
from .matrices import eigh, keyed_rng
from .quadratics import Population, WeightScheme
from .svgplot import frontier_svg
from .verify import SUITES, random_population, run_checks

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_VERIFY_FAILED = 4

_THETA_CHOICES = ("one", "first-k", "k-only", "maml2k1")


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("LUL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise InvalidInputError(f"LUL_SEED is not an integer: {env!r}") from exc
    return 0


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _json_dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _theta_from_flags(name: str, k: int) -> WeightScheme:
    if name == "one":
        return WeightScheme.single()
    if name == "first-k":
        return WeightScheme.first_k(k)
    if name == "k-only":
        return WeightScheme.last_only(k)
    if name == "maml2k1":
        return WeightScheme.maml_equivalent(k)
    raise InvalidInputError(f"unknown theta scheme {name!r}, expected one of {_THETA_CHOICES}")


def _render_frontier(frontier: Frontier, fmt: str, title: str, out: str | None) -> None:
    if fmt == "csv":
        _emit(frontier_csv(frontier), out)
    elif fmt == "json":
        _emit(_json_dumps(frontier_json_payload(frontier)), out)
    elif fmt == "svg":
        _emit(frontier_svg(frontier, title=title), out)
    else:
        raise InvalidInputError(f"unsupported format {fmt!r}")


# ---------------------------------------------------------------------------
# frontier
# ---------------------------------------------------------------------------


def cmd_frontier(args) -> int:
    seed = _resolve_seed(args.seed)
    gamma = args.gamma if args.gamma is not None else 1.0 / (2.0 * args.ell)
    optimizers = tuple(args.optimizers.split(","))
    family = {"first-k": "fedavg_theta", "k-only": "maml_theta"}[args.family]
    if args.vary == "K":
        grid = default_k_grid(args.k_max, args.points)
        grid = grid[grid >= args.k_min]
        spec = SweepSpec(
            family=family, vary="K", grid=grid, mu=args.mu, ell=args.ell,
            alpha=args.alpha, gamma=gamma, optimizers=optimizers,
            kappa_source=args.kappa_source, seed=seed,
        )
    elif args.vary == "gamma":
        gamma_max = args.gamma_max
        if gamma_max is None:
            gamma_max = (1.0 - 1e-9) / (args.ell + args.alpha)
        if args.gamma_min is None:
            grid = default_gamma_grid(gamma_max, args.points)
        else:
            grid = np.logspace(np.log10(args.gamma_min), np.log10(gamma_max), args.points)
        spec = SweepSpec(
            family=family, vary="gamma", grid=grid, mu=args.mu, ell=args.ell,
            alpha=args.alpha, k=args.k, optimizers=optimizers,
            kappa_source=args.kappa_source, seed=seed,
        )
    else:  # alpha
        if not args.alphas:
            raise InvalidInputError("--vary alpha needs --alphas with a comma-separated list")
        try:
            grid = np.array(sorted(float(v) for v in args.alphas.split(",")))
        except ValueError as exc:
            raise InvalidInputError(f"bad --alphas value: {exc}") from exc
        spec = SweepSpec(
            family=family, vary="alpha", grid=grid, mu=args.mu, ell=args.ell,
            gamma=gamma, k=args.k, optimizers=optimizers,
            kappa_source=args.kappa_source, seed=seed,
        )
    frontier = sweep(spec)
    title = f"frontier {args.family} mu={args.mu:g} ell={args.ell:g} vary {args.vary}"
    _render_frontier(frontier, args.format, title, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# maml-sim
# ---------------------------------------------------------------------------


def cmd_maml_sim(args) -> int:
    seed = _resolve_seed(args.seed)
    grid = default_k_grid(args.k_max, args.points)
    grid = grid[grid >= args.k_min]
    frontier = simulated_maml_sweep(
        dim=args.dim, mu=args.mu, ell=args.ell, alpha=args.alpha, gamma=args.gamma,
        k_grid=grid, seed=seed, optimizer=args.optimizer,
    )
    title = f"simulated maml dim={args.dim} mu={args.mu:g} ell={args.ell:g}"
    _render_frontier(frontier, args.format, title, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _simulate_population(args, seed: int) -> Population:
    if args.population is not None:
        return qw.load_population(args.population)
    rng = keyed_rng(seed, 0xA0, 0)
    return random_population(
        rng,
        min_dim=args.dim,
        max_dim=args.dim,
        min_clients=args.n_clients,
        max_clients=args.n_clients,
        mu=args.mu,
        ell=args.ell,
        c_radius=args.c_radius,
    )


def _auto_rounds(rho: float, d0: float, kind: str) -> int:
    """Rounds needed to push rho^T * d0 below 1e-9, with momentum headroom."""
    if d0 <= 1e-9 or rho == 0.0:
        return 1
    rounds = int(np.ceil(np.log(1e-9 / d0) / np.log(rho))) if rho < 1.0 else 100000
    if kind != "plain":
        rounds *= 2
    return int(min(max(rounds, 1), 200000))


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    pop = _simulate_population(args, seed)
    theta = _theta_from_flags(args.theta, args.k)
    qw.require_contractive(pop.bounds, args.alpha, args.gamma)
    dec = eigh(qw.surrogate_hessian(pop, args.alpha, args.gamma, theta))
    if args.eta is not None:
        opt = ServerOptSpec(kind=args.optimizer, step=args.eta, momentum=args.beta)
    else:
        opt = auto_tune(args.optimizer, dec.lambda_max, dec.lambda_min)
    if args.x0 == "zeros":
        x0 = np.zeros(pop.dim)
    else:
        try:
            x0 = np.array([float(v) for v in args.x0.split(",")])
        except ValueError as exc:
            raise InvalidInputError(f"bad --x0 value: {exc}") from exc
    rounds = args.rounds
    if rounds is None:
        x_star = qw.surrogate_minimizer(pop, args.alpha, args.gamma, theta)
        rho = tb.rho_from_kappa(dec.lambda_max / dec.lambda_min, args.optimizer)
        rounds = _auto_rounds(rho, float(np.linalg.norm(x0 - x_star)), args.optimizer)
    cfg = RunConfig(
        alpha=args.alpha, gamma=args.gamma, theta=theta, rounds=rounds, seed=seed,
        mode="deterministic",
    )
    traj = run(pop, x0, cfg, opt)
    if args.format == "csv":
        _emit(export_trajectory_csv(traj, pop, args.alpha, args.gamma, theta), args.out)
    elif args.format == "json":
        x_surr = qw.surrogate_minimizer(pop, args.alpha, args.gamma, theta)
        x_emp = qw.empirical_minimizer(pop)
        payload = {
            "schema_version": 1,
            "rounds": traj.rounds,
            "dim": pop.dim,
            "optimizer": {"kind": opt.kind, "step": opt.step, "momentum": opt.momentum},
            "iterates": traj.iterates.tolist(),
            "dist_to_surrogate_opt": np.linalg.norm(traj.iterates - x_surr, axis=1).tolist(),
            "dist_to_empirical_opt": np.linalg.norm(traj.iterates - x_emp, axis=1).tolist(),
        }
        _emit(_json_dumps(payload), args.out)
    else:
        raise InvalidInputError(f"unsupported format {args.format!r} for simulate")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify / mad-check
# ---------------------------------------------------------------------------


def _population_file_checks(path: str) -> list[dict]:
    pop = qw.load_population(path)
    alpha, gamma = 0.0, 0.5 / pop.bounds.ell
    theta = WeightScheme.first_k(5)
    checks = []
    worst = 0.0
    cfg = RunConfig(alpha=alpha, gamma=gamma, theta=theta, rounds=1)
    x = np.ones(pop.dim)
    for client in pop.clients:
        single = Population.uniform([client], bounds=pop.bounds)
        predicted = qw.surrogate_gradient(single, x, alpha, gamma, theta)
        worst = max(worst, float(np.linalg.norm(client_update(client, x, cfg) - predicted)))
    checks.append(
        {
            "name": "population_theorem1",
            "instances": pop.n_clients,
            "max_violation": worst,
            "threshold": 1e-9,
            "pass": bool(worst <= 1e-9),
        }
    )
    measured = qw.minimizer_distance(pop, alpha, gamma, theta)
    bound = tb.distance_bound(pop, alpha, gamma, theta)
    checks.append(
        {
            "name": "population_lemma5",
            "instances": 1,
            "max_violation": float(measured - bound),
            "threshold": 1e-9,
            "pass": bool(measured - bound <= 1e-9),
        }
    )
    return checks


def cmd_verify(args) -> int:
    seed = _resolve_seed(args.seed)
    report = run_checks(only=args.only, seed=seed, trials=args.trials)
    if args.population is not None:
        report["checks"].extend(_population_file_checks(args.population))
        report["all_pass"] = bool(all(c["pass"] for c in report["checks"]))
    _emit(_json_dumps(report), args.out)
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY_FAILED


def cmd_mad_check(args) -> int:
    seed = _resolve_seed(args.seed)
    report = run_checks(only="mad_scalar,mad_matrix", seed=seed, trials=args.trials)
    if args.format == "json":
        _emit(_json_dumps(report), args.out)
    elif args.format == "csv":
        lines = ["name,instances,max_violation,threshold,pass"]
        for c in report["checks"]:
            lines.append(
                f"{c['name']},{c['instances']},{format(c['max_violation'], '.17g')},"
                f"{format(c['threshold'], '.17g')},{str(c['pass']).lower()}"
            )
        _emit("\n".join(lines) + "\n", args.out)
    else:
        raise InvalidInputError(f"unsupported format {args.format!r} for mad-check")
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# tightness
# ---------------------------------------------------------------------------


def cmd_tightness(args) -> int:
    if args.family == "b2":
        measured, bound = tb.tightness_case_b2(args.k, args.p)
        limit = 8.0 * args.p / (3.0 * args.p + 1.0)
        payload = {
            "schema_version": 1,
            "family": "b2",
            "k": args.k,
            "p": args.p,
            "measured_distance": measured,
            "bound_2c": bound,
            "ratio": measured / bound if bound > 0 else 0.0,
            "large_k_limit": limit,
        }
    else:  # b3
        mu, ell, alpha, gamma, k = args.mu, args.ell, args.alpha, args.gamma, args.k
        client = qw.ClientModel(a_matrix=np.diag([ell, mu]), center=np.zeros(2))
        from .matrices import SpectrumBounds

        pop = Population.uniform([client], bounds=SpectrumBounds(mu, ell, 0.0))
        rows = {}
        fed = tb.kappa_exact(pop, alpha, gamma, WeightScheme.first_k(k))
        rows["first_k"] = {
            "kappa_exact": fed.kappa_exact,
            "kappa_bound": fed.kappa_bound,
            "gap": abs(fed.kappa_exact - fed.kappa_bound) if fed.kappa_bound else None,
        }
        if gamma * (k * ell + alpha) < 1.0:
            mam = tb.kappa_exact(pop, alpha, gamma, WeightScheme.last_only(k))
            rows["last_only"] = {
                "kappa_exact": mam.kappa_exact,
                "kappa_bound": mam.kappa_bound,
                "gap": abs(mam.kappa_exact - mam.kappa_bound) if mam.kappa_bound else None,
            }
        payload = {
            "schema_version": 1,
            "family": "b3",
            "mu": mu,
            "ell": ell,
            "alpha": alpha,
            "gamma": gamma,
            "k": k,
            "schemes": rows,
        }
    if args.format == "json":
        _emit(_json_dumps(payload), args.out)
    else:
        raise InvalidInputError(f"unsupported format {args.format!r} for tightness")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lul",
        description="Local update methods on quadratic models: surrogate analysis, "
        "simulation, and convergence-accuracy frontiers.",
        epilog="Seed resolution: --seed flag, then LUL_SEED environment variable, then 0.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("frontier", help="closed-form Pareto frontier sweep")
    p.add_argument("--mu", type=float, required=True, help="strong convexity bound mu")
    p.add_argument("--ell", type=float, required=True, help="smoothness bound L")
    p.add_argument("--alpha", type=float, default=0.0, help="proximal strength (default 0)")
    p.add_argument("--gamma", type=float, default=None,
                   help="client learning rate (default (2L)^-1; fixed value when varying K/alpha)")
    p.add_argument("--family", choices=("first-k", "k-only"), default="first-k",
                   help="weight scheme family: all gradients (first-k) or last gradient (k-only)")
    p.add_argument("--vary", choices=("K", "gamma", "alpha"), default="K", help="sweep axis")
    p.add_argument("--k", type=int, default=100, help="fixed K when varying gamma/alpha")
    p.add_argument("--k-min", type=int, default=1, help="smallest K on the grid")
    p.add_argument("--k-max", type=int, default=10**6, help="largest K on the grid")
    p.add_argument("--gamma-min", type=float, default=None, help="smallest gamma on the grid")
    p.add_argument("--gamma-max", type=float, default=None,
                   help="largest gamma on the grid (default just below 1/(L+alpha))")
    p.add_argument("--alphas", type=str, default=None, help="comma list of alphas when varying alpha")
    p.add_argument("--points", type=int, default=60, help="grid size (default 60)")
    p.add_argument("--optimizers", type=str, default="plain",
                   help="comma subset of plain,nesterov,heavy_ball")
    p.add_argument("--kappa-source", choices=("closed_form",), default="closed_form",
                   help="condition number source (spectral sweeps: use maml-sim)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    p.add_argument("--out", type=str, default=None, help="output path (default stdout)")
    p.set_defaults(handler=cmd_frontier)

    p = sub.add_parser("maml-sim", help="simulated last-gradient frontier on random matrices")
    p.add_argument("--dim", type=int, required=True, help="matrix dimension")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--ell", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10**6)
    p.add_argument("--points", type=int, default=60)
    p.add_argument("--optimizer", choices=tb.OPTIMIZER_KINDS, default="plain")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=cmd_maml_sim)

    p = sub.add_parser("simulate", help="deterministic full-participation trajectory")
    p.add_argument("--population", type=str, default=None, help="population file to load")
    p.add_argument("--dim", type=int, default=4, help="dimension of the random population")
    p.add_argument("--n-clients", type=int, default=4, help="clients in the random population")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--ell", type=float, default=10.0)
    p.add_argument("--c-radius", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--theta", choices=_THETA_CHOICES, required=True)
    p.add_argument("--k", type=int, default=5, help="K for first-k/k-only/maml2k1 schemes")
    p.add_argument("--optimizer", choices=tb.OPTIMIZER_KINDS, default="plain")
    p.add_argument("--eta", type=float, default=None,
                   help="server step size (default: auto-tune to the surrogate spectrum)")
    p.add_argument("--beta", type=float, default=0.0, help="server momentum when --eta is given")
    p.add_argument("--rounds", type=int, default=None,
                   help="communication rounds (default: enough to reach 1e-9 of the surrogate optimum)")
    p.add_argument("--x0", type=str, default="zeros", help="'zeros' or comma-separated components")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("verify", help="run analytic verification suites")
    p.add_argument("--only", type=str, default=None,
                   help=f"comma list of suite name prefixes; suites: {', '.join(SUITES)}")
    p.add_argument("--trials", type=int, default=None, help="override instance count per suite")
    p.add_argument("--population", type=str, default=None,
                   help="also check this population file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("mad-check", help="mean-absolute-deviation bound suites")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=cmd_mad_check)

    p = sub.add_parser("tightness", help="tightness constructions")
    p.add_argument("--family", choices=("b2", "b3"), required=True,
                   help="b2: scalar distance construction; b3: diagonal kappa equalities")
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--p", type=float, default=0.999, help="weight of the first client (b2)")
    p.add_argument("--mu", type=float, default=1.0, help="(b3)")
    p.add_argument("--ell", type=float, default=10.0, help="(b3)")
    p.add_argument("--alpha", type=float, default=0.0, help="(b3)")
    p.add_argument("--gamma", type=float, default=0.01, help="(b3)")
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(handler=cmd_tightness)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except PopulationFormatError as exc:
        print(f"error: population file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConditioningError, InfeasibleSpectrumError, SingularMatrixError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except LocalUpdateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
