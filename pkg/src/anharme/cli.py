"""Command-line front end.

Subcommands:

* ``derive``   - build the requested master-equation flavors and write them
  as JSON (byte-stable across runs for exact-mode content);
* ``simulate`` - integrate one or more flavors and write a CSV time series
  plus a metadata sidecar;
* ``verify``   - re-derive the symbolic golden results from scratch and
  report residuals as machine-readable JSON (non-zero exit on mismatch);
* ``sweep``    - scan the coupling grid and tabulate hybridization data and
  dissipator-correction signs as CSV.

Configuration is a single TOML file; all physical quantities are in units of
the bare cavity frequency unless the ``units`` key says otherwise.  Selected
flags can be overridden with ``ANHARME_*`` environment variables.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from . import __version__
from .algebra import Context, commutator
from .generator import (
    QuadraticSpectrum,
    anharmonic_series_term,
    solve_generator4,
    solve_generator6,
)
from .hybridize import BareModel, ModeCollapse, hybridize
from .models import (
    FlatBath,
    Flavor,
    TabulatedBath,
    _jsonable,
    build_case1,
    build_case1_number_basis,
    build_case2,
    correction_signs,
    model_from_json_dict,
)
from .simulate import (
    FockSuperposition,
    FockTruncation,
    Occupation,
    PhaseSpace,
    ProductState,
    QuadratureX,
    QuadratureY,
    SimulationConfig,
    Vacuum,
    compare_flavors,
    quadrature_eom_check,
    random_density_matrix,
)

FLAVOR_ORDER = [Flavor.LINEAR, Flavor.KERR, Flavor.EFFECTIVE]


@dataclass
class RunManifest:
    """Completion marker: every run writes this file last."""

    command: str
    config_file: str
    parameters: dict
    outputs: list = field(default_factory=list)
    version: str = __version__
    wall_seconds: float = 0.0

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        payload = {
            "command": self.command,
            "config_file": self.config_file,
            "parameters": _jsonable(self.parameters),
            "outputs": [str(p) for p in self.outputs],
            "version": self.version,
            "wall_seconds": self.wall_seconds,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return section[key]


def _bath_from_config(cfg: dict) -> object:
    section = cfg.get("bath", {})
    kind = section.get("kind", "flat")
    if kind == "flat":
        return FlatBath(float(_require(section, "s0", "bath")))
    if kind == "tabulated":
        return TabulatedBath(tuple(map(tuple, _require(section, "points", "bath"))))
    raise ConfigError(f"unknown bath kind {kind!r}")


def _models_from_config(cfg: dict, flavors, order: int) -> dict:
    model = cfg.get("model")
    if model is None:
        raise ConfigError("missing [model] section")
    case = _require(model, "case", "model")
    bath = _bath_from_config(cfg)
    out = {}
    if case == "flux_bath":
        eps = model.get("epsilon", 0.0)
        omega_a = model.get("omega_a", 1.0)
        for flavor in flavors:
            out[flavor.value] = build_case1(eps, omega_a, bath, flavor, order=order)
    elif case == "purcell":
        bare = BareModel(
            omega_bar_a=float(_require(model, "omega_bar_a", "model")),
            omega_bar_c=float(_require(model, "omega_bar_c", "model")),
            g=float(_require(model, "g", "model")),
            epsilon=float(model.get("epsilon", 0.0)),
        )
        hyb = hybridize(bare)
        three = bool(cfg.get("derive", {}).get("include_three_photon", False))
        for flavor in flavors:
            out[flavor.value] = build_case2(
                bare, hyb, bath, flavor, include_three_photon=three, order=order
            )
    else:
        raise ConfigError(f"unknown model case {case!r}")
    return out


_OBSERVABLE_NAMES = {
    "n_a": Occupation(0),
    "n_c": Occupation(1),
    "x_a": QuadratureX(0),
    "x_c": QuadratureX(1),
    "y_a": QuadratureY(0),
    "y_c": QuadratureY(1),
    "phase_a": PhaseSpace(0),
    "phase_c": PhaseSpace(1),
}


def _initial_state_from_config(section: dict) -> object:
    kind = section.get("kind", "vacuum")
    if kind == "vacuum":
        return Vacuum()
    if kind == "fock_superposition":
        return FockSuperposition(
            [_as_amp(a) for a in _require(section, "amplitudes", "initial_state")],
            mode=int(section.get("mode", 0)),
        )
    if kind == "product":
        return ProductState(
            [[_as_amp(a) for a in f] for f in _require(section, "factors", "initial_state")]
        )
    raise ConfigError(f"unknown initial state kind {kind!r}")


def _as_amp(a) -> complex:
    if isinstance(a, (list, tuple)):
        return complex(a[0], a[1])
    return complex(a)


def _sim_config_from_config(cfg: dict) -> tuple:
    section = cfg.get("simulation")
    if section is None:
        raise ConfigError("missing [simulation] section")
    names = section.get("observables", ["n_a"])
    try:
        observables = tuple(_OBSERVABLE_NAMES[name] for name in names)
    except KeyError as exc:
        raise ConfigError(f"unknown observable {exc.args[0]!r}")
    state = _initial_state_from_config(section.get("initial_state", {}))
    sim = SimulationConfig(
        t_final=float(_require(section, "t_final", "simulation")),
        dt=float(section["dt"]) if "dt" in section else None,
        record_every=int(section.get("record_every", 1)),
        observables=observables,
        initial_state=state,
        apply_frame_transform=bool(section.get("apply_frame_transform", True)),
    )
    dims = section.get("dims")
    if dims is None:
        raise ConfigError("missing 'dims' in [simulation]")
    trunc = FockTruncation(tuple(int(d) for d in dims) if not isinstance(dims, int) else dims)
    return sim, trunc


def _parse_flavors(value: str) -> list:
    if value == "all":
        return list(FLAVOR_ORDER)
    return [Flavor(value)]


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- derive -------------------------------------------------------------------


def cmd_derive(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    flavors = _parse_flavors(args.flavor)
    models = _models_from_config(cfg, flavors, args.order)

    outputs = []
    for name in [f.value for f in FLAVOR_ORDER if f.value in models]:
        path = out_dir / f"model_{name}.json"
        _dump_json(path, models[name].to_json_dict())
        outputs.append(path)

    levels = int(cfg.get("derive", {}).get("number_basis_levels", 0))
    if levels:
        model_cfg = cfg["model"]
        if model_cfg["case"] != "flux_bath":
            raise ConfigError("number-basis output is only shipped for the flux_bath case")
        nb = build_case1_number_basis(
            model_cfg.get("epsilon", 0.0),
            model_cfg.get("omega_a", 1.0),
            _bath_from_config(cfg),
            levels,
        )
        path = out_dir / "model_effective_number_basis.json"
        _dump_json(path, nb.to_json_dict())
        outputs.append(path)

    manifest = RunManifest(
        command="derive",
        config_file=args.config,
        parameters={"flavors": [f.value for f in flavors], "order": args.order},
        outputs=outputs,
        wall_seconds=time.monotonic() - t0,
    )
    manifest.write(out_dir)
    return 0


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim, trunc = _sim_config_from_config(cfg)

    model_files = cfg.get("simulation", {}).get("model_files")
    if model_files:
        models = {}
        for path in model_files:
            data = json.loads(Path(path).read_text())
            model = model_from_json_dict(data)
            models[model.flavor.value] = model
    else:
        flavors = _parse_flavors(args.flavor)
        models = _models_from_config(cfg, flavors, args.order)

    ordered = [f.value for f in FLAVOR_ORDER if f.value in models]
    results = compare_flavors({name: models[name] for name in ordered}, trunc, sim)

    times = results[ordered[0]].times
    columns = []
    for name in ordered:
        for obs in results[name].columns:
            columns.append((f"{name}:{obs}", results[name].columns[obs]))

    csv_path = out_dir / "timeseries.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [c[0] for c in columns])
        for i, t in enumerate(times):
            writer.writerow([repr(float(t))] + [repr(float(series[i])) for _, series in columns])

    config_text = Path(args.config).read_bytes()
    meta = {
        "config_sha256": hashlib.sha256(config_text).hexdigest(),
        "flavors": ordered,
        "stats": {name: _jsonable(results[name].stats) for name in ordered},
        "dims": list(trunc.dims),
        "model_parameters": _jsonable(models[ordered[0]].parameters),
    }
    meta_path = out_dir / "timeseries_meta.json"
    _dump_json(meta_path, meta)

    manifest = RunManifest(
        command="simulate",
        config_file=args.config,
        parameters={"flavors": ordered, "order": args.order},
        outputs=[csv_path, meta_path],
        wall_seconds=time.monotonic() - t0,
    )
    manifest.write(out_dir)
    return 0


# -- verify -------------------------------------------------------------------


def _verify_table2() -> list:
    """Single-mode transformed-quadrature rows, exact."""
    ctx = Context(1)
    spectrum = QuadraticSpectrum([Fraction(1)])
    h4 = anharmonic_series_term(ctx, [1], 2, Fraction(1))
    s4, n4 = h4.split_secular()
    g4 = solve_generator4(spectrum, n4)
    xg = commutator(ctx.x(0), g4)
    expected = {
        ((0, 1),): Fraction(1, 8),
        ((1, 2),): Fraction(1, 8),
        ((0, 3),): Fraction(-1, 48),
        ((1, 0),): Fraction(1, 8),
        ((2, 1),): Fraction(1, 8),
        ((3, 0),): Fraction(-1, 48),
    }
    rows = []
    for exps, want in expected.items():
        got = xg.coefficient(exps)
        ok = got.re == want and got.im == 0
        rows.append(
            {
                "row": str(exps),
                "expected": str(want),
                "got": f"{got.re}" if got.im == 0 else repr(got),
                "match": ok,
            }
        )
    return rows


def _table3_closed_forms(wbar, wa, wc, uaa, uac) -> dict:
    i = 1j
    return {
        ((0, 1), (0, 0)): i / 8 * (wbar / wa) * uaa**2 * (uaa**2 + uac**2),
        ((1, 2), (0, 0)): i / 8 * (wbar / wa) * uaa**4,
        ((0, 3), (0, 0)): i / 16 * (wbar / wa) * uaa**4,
        ((0, 0), (0, 1)): i / 4 * (wbar / (wa + wc) - wbar / (wa - wc)) * uaa * uac * (uaa**2 + uac**2),
        ((0, 0), (1, 2)): i / 4 * (wbar / (wa + wc) - wbar / (wa - wc)) * uaa * uac**3,
        ((0, 0), (0, 3)): i / 12 * (wbar / (wa + 3 * wc) - wbar / (wa - 3 * wc)) * uaa * uac**3,
        ((0, 1), (1, 1)): i / 4 * (wbar / wa) * uaa**2 * uac**2,
        ((1, 1), (0, 1)): i / 2 * (wbar / (wa + wc) - wbar / (wa - wc)) * uaa**3 * uac,
        ((0, 1), (0, 2)): i / 8 * (wbar / (wc + wa) + wbar / wc) * uaa**2 * uac**2,
        ((0, 1), (2, 0)): i / 8 * (wbar / (wa - wc) - wbar / wc) * uac**2 * uaa**2,
        ((0, 2), (0, 1)): i / 4 * (wbar / (wc + 3 * wa) + wbar / (wc + wa)) * uac * uaa**3,
        ((2, 0), (0, 1)): i / 4 * (wbar / (wc - wa) + wbar / (wc - 3 * wa)) * uac * uaa**3,
    }


def _verify_table3(rng: np.random.Generator, n_triples: int = 5, tol: float = 1e-12) -> list:
    rows = []
    done = 0
    while done < n_triples:
        wbar_a = rng.uniform(0.5, 1.5)
        wbar_c = rng.uniform(0.5, 1.5)
        g = rng.uniform(0.02, 0.2)
        try:
            hyb = hybridize(BareModel(wbar_a, wbar_c, g))
        except ModeCollapse:
            continue
        wa, wc = hyb.omega_a, hyb.omega_c
        if min(abs(wa - wc), abs(wa - 3 * wc), abs(wc - 3 * wa), abs(2 * wc - wa), abs(2 * wa - wc)) < 5e-2:
            continue
        done += 1
        ctx = Context(2, exact=False)
        spectrum = QuadraticSpectrum([wa, wc])
        h4 = anharmonic_series_term(ctx, [hyb.u_aa, hyb.u_ac], 2, wbar_a)
        g4 = solve_generator4(spectrum, h4.nonsecular_part())
        yg = commutator(ctx.y(0), g4)
        forms = _table3_closed_forms(wbar_a, wa, wc, hyb.u_aa, hyb.u_ac)
        for exps, want in forms.items():
            got = complex(yg.coefficient(exps))
            rows.append(
                {
                    "row": str(exps),
                    "triple": [wbar_a, wbar_c, g],
                    "expected": [want.real, want.imag],
                    "got": [got.real, got.imag],
                    "match": abs(got - want) <= tol,
                }
            )
            dag_exps = tuple((n, m) for m, n in exps)
            got_d = complex(yg.coefficient(dag_exps))
            rows.append(
                {
                    "row": str(dag_exps),
                    "triple": [wbar_a, wbar_c, g],
                    "expected": [want.real, -want.imag],
                    "got": [got_d.real, got_d.imag],
                    "match": abs(got_d - want.conjugate()) <= tol,
                }
            )
    return rows


def _verify_residuals(rng: np.random.Generator) -> dict:
    """Exact first- and second-order defining-equation residuals plus the
    quadrature equation-of-motion identity."""
    ctx = Context(2)
    report = {}
    worst_terms = 0
    for _ in range(10):
        wa = Fraction(int(rng.integers(5, 60)), int(rng.integers(1, 9)))
        wc = Fraction(int(rng.integers(5, 60)), int(rng.integers(1, 9)))
        if wa == wc or wa == 3 * wc or wc == 3 * wa:
            continue
        spectrum = QuadraticSpectrum([wa, wc])
        u = (Fraction(int(rng.integers(1, 9)), 8), Fraction(int(rng.integers(1, 9)), 8))
        h4 = anharmonic_series_term(ctx, u, 2, Fraction(1))
        n4 = h4.nonsecular_part()
        g4 = solve_generator4(spectrum, n4)
        residual = commutator(spectrum.h2(ctx), g4) - n4
        worst_terms = max(worst_terms, len(residual))
    report["first_order_residual_terms"] = worst_terms

    ctx1 = Context(1)
    spectrum1 = QuadraticSpectrum([Fraction(1)])
    h4 = anharmonic_series_term(ctx1, [1], 2, Fraction(1))
    s4, n4 = h4.split_secular()
    g4 = solve_generator4(spectrum1, n4)
    h6 = anharmonic_series_term(ctx1, [1], 3, Fraction(1))
    s6, n6 = h6.split_secular()
    g6, _ = solve_generator6(spectrum1, s4, n4, g4, n6, s6, Fraction(1, 5))
    cross = commutator(n4, g4)
    res6 = (
        commutator(spectrum1.h2(ctx1), g6)
        + n6
        - commutator(s4, g4)
        - cross.nonsecular_part() * Fraction(1, 2)
    )
    report["second_order_residual_terms"] = len(res6)

    samples = [random_density_matrix(12, rng) for _ in range(20)]
    report["quadrature_eom_residual"] = quadrature_eom_check(
        0.2, 1.0, 0.04, FockTruncation(12), samples
    )
    return report


def cmd_verify(args) -> int:
    t0 = time.monotonic()
    rng = np.random.default_rng(args.seed)
    table2 = _verify_table2()
    table3 = _verify_table3(rng)
    residuals = _verify_residuals(rng)
    ok = (
        all(r["match"] for r in table2)
        and all(r["match"] for r in table3)
        and residuals["first_order_residual_terms"] == 0
        and residuals["second_order_residual_terms"] == 0
        and residuals["quadrature_eom_residual"] <= 1e-9
    )
    report = {
        "seed": args.seed,
        "table2": table2,
        "table3": table3,
        "residuals": residuals,
        "all_match": ok,
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    print(text)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "verify_report.json"
        path.write_text(text + "\n")
        RunManifest(
            command="verify",
            config_file="",
            parameters={"seed": args.seed},
            outputs=[path],
            wall_seconds=time.monotonic() - t0,
        ).write(out_dir)
    return 0 if ok else 1


# -- sweep -------------------------------------------------------------------

SWEEP_COLUMNS = [
    "g", "status", "omega_a", "omega_c",
    "u_aa", "u_ac", "u_ca", "u_cc",
    "v_aa", "v_ac", "v_ca", "v_cc",
    "r_a", "r_c",
]


def _sweep_row(bare: BareModel) -> dict:
    row = {"g": bare.g}
    try:
        hyb = hybridize(bare)
        r_a, r_c = correction_signs(bare, hyb)
    except (ModeCollapse, ArithmeticError) as exc:
        row["status"] = type(exc).__name__
        return row
    row.update(
        status="ok",
        omega_a=hyb.omega_a, omega_c=hyb.omega_c,
        u_aa=hyb.u_aa, u_ac=hyb.u_ac, u_ca=hyb.u_ca, u_cc=hyb.u_cc,
        v_aa=hyb.v_aa, v_ac=hyb.v_ac, v_ca=hyb.v_ca, v_cc=hyb.v_cc,
        r_a=r_a, r_c=r_c,
    )
    return row


def cmd_sweep(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args.config)
    section = cfg.get("sweep")
    if section is None:
        raise ConfigError("missing [sweep] section")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    wa = float(_require(section, "omega_bar_a", "sweep"))
    wc = float(_require(section, "omega_bar_c", "sweep"))
    eps = float(section.get("epsilon", 0.0))
    if "g_values" in section:
        g_values = [float(g) for g in section["g_values"]]
    else:
        g_values = [
            float(g)
            for g in np.linspace(
                float(section.get("g_min", 0.0)),
                float(_require(section, "g_max", "sweep")),
                int(section.get("g_count", 50)),
            )
        ]
    g_values.sort()
    bares = [BareModel(wa, wc, g, eps) for g in g_values]
    workers = int(section.get("workers", 4))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(_sweep_row, bares))

    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n", restval=""
        )
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

    RunManifest(
        command="sweep",
        config_file=args.config,
        parameters={"omega_bar_a": wa, "omega_bar_c": wc, "epsilon": eps,
                    "g_count": len(g_values)},
        outputs=[csv_path],
        wall_seconds=time.monotonic() - t0,
    ).write(out_dir)
    return 0


# -- entry point ----------------------------------------------------------------


def _env_default(name: str, fallback):
    return os.environ.get(f"ANHARME_{name}", fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anharme",
        description="Effective master equations for weakly anharmonic oscillators",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env_default("CONFIG", None), help="TOML config path")
    common.add_argument("--out", default=_env_default("OUT", "out"), help="output directory")
    common.add_argument(
        "--flavor",
        default=_env_default("FLAVOR", "all"),
        choices=["all", "linear", "kerr", "effective"],
    )
    common.add_argument(
        "--order", type=int, default=int(_env_default("ORDER", 1)), choices=[1, 2],
        help="generator order",
    )

    p = sub.add_parser("derive", parents=[common], help="emit EffectiveModel JSON")
    p.set_defaults(func=cmd_derive)
    p = sub.add_parser("simulate", parents=[common], help="run the Lindblad integrator")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("sweep", parents=[common], help="coupling-grid hybridization CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="re-derive symbolic golden results")
    p.add_argument("--seed", type=int, default=int(_env_default("SEED", 1234)))
    p.add_argument("--out", default=_env_default("OUT", None))
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in {"derive", "simulate", "sweep"} and not args.config:
        parser.error("--config is required")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ModeCollapse, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
