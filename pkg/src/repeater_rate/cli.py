"""Command-line front end.

Every command is a pure function of its configuration. Values come from
built-in defaults, then an optional ``--config`` file (flat JSON or TOML),
then command-line flags, later sources winning.

Tables go to stdout (and ``--out``), diagnostic lines to stderr.
Exit codes: 0 success, 1 failed check, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import distill, oracle
from .keyrate import (
    QUBIT_CONVENTIONS,
    STEP_CONVENTIONS,
    ChainParams,
    chain_werner_param,
    decoherence_bracket,
    decoherence_factor,
    naive_decoherence_factor,
    normalized_rate,
    optimize_l0,
    secret_key_rate,
    sections_for,
)
from .link import LinkParams, dark_count_factor, qubits_for_postselect
from .order_stats import AttemptDistribution, order_stat_table
from .states import BellDiagonalState, werner_state

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2
FORMATS = ("csv", "json")
# reference naive-estimate infidelity for n=100, L0=25 km, tau_d=1 s
REFERENCE_NAIVE_INFIDELITY = 1e-5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int | None = None
    l0: float = 25.0
    latt: float = 25.0
    eta: float = 0.9
    q: int = 10
    mu: float = 1.0
    tau_q: float = 10e-9
    dark_rate: float = 25.0
    tau_d: float = 1.0
    c: float = 2.0e5
    xga: float = 0.99
    xmm: float = 0.999
    delta_max: int = 10
    entropy_base: str = "2"
    step: str = "one_way"
    rounded_survival: bool = False
    extra_n: bool = False
    fold_capture: bool = False
    pc_override: float | None = None
    ideal: bool = False
    ideal_gates: bool = False
    distill: bool = False
    qubit_convention: str = "two_sided"
    distances: list = field(default_factory=lambda: [float(d) for d in range(100, 2001, 100)])
    l0_grid: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0])
    mu_grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 11)])
    xga_list: list | None = None
    trials: int = 100_000
    seed: int = 0
    out: str | None = None
    format: str = "csv"

    def validate(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.step not in STEP_CONVENTIONS:
            raise ConfigError(f"step must be one of {STEP_CONVENTIONS}, got {self.step!r}")
        if self.qubit_convention not in QUBIT_CONVENTIONS:
            raise ConfigError(f"qubit_convention must be one of {tuple(QUBIT_CONVENTIONS)}")
        for name in ("distances", "l0_grid", "mu_grid"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if self.xga_list is not None and not self.xga_list:
            raise ConfigError("xga_list must not be empty")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.entropy_base not in ("2", "e"):
            try:
                if float(self.entropy_base) <= 1:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"entropy_base must be 2, e or a number above 1, got {self.entropy_base!r}") from None
        try:
            self.chain(1 if self.n is None else self.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def chain(self, n: int, L0: float | None = None, x_ga: float | None = None) -> ChainParams:
        dark, tau_d, xga, xmm = self.dark_rate, self.tau_d, self.xga, self.xmm
        if x_ga is not None:
            xga = x_ga
        if self.ideal or self.ideal_gates:
            dark, xga, xmm = 0.0, 1.0, 1.0
        if self.ideal:
            tau_d = math.inf
        link = LinkParams(
            L0=self.l0 if L0 is None else L0,
            L_att=self.latt,
            eta=self.eta,
            q=self.q,
            mu=self.mu,
            tau_q=self.tau_q,
            dark_rate=dark,
            fold_capture=self.fold_capture,
        )
        base = math.e if self.entropy_base == "e" else float(self.entropy_base)
        return ChainParams(
            link=link,
            n=n,
            tau_d=tau_d,
            c=self.c,
            x_ga=xga,
            x_mm=xmm,
            delta_max=self.delta_max,
            entropy_base=base,
            step=self.step,
            extra_n_term=self.extra_n,
            rounded_survival=self.rounded_survival,
            pc_override=self.pc_override,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _FIELD_TYPES[name]
    try:
        if value is None:
            return None
        if "list" in kind:
            if not isinstance(value, (list, tuple)):
                value = [value]
            return [float(v) for v in value]
        if "bool" in kind:
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if "int" in kind and "float" not in kind:
            if float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if "float" in kind:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r}") from None


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a key-value table")
    return data


def build_config(file_values: dict, flag_values: dict) -> RunConfig:
    merged = {}
    for source in (file_values, flag_values):
        for key, value in source.items():
            name = key.replace("-", "_")
            if name not in _FIELD_TYPES:
                raise ConfigError(f"{key}: unknown setting")
            merged[name] = _coerce(name, value)
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# commands; each returns (rows, extra report lines, exit code)


def _n_for(cfg: RunConfig, distance: float, L0: float) -> int:
    n = sections_for(distance, L0)
    if n < 1:
        raise ConfigError(f"distances/l0_grid: L0 = {L0} km gives no section over {distance} km")
    return n


def cmd_rate(cfg: RunConfig):
    if cfg.n is None:
        raise ConfigError("n: required for rate")
    p = cfg.chain(cfg.n)
    r = secret_key_rate(p)
    row = {"n": p.n, "L0": p.L0}
    row.update(r.to_dict())
    row["x_de_naive"] = naive_decoherence_factor(p)
    row["normalized_rate"] = normalized_rate(r, p, cfg.qubit_convention)
    if cfg.distill:
        K, detail = distill.chain_key_rate(p, distill=True)
        row["K_distilled"] = K
        row["distill_rounds"] = getattr(detail, "rounds", 0)
    lines = [
        f"decoherence: worst-case x_de = {r.x_de:.9f}, naive exp(-n L0/(c tau_d)) = {row['x_de_naive']:.9f},"
        f" reference naive infidelity {REFERENCE_NAIVE_INFIDELITY:g} vs computed {1 - row['x_de_naive']:.3e}"
    ]
    return [row], lines, EXIT_OK


def _xgas(cfg, default):
    return cfg.xga_list if cfg.xga_list is not None else default


def cmd_sweep(cfg: RunConfig):
    rows = []
    for distance in cfg.distances:
        for L0 in cfg.l0_grid:
            n = _n_for(cfg, distance, L0)
            for x_ga in _xgas(cfg, [0.95, 0.99]):
                p = cfg.chain(n, L0=L0, x_ga=x_ga)
                for use in (False, True):
                    K, detail = distill.chain_key_rate(p, distill=use)
                    is_d = isinstance(detail, distill.DistilledKeyRate)
                    rows.append(
                        {
                            "distance": distance,
                            "L0": L0,
                            "n": n,
                            "x_ga": x_ga,
                            "distill": use,
                            "K": K,
                            "K_literal": detail.K_literal if is_d else detail.K,
                            "raw_rate": detail.K_raw if is_d else detail.raw_rate,
                            "rounds": detail.rounds if is_d else 0,
                        }
                    )
    return rows, [], EXIT_OK


def cmd_optimize(cfg: RunConfig):
    rows = []
    for distance in cfg.distances:
        for x_ga in _xgas(cfg, [0.95, 0.99, 0.999]):
            template = cfg.chain(1, x_ga=x_ga)
            for use in (False, True):
                def rate(p, use=use):
                    K, detail = distill.chain_key_rate(p, distill=use)
                    return _Scored(K, detail)

                L0, best = optimize_l0(template, distance, cfg.l0_grid, rate)
                rows.append(
                    {
                        "distance": distance,
                        "x_ga": x_ga,
                        "distill": use,
                        # no spacing is preferred when every candidate gives zero key
                        "best_L0": L0 if best.K > 0 else None,
                        "n": sections_for(distance, L0) if best.K > 0 else None,
                        "K": best.K,
                    }
                )
    return rows, [], EXIT_OK


@dataclass(frozen=True)
class _Scored:
    K: float
    detail: object


def cmd_inset(cfg: RunConfig):
    base = cfg.chain(1).link
    base = replace(base, mu=1.0)
    rows = []
    for mu in cfg.mu_grid:
        try:
            q = qubits_for_postselect(base, mu)
        except ValueError as exc:
            raise ConfigError(f"mu_grid: {exc}") from None
        rows.append({"mu": mu, "q": q, "q_ratio": q / base.q})
    return rows, [], EXIT_OK


def cmd_distill_schedule(cfg: RunConfig):
    p = cfg.chain(cfg.n or 1)
    try:
        s = distill.compute_breakpoints(p)
    except distill.DistillationUnreachable as exc:
        raise ConfigError(f"distillation unreachable: {exc}") from None
    row = {
        "L0": p.L0,
        "x_ga": p.x_ga,
        "n_L": s.n_L,
        "n_S": s.n_S,
        "survival": s.survival,
        "distillation_needed": s.needed,
    }
    if cfg.n is not None:
        row["n"] = cfg.n
        row["rounds"] = s.rounds(cfg.n)
        row["x_total"] = chain_werner_param(p)
    return [row], [], EXIT_OK


def cmd_simulate(cfg: RunConfig):
    if cfg.n is None:
        raise ConfigError("n: required for simulate")
    p = cfg.chain(cfg.n)
    if p.p_c <= 0:
        raise ConfigError("connection probability is zero")
    r = secret_key_rate(p)
    sim = oracle.simulate_chain(p, cfg.trials, cfg.seed, t_f=r.t_f)
    s = sim.sample
    stats = order_stat_table(p.n, AttemptDistribution(p.p_c))
    rows = []
    for k in range(p.n):
        rows.append(_sim_row(f"T_{k + 1}", stats[k], s.mean_t[k], s.stderr_t[k]))
    rows.append(_sim_row("bracket", decoherence_bracket(p.n, stats, p.extra_n_term), s.mean_bracket, s.stderr_bracket))
    se_c = math.sqrt(max(sim.completion_fraction * (1 - sim.completion_fraction), 0.0) / cfg.trials)
    rows.append(_sim_row("completion", r.completion_fraction, sim.completion_fraction, se_c))
    rows.append(_sim_row("raw_rate", r.raw_rate, sim.raw_rate, se_c / (r.t_f * p.step_time())))
    rows.append(_sim_row("x_de", r.x_de, sim.x_de, None))
    return rows, [f"ks_distance_T_n = {oracle.ks_distance_last(s):.6f}"], EXIT_OK


def _sim_row(name, analytic, empirical, stderr):
    z = None
    if stderr is not None and stderr > 0:
        z = (empirical - analytic) / stderr
    return {
        "quantity": name,
        "analytic": float(analytic),
        "empirical": float(empirical),
        "stderr": None if stderr is None else float(stderr),
        "z": None if z is None else float(z),
    }


def _check(rows, name, value, reference, tolerance, ok, margin):
    rows.append(
        {
            "check": name,
            "value": float(value),
            "reference": float(reference),
            "tolerance": float(tolerance),
            "margin": float(margin),
            "passed": bool(ok),
        }
    )


def run_checks(trials: int = 100_000, seed: int = 0, n_max: int = 8, p_grid=(0.1, 0.431, 0.9), n_random: int = 100):
    """Analytic-versus-oracle comparisons; one row per check."""
    rows = []
    # order statistics against the chain Monte Carlo
    for p_c in p_grid:
        d = AttemptDistribution(p_c)
        for n in range(1, n_max + 1):
            s = oracle.sample_sections(n, p_c, trials, seed=seed + 1000 * n)
            zmax = float(np.max(oracle.order_stat_z(s, order_stat_table(n, d))))
            _check(rows, f"order_stats n={n} p_c={p_c} max|z|", zmax, 0.0, 3.0, zmax <= 3.0, 3.0 - zmax)
    # closed forms
    for p_c in p_grid:
        d = AttemptDistribution(p_c)
        t1 = order_stat_table(1, d)[0]
        _check(rows, f"<T_1> = 1/p_c at p_c={p_c}", t1, 1 / p_c, 1e-8, abs(t1 - 1 / p_c) <= 1e-8, 1e-8 - abs(t1 - 1 / p_c))
        two = order_stat_table(2, d)
        e_min = 1 / (1 - (1 - p_c) ** 2)
        e_max = 2 / p_c - e_min
        for label, got, ref in (("min", two[0], e_min), ("max", two[1], e_max)):
            err = abs(got - ref)
            _check(rows, f"n=2 {label} at p_c={p_c}", got, ref, 1e-8, err <= 1e-8, 1e-8 - err)
    # decoherence exposure
    for n in range(1, n_max + 1):
        p = ChainParams(link=LinkParams(L0=25.0), n=n, tau_d=1.0, pc_override=0.5)
        sim = oracle.simulate_chain(p, trials, seed=seed + 7 * n)
        analytic = decoherence_factor(p)
        rel = abs(sim.x_de - analytic) / analytic
        _check(rows, f"x_de n={n} p_c=0.5 relative", sim.x_de, analytic, 0.01, rel <= 0.01, 0.01 - rel)
    # DEJMPS closed form against the density-matrix oracle
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_random):
        a = BellDiagonalState(tuple(rng.dirichlet(np.ones(4))))
        b = BellDiagonalState(tuple(rng.dirichlet(np.ones(4))))
        ma, pa = distill.dejmps_map(a, b)
        oa, po = oracle.dejmps_oracle(a, b)
        worst = max(worst, abs(pa - po), float(np.max(np.abs(ma.as_array() - oa.as_array()))))
    _check(rows, f"dejmps map vs oracle, {n_random} random pairs", worst, 0.0, 1e-10, worst <= 1e-10, 1e-10 - worst)
    w = werner_state(distill.X_DISTILL)
    out, success = oracle.dejmps_oracle(w, w)
    x_out = distill.werner_replace(out)
    # (1 - 3(1-x)/4 + (1-x)/4)^2 + (2(1-x)/4)^2 at x = 0.69
    expected = 0.845**2 + 0.155**2
    err = abs(success - expected)
    _check(rows, "dejmps werner(0.69) success", success, expected, 1e-9, err <= 1e-9, 1e-9 - err)
    _check(rows, "dejmps werner(0.69) success to 3 d.p.", round(success, 3), 0.738, 0.0, round(success, 3) == 0.738, 0.0)
    _check(rows, "dejmps werner(0.69) output x", x_out, 0.74, 0.01, abs(x_out - 0.74) <= 0.01, 0.01 - abs(x_out - 0.74))
    # documented discrepancy: the threshold bracket is negative in bits
    lit = distill.threshold_bracket(2)
    _check(rows, "threshold bracket 1-2h2(0.155) is negative in base 2", lit, 0.0, 0.0, lit < 0.0, -lit)
    clamped = max(0.0, lit)
    _check(rows, "clamped threshold bracket is zero in base 2", clamped, 0.0, 0.0, clamped == 0.0, 0.0)
    # dark counts
    dc = 1.0 - dark_count_factor(LinkParams(dark_rate=25.0, tau_q=10e-9))
    _check(rows, "dark-count infidelity at 25 Hz, 10 ns", dc, 0.0, 1e-5, dc < 1e-5, 1e-5 - dc)
    return rows


def cmd_check(cfg: RunConfig):
    rows = run_checks(trials=cfg.trials, seed=cfg.seed)
    failed = [r for r in rows if not r["passed"]]
    lines = [f"{len(rows) - len(failed)}/{len(rows)} checks passed"]
    lines += [f"FAILED: {r['check']} value={r['value']!r} reference={r['reference']!r} tol={r['tolerance']!r}" for r in failed]
    return rows, lines, EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {
    "rate": cmd_rate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "inset": cmd_inset,
    "distill-schedule": cmd_distill_schedule,
    "simulate": cmd_simulate,
    "check": cmd_check,
}

# ---------------------------------------------------------------------------
# output


def _clean(v):
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, (np.integer,)):
        v = int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def output_schema() -> dict:
    """JSON schema of every command's output, keyed by command name."""
    text = resources.files(__package__).joinpath("schemas/output.schema.json").read_text()
    return json.loads(text)


def render(rows, fmt: str) -> str:
    rows = [{k: _clean(v) for k, v in row.items()} for row in rows]
    if fmt == "json":
        return json.dumps(rows, indent=2, allow_nan=False) + "\n"
    header = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_value(row.get(k)) for k in header})
    return buf.getvalue()


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else v


# ---------------------------------------------------------------------------
# argument parsing

_FLAGS = [
    ("--n", int, "number of elementary sections"),
    ("--l0", float, "inter-repeater distance L0 (km)"),
    ("--latt", float, "attenuation length (km)"),
    ("--eta", float, "photon emission, collection and detection efficiency"),
    ("--q", int, "qubit pairs per station side"),
    ("--mu", float, "post-selected photon fraction"),
    ("--tau-q", float, "excited-state lifetime (s)"),
    ("--dark-rate", float, "detector dark-count rate (Hz)"),
    ("--tau-d", float, "nuclear-spin coherence time (s)"),
    ("--c", float, "signal speed in fibre (km/s)"),
    ("--xga", float, "brokered Bell-measurement quality"),
    ("--xmm", float, "mode-mismatch factor"),
    ("--delta-max", int, "largest buffer delta scanned (steps)"),
    ("--pc-override", float, "use this per-attempt connection probability"),
    ("--trials", int, "Monte Carlo trials"),
    ("--seed", int, "Monte Carlo seed"),
    ("--out", str, "write the table to PATH"),
]
_LIST_FLAGS = [
    ("--distances", "total distances (km)"),
    ("--l0-grid", "inter-repeater distances to scan (km)"),
    ("--mu-grid", "post-selection fractions"),
    ("--xga-list", "gate qualities for sweep/optimize"),
]
_BOOL_FLAGS = [
    ("--ideal", "no dark counts, mismatch, gate errors or decoherence"),
    ("--ideal-gates", "no dark counts, mismatch or gate errors; keep decoherence"),
    ("--distill", "also report the distilled rate (rate command)"),
    ("--rounded-survival", "use 0.37 as the per-round survival"),
    ("--extra-n", "add a further n steps to the decoherence exposure"),
    ("--fold-capture", "fold the in-window photon capture probability into eta"),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat JSON or TOML file of settings")
    for flag, kind, text in _FLAGS:
        common.add_argument(flag, type=kind, help=text)
    for flag, text in _LIST_FLAGS:
        common.add_argument(flag, type=float, nargs="+", help=text)
    for flag, text in _BOOL_FLAGS:
        common.add_argument(flag, action="store_true", help=text)
    common.add_argument("--entropy-base", choices=("2", "e"), help="logarithm base of the binary entropy")
    common.add_argument("--step", choices=STEP_CONVENTIONS, help="duration of one attempt in the raw rate")
    common.add_argument("--qubit-convention", choices=tuple(QUBIT_CONVENTIONS), help="qubit count for normalised rates")
    common.add_argument("--format", choices=FORMATS, help="output table format")

    parser = argparse.ArgumentParser(prog="repeater-rate", description="Secret key rates of double-heralded repeater chains.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "rate": "key rate of one chain",
        "sweep": "key rate against total distance for each L0",
        "optimize": "key rate optimised over L0",
        "inset": "qubits needed against post-selection fraction",
        "distill-schedule": "distillation breakpoints n_L and n_S",
        "simulate": "Monte Carlo of one chain against the analytic values",
        "check": "run all analytic-versus-oracle checks",
    }
    parser.commands = {
        name: sub.add_parser(name, parents=[common], help=text, argument_default=argparse.SUPPRESS)
        for name, text in helps.items()
    }
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    sub = parser.commands[command]
    try:
        file_values = load_config_file(config_path) if config_path else {}
        cfg = build_config(file_values, args)
        rows, lines, code = COMMANDS[command](cfg)
    except ConfigError as exc:
        sub.print_usage(sys.stderr)
        print(f"{parser.prog} {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(rows, cfg.format)
    sys.stdout.write(text)
    # diagnostics go to stderr so stdout stays a parseable table
    for line in lines:
        print(line, file=sys.stderr)
    if cfg.out:
        Path(cfg.out).write_text(text, newline="")
    return code


if __name__ == "__main__":
    sys.exit(main())
