"""Command-line experiment runner.

Subcommands ``simulate``, ``channel``, ``sweep``, ``ecc`` and ``check`` write one
table each, as CSV (header row, 12 significant digits) or JSON lines. Settings
come from flags, then from the matching section of an INI file given with
``--config`` (``[DEFAULT]`` applies to every subcommand), then from built-in
defaults.

Exit codes: 0 success, 2 configuration error, 3 internal consistency failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from carrier_sim import densekernel as dk
from carrier_sim import ecc
from carrier_sim.densekernel import ConsistencyError
from carrier_sim.noise import NOISE_KINDS, KickSamples, NoiseSpec, as_pauli_mixture
from carrier_sim.pauliframe import estimate_flip_rates
from carrier_sim.protocol import (
    ProtocolConfig,
    RoundKind,
    carrier_reference,
    complete_channel,
    conjugation_identities_check,
    round_carrier,
    run_protocol,
)
from carrier_sim.states import ghz_basis_state, ghz_labels, parity_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSISTENCY = 3

ENGINES = ("dense", "pauliframe", "both")
FORMATS = ("csv", "json")
SIG_DIGITS = 12

DEFAULTS: dict[str, Any] = {
    "noise": "none",
    "p": 0.0,
    "rounds": 4,
    "receivers": 2,
    "engine": "dense",
    "trials": 100_000,
    "seed": 0,
    "grid": None,
    "out": None,
    "format": "csv",
    "kicks_file": None,
}
_TYPES = {"p": float, "rounds": int, "receivers": int, "trials": int, "seed": int}


class ConfigError(ValueError):
    """Invalid command-line or config-file settings."""


@dataclass(frozen=True)
class ExperimentConfig:
    noise: str
    p: float
    rounds: int
    receivers: int
    engine: str
    trials: int
    seed: int
    grid: tuple[float, ...] | None
    out: str | None
    format: str
    kicks_file: str | None

    def noise_spec(self, p: float | None = None) -> NoiseSpec:
        if self.noise == "kicks":
            if not self.kicks_file:
                raise ConfigError("--noise kicks needs --kicks-file")
            return NoiseSpec("kicks", kicks=KickSamples.from_csv(self.kicks_file)).resolved()
        return NoiseSpec(self.noise, self.p if p is None else p)

    @property
    def engines(self) -> tuple[str, ...]:
        return ("dense", "pauliframe") if self.engine == "both" else (self.engine,)


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` with ``stop`` included when it lies on the grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(v) for v in parts)
    except ValueError as exc:
        raise ConfigError(f"grid values must be numbers: {text!r}") from exc
    if not step > 0:
        raise ConfigError("grid step must be positive")
    if stop < start:
        raise ConfigError("grid is empty: stop < start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # round away binary noise so that 0.1 steps print as 0.1, 0.2, ...
    return tuple(float(f"{start + k * step:.{SIG_DIGITS}g}") for k in range(count))


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _TYPES and isinstance(value, str):
        try:
            return _TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"{key} must be {_TYPES[key].__name__}, got {value!r}") from exc
    return value


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge flags, config-file section and defaults; the flag wins."""
    file_values: dict[str, str] = {}
    if args.config:
        parser = configparser.ConfigParser()
        try:
            with open(args.config, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        section = parser[args.command] if parser.has_section(args.command) else parser.defaults()
        file_values = {k.replace("-", "_"): v for k, v in section.items()}
        unknown = set(file_values) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        merged[key] = _coerce(key, flag if flag is not None else file_values.get(key, default))
    if isinstance(merged["grid"], str):
        merged["grid"] = parse_grid(merged["grid"])
    cfg = ExperimentConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.noise not in NOISE_KINDS:
        raise ConfigError(f"noise must be one of {NOISE_KINDS}")
    if cfg.engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if not 0.0 <= cfg.p <= 1.0:
        raise ConfigError("p must lie in [0, 1]")
    if cfg.rounds < 0:
        raise ConfigError("rounds must be nonnegative")
    if cfg.receivers < 2:
        raise ConfigError("need at least two receivers")
    if cfg.engine != "dense" and cfg.trials < 1:
        raise ConfigError("trials must be at least 1 for the pauliframe engine")
    if cfg.grid is not None and any(not 0.0 <= v <= 1.0 for v in cfg.grid):
        raise ConfigError("grid values must lie in [0, 1]")


# --- tables ----------------------------------------------------------------------


def _fmt(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.{SIG_DIGITS}g}")
    return v


def render(rows: list[dict[str, Any]], fmt: str) -> str:
    rows = [{k: _fmt(v) for k, v in row.items()} for row in rows]
    if fmt == "json":
        return "".join(json.dumps(row) + "\n" for row in rows)
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


KINDS = (RoundKind.GHZ, RoundKind.PARITY)


def _channel_rows(cfg: ExperimentConfig, spec: NoiseSpec, label_p: float) -> list[dict[str, Any]]:
    rows = []
    for kind in KINDS:
        for engine in cfg.engines:
            if engine == "dense":
                ch = complete_channel(round_carrier(spec, kind, cfg.receivers), kind)
                weights, block, se = ch.weights, ch.block_error, None
            else:
                mix = as_pauli_mixture(spec, n_parties=cfg.receivers + 1)
                est = estimate_flip_rates(mix, kind, cfg.trials, cfg.seed, n_receivers=cfg.receivers)
                if est.phase_rate:
                    raise ConsistencyError("Pauli-frame trials left Z errors on the message register")
                weights = (1.0 - est.logical_rate, est.logical_rate, 0.0, 0.0)
                block, se = est.rate, est.logical_std_error
            rows.append(
                {
                    "noise": cfg.noise,
                    "p": label_p,
                    "kind": kind.value,
                    "p_I": weights[0],
                    "p_X": weights[1],
                    "p_Y": weights[2],
                    "p_Z": weights[3],
                    "block_error": block,
                    "engine": engine,
                    "std_error": se,
                }
            )
    return rows


def _spec_and_label(cfg: ExperimentConfig, p: float | None = None) -> tuple[NoiseSpec, float]:
    spec = cfg.noise_spec(p)
    return spec, spec.p


def cmd_simulate(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    spec, _ = _spec_and_label(cfg)
    records = run_protocol(ProtocolConfig(n_receivers=cfg.receivers, rounds=cfg.rounds, noise=spec, seed=cfg.seed))
    rows = []
    for rec in records:
        ref = carrier_reference(rec.kind, cfg.receivers).density()
        rows.append(
            {
                "round": rec.index,
                "kind": rec.kind.value,
                "fidelity": rec.fidelity_to_sent,
                "carrier_distance": dk.trace_distance(rec.carrier_before, ref),
            }
        )
    return rows


def cmd_channel(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    spec, p = _spec_and_label(cfg)
    return _channel_rows(cfg, spec, p)


def cmd_sweep(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    if cfg.noise == "kicks":
        raise ConfigError("sweep varies p; use dephasing or depolarizing noise")
    grid = cfg.grid if cfg.grid is not None else (cfg.p,)
    rows = []
    for p in grid:
        for row in _channel_rows(cfg, cfg.noise_spec(p), p):
            # for a bit-flip channel this is 1 - 2 p_X / 3
            row["average_fidelity"] = (2.0 * row["p_I"] + 1.0) / 3.0
            rows.append(row)
    return rows


def cmd_ecc(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Logical rate over a grid of physical flip probabilities ``q``.

    With a noise kind other than ``none`` the grid is read as the carrier noise
    strength ``p``; ``q`` is then the parity-round flip weight and an extra column
    gives the logical rate of three dense protocol rounds on independent carriers.
    """
    grid = cfg.grid if cfg.grid is not None else (cfg.p,)
    rows = []
    for value in grid:
        row: dict[str, Any] = {}
        if cfg.noise == "none":
            q = value
        else:
            spec, p = _spec_and_label(cfg, value)
            carrier = round_carrier(spec, RoundKind.PARITY, cfg.receivers)
            q = complete_channel(carrier, RoundKind.PARITY).p_X
            row["p"] = p
            row["end_to_end_rate"] = ecc.end_to_end_channel(carrier).p_X
        pl = ecc.logical_error_rate(min(1.0, max(0.0, q)))
        row = {"q": q, "logical_rate": pl, "suppression_factor": pl / q if q > 0 else None, **row}
        rows.append(row)
    return rows


def _invariant_checks(receivers: int, p: float = 0.3) -> list[tuple[str, float, bool]]:
    tol = 1e-12
    out = []
    states = np.stack([ghz_basis_state(lab).amplitudes for lab in ghz_labels()])
    gram = float(np.abs(states.conj() @ states.T - np.eye(8)).max())
    out.append(("GHZ octet orthonormal", gram, gram < tol))
    for noise in ("dephasing", "depolarizing"):
        records = run_protocol(ProtocolConfig(n_receivers=2, rounds=8, noise=NoiseSpec(noise, p)))
        worst = max(
            dk.trace_distance(records[k].carrier_before, records[k + 2].carrier_before)
            for k in range(len(records) - 2)
        )
        out.append((f"carrier period 2 ({noise} p={p})", worst, worst < 1e-10))
    noiseless = run_protocol(ProtocolConfig(n_receivers=receivers, rounds=2, seed=1))
    worst = max(1.0 - r.fidelity_to_sent for r in noiseless)
    out.append((f"noiseless rounds exact ({receivers} receivers)", worst, worst < tol))
    alt = dk.trace_distance(noiseless[1].carrier_before, parity_state(receivers + 1, 0).density())
    out.append(("Hadamard step alternates carriers", alt, alt < tol))
    return out


def cmd_check(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    rows = [
        {"check": c.name, "residual": c.residual, "passed": c.passed} for c in conjugation_identities_check()
    ]
    rows += [{"check": n, "residual": r, "passed": bool(ok)} for n, r, ok in _invariant_checks(cfg.receivers)]
    return rows


COMMANDS = {
    "simulate": cmd_simulate,
    "channel": cmd_channel,
    "sweep": cmd_sweep,
    "ecc": cmd_ecc,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carrier-sim", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a section per subcommand")
    common.add_argument("--noise", choices=NOISE_KINDS)
    common.add_argument("--p", type=float, help="noise strength")
    common.add_argument("--rounds", type=int)
    common.add_argument("--receivers", type=int)
    common.add_argument("--engine", choices=ENGINES)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--grid", help="start:stop:step")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--kicks-file", dest="kicks_file", help="CSV of kick angles")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run the protocol round by round",
        "channel": "complete-channel Pauli weights",
        "sweep": "channel weights over a grid of p",
        "ecc": "repetition-code logical error rates",
        "check": "operator identities and invariants",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        rows = COMMANDS[args.command](cfg)
        text = render(rows, cfg.format)
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except ConsistencyError as exc:
        print(f"carrier-sim: consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (ValueError, OSError) as exc:
        print(f"carrier-sim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "check" and not all(r["passed"] for r in rows):
        return EXIT_CONSISTENCY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
