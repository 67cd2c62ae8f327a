"""Command-line entry point: margins, ber, factorize, validate.

Experiments are driven by a single YAML config file; a JSON run manifest
written next to every result captures the fully resolved configuration
and seed, and can itself be passed back as the config to reproduce the
run.  Exit codes: 0 success, 1 config error, 2 numerical failure,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .isi import FactorizationError, build_isi_matrix, whiten_model
from .pulse import PulseConfig, isi_taps
from .separability import margin_report
from .sim import DETECTORS, ber_sweep

__all__ = ["RunConfig", "load_config", "run", "main", "ConfigError"]

COMMANDS = ("margins", "ber", "factorize", "validate")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


class ConfigError(ValueError):
    """Configuration rejected; ``code`` is machine-parsable."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class ModelSection:
    beta: float = 0.3
    tau: list = field(default_factory=lambda: [0.8])
    tap_threshold: float = 1e-4
    max_half_span: int = 40


@dataclass
class MarginsSection:
    snr_db: list = field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0])
    n: int = 100
    snr_definition: str = "amp"
    domains: list = field(default_factory=lambda: ["gram"])


@dataclass
class ChannelSection:
    ebn0_db: list = field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0])
    n: int = 128
    seed: int = 12345
    eb_policy: str = "tau_es"
    min_errors: int = 200
    max_blocks: int = 50_000
    es: float = 1.0


@dataclass
class DetectorSection:
    name: list = field(default_factory=lambda: ["pda"])
    sweeps: int = 8
    epsilon: float = 0.4
    mlse_max_n: int = 16
    export_llr: bool = False


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "txt"])


@dataclass
class RunConfig:
    command: str = ""
    model: ModelSection = field(default_factory=ModelSection)
    margins: MarginsSection = field(default_factory=MarginsSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    output: OutputSection = field(default_factory=OutputSection)
    validate_only: list = field(default_factory=list)


_SECTIONS = {
    "model": ModelSection,
    "margins": MarginsSection,
    "channel": ChannelSection,
    "detector": DetectorSection,
    "output": OutputSection,
}


def _fill_section(cls, data: dict, section: str):
    obj = cls()
    known = set(obj.__dataclass_fields__)
    for key, value in data.items():
        if key not in known:
            raise ConfigError("E_UNKNOWN_KEY", f"unknown key {section}.{key}")
        setattr(obj, key, value)
    return obj


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _validate(config: RunConfig) -> RunConfig:
    if config.command and config.command not in COMMANDS:
        raise ConfigError("E_COMMAND", f"unknown command {config.command!r}")
    config.model.tau = [float(t) for t in _as_list(config.model.tau)]
    for tau in config.model.tau:
        if not 0.0 < tau <= 1.0:
            raise ConfigError("E_TAU", f"tau must be in (0, 1], got {tau}")
    if not 0.0 <= config.model.beta <= 1.0:
        raise ConfigError("E_BETA", f"beta must be in [0, 1], got {config.model.beta}")
    if config.detector.sweeps < 1:
        raise ConfigError("E_SWEEPS",
                          f"sweep count must be >= 1, got {config.detector.sweeps}")
    if not 0.0 <= config.detector.epsilon < 0.5:
        raise ConfigError("E_EPSILON",
                          f"epsilon must be in [0, 1/2), got {config.detector.epsilon}")
    config.detector.name = _as_list(config.detector.name)
    for name in config.detector.name:
        if name not in DETECTORS:
            raise ConfigError("E_DETECTOR", f"unknown detector {name!r}")
    if config.channel.n < 1 or config.margins.n < 1:
        raise ConfigError("E_N", "block length must be >= 1")
    if config.channel.eb_policy not in ("tau_es", "es"):
        raise ConfigError("E_EB_POLICY",
                          f"unknown eb_policy {config.channel.eb_policy!r}")
    if config.margins.snr_definition not in ("amp", "es"):
        raise ConfigError("E_SNR_DEF",
                          f"unknown snr_definition {config.margins.snr_definition!r}")
    for domain in config.margins.domains:
        if domain not in ("gram", "convolution"):
            raise ConfigError("E_DOMAIN", f"unknown margin domain {domain!r}")
    config.channel.ebn0_db = [float(x) for x in _as_list(config.channel.ebn0_db)]
    config.margins.snr_db = [float(x) for x in _as_list(config.margins.snr_db)]
    return config


def parse_config(data: dict) -> RunConfig:
    """Build a validated RunConfig from a raw mapping; unknown keys rejected."""
    if not isinstance(data, dict):
        raise ConfigError("E_TYPE", "config root must be a mapping")
    if "config" in data and isinstance(data["config"], dict):
        # A run manifest was passed back; reuse its embedded config.
        data = data["config"]
    config = RunConfig()
    for key, value in data.items():
        if key == "command":
            config.command = str(value)
        elif key == "validate_only":
            config.validate_only = _as_list(value)
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError("E_TYPE", f"section {key} must be a mapping")
            setattr(config, key, _fill_section(_SECTIONS[key], value, key))
        else:
            raise ConfigError("E_UNKNOWN_KEY", f"unknown key {key}")
    return _validate(config)


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError("E_IO", f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("E_PARSE", f"config is not valid YAML: {exc}") from exc
    return parse_config(data or {})


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_manifest(path: Path, config: RunConfig, outputs: list[str],
                    state: str, extra: dict | None = None) -> None:
    manifest = {
        "tool": "ftnlab",
        "version": __version__,
        "command": config.command,
        "config": asdict(config),
        "outputs": outputs,
        "completion": state,
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _pulse_config(config: RunConfig) -> PulseConfig:
    return PulseConfig(beta=config.model.beta,
                       tap_threshold=config.model.tap_threshold,
                       max_half_span=config.model.max_half_span)


def _run_margins(config: RunConfig, out_dir: Path) -> int:
    reports = margin_report(
        config.model.beta, config.model.tau, config.margins.snr_db,
        N=config.margins.n, pulse_config=_pulse_config(config),
        snr_definition=config.margins.snr_definition,
        domains=tuple(config.margins.domains))
    outputs = []
    csv_path = out_dir / "margins.csv"
    with open(csv_path, "w") as handle:
        handle.write("beta,tau,snr_db,delta_max,delta_ave,gauss_max,gauss_ave,"
                     "domain,calibrated\n")
        for rep in reports:
            dmax, dave = rep.table_linear()
            for i, snr in enumerate(rep.snr_list):
                gmax, gave = rep.table_gaussian(i)
                handle.write(",".join([
                    _fmt(rep.beta), _fmt(rep.tau), _fmt(snr), _fmt(dmax),
                    _fmt(dave), _fmt(gmax), _fmt(gave), rep.domain,
                    str(rep.calibrated).lower()]) + "\n")
    outputs.append(str(csv_path))

    if "txt" in config.output.formats:
        txt_path = out_dir / "margins.txt"
        with open(txt_path, "w") as handle:
            for domain in dict.fromkeys(r.domain for r in reports):
                rows = [r for r in reports if r.domain == domain]
                taus = [r.tau for r in rows]
                handle.write(f"Linear margins (beta={config.model.beta}, "
                             f"domain={domain})\n")
                handle.write("tau      " + "".join(f"{t:>12.2f}" for t in taus) + "\n")
                handle.write("max,ave  " + "".join(
                    "{:>12}".format("%.2f, %.2f" % r.table_linear()) for r in rows)
                    + "\n\n")
                handle.write(f"Gaussian margins (beta={config.model.beta}, "
                             f"domain={domain})\n")
                handle.write("SNR(dB)  " + "".join(f"{t:>12.2f}" for t in taus) + "\n")
                for i, snr in enumerate(rows[0].snr_list):
                    handle.write(f"{snr:<9.0f}" + "".join(
                        "{:>12}".format("%.2f, %.2f" % r.table_gaussian(i))
                        for r in rows) + "\n")
                handle.write("\n")
        outputs.append(str(txt_path))
    _write_manifest(out_dir / "margins_manifest.json", config, outputs, "complete")
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def _run_ber(config: RunConfig, out_dir: Path, workers: int) -> int:
    outputs = []
    csv_path = out_dir / "ber.csv"
    llr_path = out_dir / "llr.csv"
    manifest_path = out_dir / "ber_manifest.json"
    llr_handle = None
    if config.detector.export_llr:
        llr_handle = open(llr_path, "w")
        llr_handle.write("detector,tau,ebn0_db,block,llr\n")

    def llr_collector(name, ebn0, block, llr):
        llr_handle.write(f"{name},{_fmt(tau)},{_fmt(ebn0)},{block},"
                         + ";".join(_fmt(x) for x in llr) + "\n")

    try:
        with open(csv_path, "w") as handle:
            handle.write("detector,beta,tau,N,ebn0_db,bits,bit_errors,ber,ci95,"
                         "update_count_mean,wall_time\n")
            for tau in config.model.tau:
                points = ber_sweep(
                    config.model.beta, tau, config.channel.n,
                    config.channel.ebn0_db, config.detector.name,
                    seed=config.channel.seed, Es=config.channel.es,
                    eb_policy=config.channel.eb_policy,
                    min_errors=config.channel.min_errors,
                    max_blocks=config.channel.max_blocks,
                    sweeps=config.detector.sweeps,
                    epsilon=config.detector.epsilon,
                    mlse_max_n=config.detector.mlse_max_n,
                    workers=workers,
                    llr_collector=llr_collector if llr_handle else None)
                for p in points:
                    handle.write(",".join([
                        p.detector, _fmt(config.model.beta), _fmt(tau),
                        str(config.channel.n), _fmt(p.ebn0_db), str(p.bits),
                        str(p.bit_errors), _fmt(p.ber), _fmt(p.ci95),
                        _fmt(p.update_count_mean), _fmt(p.wall_time)]) + "\n")
    except Exception:
        _write_manifest(manifest_path, config, outputs, "partial")
        raise
    finally:
        if llr_handle:
            llr_handle.close()
    outputs.append(str(csv_path))
    if llr_handle:
        outputs.append(str(llr_path))
    _write_manifest(manifest_path, config, outputs, "complete")
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def _run_factorize(config: RunConfig, out_dir: Path) -> int:
    outputs = []
    summary = []
    for tau in config.model.tau:
        taps, whitened = whiten_model(config.model.beta, tau,
                                      config=_pulse_config(config))
        tag = ("%.4g" % tau).replace(".", "p")
        taps_path = out_dir / f"taps_tau{tag}.csv"
        with open(taps_path, "w") as handle:
            handle.write("lag,g\n")
            for lag, value in enumerate(taps.one_sided):
                handle.write(f"{lag},{_fmt(value)}\n")
        v_path = out_dir / f"whitened_tau{tag}.csv"
        with open(v_path, "w") as handle:
            handle.write("n,v\n")
            for n, value in enumerate(whitened.v):
                handle.write(f"{n},{_fmt(value)}\n")
        outputs.extend([str(taps_path), str(v_path)])
        for domain, source in (("gram", taps), ("convolution", whitened)):
            mat = build_isi_matrix(source, min(config.channel.n, 64), tau,
                                   config.channel.es, domain)
            mat_path = out_dir / f"matrix_{domain}_tau{tag}.csv"
            np.savetxt(mat_path, mat.entries, delimiter=",", fmt="%.17g")
            outputs.append(str(mat_path))
        summary.append({"tau": tau, "L_taps": taps.L, "L_whitened": whitened.L,
                        "residual": whitened.residual})
        print(f"tau={tau}: L={taps.L} residual={whitened.residual:.3e}")
    _write_manifest(out_dir / "factorize_manifest.json", config, outputs,
                    "complete", extra={"factorizations": summary})
    return EXIT_OK


def _run_validate(config: RunConfig, out_dir: Path) -> int:
    from .acceptance import run_criteria

    only = [str(x) for x in config.validate_only] or None
    results = []
    failed = False
    for result in run_criteria(only):
        results.append(result)
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.criterion}: {result.details}")
        failed |= not result.passed
    payload = [{"criterion": r.criterion, "passed": r.passed, "details": r.details,
                "metrics": r.metrics} for r in results]
    (out_dir / "validate.json").write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def run(config: RunConfig, *, workers: int = 1) -> int:
    """Execute one configured command; returns the process exit code."""
    out_dir = Path(config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        if config.command == "margins":
            code = _run_margins(config, out_dir)
        elif config.command == "ber":
            code = _run_ber(config, out_dir, workers)
        elif config.command == "factorize":
            code = _run_factorize(config, out_dir)
        elif config.command == "validate":
            code = _run_validate(config, out_dir)
        else:
            raise ConfigError("E_COMMAND", f"no command selected ({config.command!r})")
    except FactorizationError as exc:
        print(f"error code=E_NUMERICAL message={str(exc)!r}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"done in {time.perf_counter() - start:.1f}s")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ftnlab",
        description="Faster-than-Nyquist BPSK signaling lab: margin reports, "
                    "Monte Carlo BER sweeps, whitening factorization checks, "
                    "and the validation suite.",
        epilog="Config defaults: model.beta=0.3, model.tau=[0.8], "
               "margins.n=100, margins.snr_db=[0,2,4,6,8], channel.n=128, "
               "channel.ebn0_db=[0..8], channel.seed=12345, "
               "channel.min_errors=200, channel.max_blocks=50000, "
               "detector.name=[pda], detector.sweeps=8, detector.epsilon=0.4.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="YAML config (or a previous run manifest)")
    parser.add_argument("--output-dir", help="override output.directory")
    parser.add_argument("--seed", type=int, help="override channel.seed")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for the BER harness")
    parser.add_argument("--only", help="validate: comma-separated criteria subset")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config) if args.config else _validate(RunConfig())
        config.command = args.command
        if args.output_dir:
            config.output.directory = args.output_dir
        if args.seed is not None:
            config.channel.seed = args.seed
        if args.only:
            config.validate_only = args.only.split(",")
        _validate(config)
    except ConfigError as exc:
        print(f"error code={exc.code} message={str(exc)!r}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config, workers=max(1, args.workers))


if __name__ == "__main__":
    sys.exit(main())
