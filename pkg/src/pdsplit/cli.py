"""Command-line front end: instance generation, validation, runs, and sweeps.

    pdsplit validate --problem fused-lasso --n 100 --p 500 --gamma-factor 1.5 --lambda 0.125
    pdsplit run      --problem toy-quadratic --n 20 --algorithm pd3o --output toy.csv
    pdsplit compare  --algorithms pd3o,pdfp,condat-vu,afba --gamma-factors 1.0,1.5,1.99 \
                     --lambdas 0.125 --output sweep.csv

Parameters are entered as (gamma-factor, lambda): the primal step is
gamma = factor * beta and the dual step is derived as delta = lambda / gamma,
so a sweep over step sizes is a plain grid over those two numbers.  Exit
codes: 0 success, 1 parse error, 2 inadmissible step sizes, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .algorithms import (
    AlgorithmId,
    StepSizes,
    solve,
    validate_stepsizes,
)
from .exceptions import (
    ConfigParseError,
    NumericalFailureError,
    PdsplitError,
    StepSizeError,
)
from .metrics import CSV_HEADER
from .problems import (
    gen_elastic_net_strongly_convex,
    gen_fused_lasso,
    gen_toy_quadratic,
    reference_solution,
)

PROBLEMS = ("fused-lasso", "elastic-net", "toy-quadratic")

# The three-function schemes whose admissibility the validate report covers.
REPORTED_ALGORITHMS = (
    AlgorithmId.PD3O,
    AlgorithmId.PDFP,
    AlgorithmId.CONDAT_VU,
    AlgorithmId.AFBA,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INADMISSIBLE = 2
EXIT_NUMERICAL = 3


@dataclass
class RunConfig:
    """Flat run description; serializes to key=value lines, round-trip exact."""

    problem: str = "fused-lasso"
    n: int = 100
    p: int = 500
    seed: int = 0
    noise_var: float = 0.01
    mu1: float = 20.0
    mu2: float = 200.0
    algorithm: str = "pd3o"
    gamma_factor: float = 1.0
    lam: float = 0.125
    theta: float = 1.0
    max_iters: int = 5000
    residual_tol: float = 1e-6
    log_every: int = 1
    output: str = "run.csv"
    force: bool = False
    reference_iters: int = 0

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            key = "lambda" if f.name == "lam" else f.name
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


_FIELD_BY_KEY = {
    ("lambda" if f.name == "lam" else f.name): f for f in dataclasses.fields(RunConfig)
}


def config_from_text(text: str) -> RunConfig:
    """Parse key=value lines; raises ConfigParseError with line/column."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError("expected key=value", line_no, 1)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        f = _FIELD_BY_KEY.get(key)
        if f is None:
            raise ConfigParseError(f"unknown key {key!r}", line_no, 1)
        col = raw.index("=") + 2
        try:
            if f.type == "bool":
                if val not in ("true", "false"):
                    raise ValueError(val)
                parsed = val == "true"
            elif f.type == "int":
                parsed = int(val)
            elif f.type == "float":
                parsed = float(val)
            else:
                parsed = val
        except ValueError:
            raise ConfigParseError(
                f"bad value {val!r} for {key}", line_no, col
            ) from None
        values[f.name] = parsed
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    return config_from_text(Path(path).read_text())


def build_instance(cfg: RunConfig):
    if cfg.problem == "fused-lasso":
        return gen_fused_lasso(cfg.n, cfg.p, cfg.seed, cfg.noise_var, cfg.mu1, cfg.mu2)
    if cfg.problem == "elastic-net":
        return gen_elastic_net_strongly_convex(cfg.n, cfg.p, cfg.seed, cfg.mu1, cfg.mu2)
    if cfg.problem == "toy-quadratic":
        return gen_toy_quadratic(cfg.n, cfg.seed)
    raise ConfigParseError(f"unknown problem {cfg.problem!r}", 1, 1)


def steps_for(cfg: RunConfig, instance, gamma_factor=None, lam=None) -> StepSizes:
    gf = cfg.gamma_factor if gamma_factor is None else gamma_factor
    lv = cfg.lam if lam is None else lam
    return StepSizes.from_lambda(gf * instance.beta, lv, cfg.theta)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _record_to_csv_text(record, series_id=None) -> str:
    import io

    buf = io.StringIO()
    record.write_csv(buf, series_id=series_id)
    return buf.getvalue()


def cmd_validate(cfg: RunConfig) -> int:
    instance = build_instance(cfg)
    steps = steps_for(cfg, instance)
    print(f"instance: {json.dumps(instance.descriptor, sort_keys=True)}")
    print(f"beta={instance.beta:.6g} norm_AAt={instance.norm_AAt:.6g} "
          f"gamma={steps.gamma:.6g} delta={steps.delta:.6g} lambda={steps.lam:.6g}")
    for alg in REPORTED_ALGORITHMS:
        verdict = validate_stepsizes(alg, steps, instance.beta, instance.norm_AAt)
        if verdict.valid:
            print(f"{alg.value}: admissible")
        else:
            print(f"{alg.value}: rejected ({verdict.violated})")
    configured = AlgorithmId(cfg.algorithm)
    verdict = validate_stepsizes(configured, steps, instance.beta, instance.norm_AAt)
    if configured not in REPORTED_ALGORITHMS:
        state = "admissible" if verdict.valid else f"rejected ({verdict.violated})"
        print(f"{configured.value}: {state}")
    return EXIT_OK if verdict.valid else EXIT_INADMISSIBLE


def cmd_run(cfg: RunConfig) -> int:
    instance = build_instance(cfg)
    steps = steps_for(cfg, instance)
    reference = None
    if cfg.reference_iters > 0:
        ref = reference_solution(instance, cfg.reference_iters)
        reference = (ref.x, ref.s)
    try:
        record = solve(
            instance.spec, AlgorithmId(cfg.algorithm), steps,
            max_iters=cfg.max_iters, residual_tol=cfg.residual_tol,
            norm_AAt=instance.norm_AAt, reference=reference,
            log_every=cfg.log_every, force=cfg.force,
            descriptor=instance.descriptor,
        )
    except StepSizeError as err:
        print(f"inadmissible step sizes: {err}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except NumericalFailureError as err:
        print(f"numerical failure at iteration {err.iteration}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = Path(cfg.output)
    _atomic_write(out, _record_to_csv_text(record))
    meta = dict(record.metadata)
    meta["config"] = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    _atomic_write(out.with_suffix(out.suffix + ".meta.json"),
                  json.dumps(meta, sort_keys=True, indent=2, default=str) + "\n")
    print(f"algorithm={record.metadata['algorithm']} "
          f"iterations={record.metadata['iterations']} "
          f"objective={record.metadata['final_objective']:.12g} "
          f"residual={record.metadata['final_residual']:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def _series_id(alg: str, gf: float, lam: float) -> str:
    return f"{alg}_gf{gf:g}_lam{lam:g}"


def cmd_compare(cfg: RunConfig, algorithms, gamma_factors, lambdas) -> int:
    instance = build_instance(cfg)
    ref_iters = cfg.reference_iters if cfg.reference_iters > 0 else 20000
    ref = reference_solution(instance, ref_iters)
    reference = (ref.x, ref.s)

    out = Path(cfg.output)
    cell_dir = out.parent / (out.stem + ".cells")
    merged_lines = [",".join(("series_id",) + CSV_HEADER)]
    manifest = {
        "instance": instance.descriptor,
        "reference_iters": ref_iters,
        "reference_objective": ref.objective,
        "series": [],
        "skipped": [],
    }
    status = EXIT_OK
    for alg in algorithms:
        for gf in gamma_factors:
            for lam in lambdas:
                sid = _series_id(alg, gf, lam)
                steps = steps_for(cfg, instance, gamma_factor=gf, lam=lam)
                verdict = validate_stepsizes(AlgorithmId(alg), steps,
                                             instance.beta, instance.norm_AAt)
                if not verdict.valid and not cfg.force:
                    print(f"skip {sid}: {verdict.violated}")
                    manifest["skipped"].append(
                        {"series_id": sid, "algorithm": alg, "gamma_factor": gf,
                         "lambda": lam, "reason": verdict.violated})
                    continue
                cell_cfg = dataclasses.replace(cfg, algorithm=alg)
                try:
                    record = solve(
                        instance.spec, AlgorithmId(alg), steps,
                        max_iters=cell_cfg.max_iters,
                        residual_tol=cell_cfg.residual_tol,
                        norm_AAt=instance.norm_AAt, reference=reference,
                        log_every=cell_cfg.log_every, force=cell_cfg.force,
                        descriptor=instance.descriptor,
                    )
                except NumericalFailureError as err:
                    print(f"numerical failure in {sid} at iteration {err.iteration}",
                          file=sys.stderr)
                    status = EXIT_NUMERICAL
                    continue
                cell_text = _record_to_csv_text(record, series_id=sid)
                _atomic_write(cell_dir / f"{sid}.csv", cell_text)
                merged_lines.extend(cell_text.splitlines()[1:])
                manifest["series"].append({
                    "series_id": sid, "algorithm": alg, "gamma_factor": gf,
                    "lambda": lam, "csv": str(cell_dir / f"{sid}.csv"),
                    "iterations": record.metadata["iterations"],
                    "final_objective": record.metadata["final_objective"],
                    "final_residual": record.metadata["final_residual"],
                })
                print(f"ran {sid}: iterations={record.metadata['iterations']} "
                      f"objective={record.metadata['final_objective']:.12g}")
    _atomic_write(out, "\n".join(merged_lines) + "\n")
    _atomic_write(out.with_suffix(out.suffix + ".manifest.json"),
                  json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {out}")
    return status


def _parse_list(text: str, cast):
    return [cast(tok) for tok in text.split(",") if tok]


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdsplit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--problem", choices=PROBLEMS)
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--noise-var", type=float, dest="noise_var")
        p.add_argument("--mu1", type=float)
        p.add_argument("--mu2", type=float)
        p.add_argument("--algorithm", choices=[a.value for a in AlgorithmId])
        p.add_argument("--gamma-factor", type=float, dest="gamma_factor")
        p.add_argument("--lambda", type=float, dest="lam")
        p.add_argument("--theta", type=float)
        p.add_argument("--max-iters", type=int, dest="max_iters")
        p.add_argument("--tol", type=float, dest="residual_tol")
        p.add_argument("--log-every", type=int, dest="log_every")
        p.add_argument("--output", type=str)
        p.add_argument("--force", action="store_true", default=None)
        p.add_argument("--reference-iters", type=int, dest="reference_iters")

    add_common(sub.add_parser("validate", help="report step-size admissibility"))
    add_common(sub.add_parser("run", help="solve one configuration, write CSV"))
    cmp_parser = sub.add_parser("compare", help="sweep a parameter grid into one CSV")
    add_common(cmp_parser)
    cmp_parser.add_argument("--algorithms", default="pd3o,pdfp,condat-vu,afba")
    cmp_parser.add_argument("--gamma-factors", default="1.0", dest="gamma_factors")
    cmp_parser.add_argument("--lambdas", default="0.125")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    return dataclasses.replace(cfg, **overrides)


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_PARSE
    try:
        cfg = config_from_args(args)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(
                cfg,
                _parse_list(args.algorithms, str),
                _parse_list(args.gamma_factors, float),
                _parse_list(args.lambdas, float),
            )
    except ConfigParseError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except PdsplitError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
