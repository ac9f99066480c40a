"""``bsblfm`` command-line front end.

Exit codes: 0 clean, 2 usage, 3 data format or I/O, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import dwt53, sensing
from .bsbl_fm import DegeneracyError, Model, SolverConfig, noisy_beta_inv, solve
from .dictionary import dct_dictionary, effective_operator
from .metrics import prd, time_op
from .signal_model import PartitionError, block_sparse_signal, packetize, uniform_partition

FORMAT_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_DEGENERATE = 0, 2, 3, 4
THREADS_ENV = "BSBL_THREADS"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- signal CSV ----------------------------------------------------------------


def read_signal_csv(path, n: int) -> tuple[list[np.ndarray], list[int], int]:
    """Load packets of length ``n`` from a signal CSV.

    Single-column files are a sample stream cut into packets (a short tail
    is dropped). Multi-column files hold one packet per row. Files written by
    this tool start with a ``# {json}`` line; ``"layout": "indexed"`` means
    the first column is the packet index.

    Returns the packets, their indices and the number of dropped samples.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:])
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: bad metadata line") from exc
        lines = lines[1:]
    try:
        rows = [[float(v) for v in row] for row in csv.reader(lines) if row]
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no samples")
    if meta.get("layout") == "indexed":
        indices = [int(r[0]) for r in rows]
        rows = [r[1:] for r in rows]
    else:
        indices = None
    if all(len(r) == 1 for r in rows) and n != 1:
        split = packetize(np.array([r[0] for r in rows]), n)
        if len(split) == 0:
            raise DataError(f"{path}: stream of {split.dropped} samples is shorter than packet size {n}")
        return [p.samples for p in split], [p.index for p in split], split.dropped
    for lineno, r in enumerate(rows, start=1):
        if len(r) != n:
            raise DataError(f"{path}: packet {lineno} has {len(r)} samples but the packet size is {n}")
    return [np.array(r) for r in rows], indices or list(range(len(rows))), 0


def write_signal_csv(path, packets, indices, meta: dict) -> None:
    meta = dict(meta, format_version=FORMAT_VERSION, layout="indexed")
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for idx, x in zip(indices, packets):
        writer.writerow([int(idx)] + [repr(float(v)) for v in x])
    Path(path).write_text(buf.getvalue())


# -- workers ---------------------------------------------------------------------


def worker_count(requested: int | None) -> int:
    """``--workers`` wins, then ``BSBL_THREADS``, then the number of cores."""
    if requested is not None:
        count = requested
    elif os.environ.get(THREADS_ENV):
        try:
            count = int(os.environ[THREADS_ENV])
        except ValueError as exc:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {os.environ[THREADS_ENV]!r}") from exc
    else:
        count = os.cpu_count() or 1
    if count < 1:
        raise UsageError(f"worker count must be >= 1, got {count}")
    return count


def run_ordered(fn, jobs: list, workers: int) -> list:
    """Map ``fn`` over ``jobs``; results come back in job order whatever the pool size."""
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


@lru_cache(maxsize=16)
def _operator(m: int, n: int, k: int, seed: int, dict_kind: str):
    phi = sensing.generate(m, n, k, seed)
    if dict_kind == "dct":
        D = dct_dictionary(n)
        return effective_operator(phi, D), D
    return phi.dense(), None


def _recover_job(job: dict) -> dict:
    """Solve one packet; degeneracy is reported, not raised."""
    m, n, k, seed = job["matrix"]
    op, D = _operator(m, n, k, seed, job["dict"])
    y = np.asarray(job["y"], dtype=float)
    beta_inv = noisy_beta_inv(y) if job["beta_inv"] == "noisy" else float(job["beta_inv"])
    cfg = SolverConfig(beta_inv=beta_inv, eta=job["eta"], model=Model(job["model"]),
                       max_iter=job["max_iter"])
    part = uniform_partition(n, job["block_size"])
    try:
        report, seconds = time_op(lambda: solve(y, op, part, cfg, dictionary=D))
    except DegeneracyError as exc:
        return {"index": job["index"], "failed": True, "error": str(exc)}
    out = dict(report.summary(), index=job["index"], failed=False, wall_time=seconds,
               beta_inv=beta_inv, x_hat=report.x_hat)
    if job.get("x") is not None:
        out["prd"] = prd(job["x"], report.x_hat)
    return out


# -- subcommands -----------------------------------------------------------------


def cmd_gen_matrix(args) -> int:
    if args.k < 1:
        raise UsageError(f"--k must be >= 1, got {args.k}")
    try:
        phi = sensing.generate(args.m, args.n, args.k, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        sensing.write_matrix_header(phi, args.out)
    except OSError as exc:
        raise DataError(f"{args.out}: {exc.strerror or exc}") from exc
    return EXIT_OK


def _load_matrix(path):
    try:
        return sensing.read_matrix_header(path)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except KeyError as exc:
        raise UsageError(f"{path}: {exc.args[0]}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def cmd_compress(args) -> int:
    if args.mode == "cs":
        if args.matrix is None:
            raise UsageError("--mode cs needs --matrix")
        phi = _load_matrix(args.matrix)
        packets, indices, dropped = read_signal_csv(args.input, phi.n)
        meas = [sensing.encode_stream(phi, x, idx) for x, idx in zip(packets, indices)]
        meta = {"mode": "cs", "m": phi.m, "n": phi.n, "k": phi.k, "seed": phi.seed,
                "source": str(args.input), "dropped_samples": dropped}
        sensing.write_measurements(args.out, meas, meta)
    else:
        try:
            dwt53.band_sizes(args.n, args.stages)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if args.T < 0:
            raise UsageError(f"--T must be >= 0, got {args.T}")
        packets, indices, dropped = read_signal_csv(args.input, args.n)
        streams = []
        for x, idx in zip(packets, indices):
            if not np.all(x == np.round(x)):
                if not args.quantize:
                    raise DataError(f"{args.input}: packet {idx} is not integer valued; pass --quantize to round")
                x = np.rint(x)
            coeffs = dwt53.forward(x.astype(np.int64), args.stages)
            streams.append((idx, dwt53.threshold_compress(coeffs, args.T)))
        meta = {"mode": "dwt", "n": args.n, "stages": args.stages, "T": args.T,
                "source": str(args.input), "dropped_samples": dropped, "quantize": args.quantize}
        dwt53.write_streams(args.out, streams, meta)
    if dropped:
        print(f"warning: dropped {dropped} trailing samples", file=sys.stderr)
    return EXIT_OK


def _matrix_params(args, meta: dict) -> tuple[int, int, int, int]:
    params = {}
    if args.matrix is not None:
        phi = _load_matrix(args.matrix)
        params = {"m": phi.m, "n": phi.n, "k": phi.k, "seed": phi.seed}
    else:
        params = {key: meta.get(key) for key in ("m", "n", "k", "seed")}
    for key in ("m", "n", "k", "seed"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    missing = [key for key, v in params.items() if v is None]
    if missing:
        raise UsageError(f"sensing matrix {', '.join(missing)} unknown; pass --matrix or --{missing[0]}")
    return int(params["m"]), int(params["n"]), int(params["k"]), int(params["seed"])


def _parse_beta_inv(text: str):
    if text == "noisy":
        return text
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'noisy', got {text!r}") from exc
    if not value > 0:
        raise argparse.ArgumentTypeError(f"beta-inv must be positive, got {text}")
    return value


def cmd_recover(args) -> int:
    try:
        meas, meta = sensing.read_measurements(args.measurements)
    except OSError as exc:
        raise DataError(f"{args.measurements}: {exc.strerror or exc}") from exc
    except (sensing.FormatError, KeyError, UnicodeDecodeError) as exc:
        raise DataError(f"{args.measurements}: {exc}") from exc
    m, n, k, seed = _matrix_params(args, meta)
    for mm in meas:
        if len(mm) != m:
            raise DataError(f"packet {mm.packet_index} has {len(mm)} measurements but the matrix has m={m}")
    try:
        uniform_partition(n, args.block_size)
        sensing.generate(m, n, k, seed)
    except (PartitionError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    refs = {}
    if args.reference is not None:
        ref_packets, ref_idx, _ = read_signal_csv(args.reference, n)
        refs = dict(zip(ref_idx, ref_packets))
    jobs = [{"index": mm.packet_index, "y": mm.values, "matrix": (m, n, k, seed), "dict": args.dict,
             "model": args.model, "beta_inv": args.beta_inv, "eta": args.eta,
             "max_iter": args.max_iter, "block_size": args.block_size, "x": refs.get(mm.packet_index)}
            for mm in meas]
    results = sorted(run_ordered(_recover_job, jobs, worker_count(args.workers)), key=lambda r: r["index"])
    params = {"m": m, "n": n, "k": k, "seed": seed, "dict": args.dict, "model": args.model,
              "beta_inv": args.beta_inv, "eta": args.eta, "block_size": args.block_size,
              "max_iter": args.max_iter, "measurements": str(args.measurements)}
    ok = [r for r in results if not r["failed"]]
    write_signal_csv(args.out, [r["x_hat"] for r in ok], [r["index"] for r in ok], params)
    reports = [{key: v for key, v in r.items() if key != "x_hat"} for r in results]
    sidecar = {"format_version": FORMAT_VERSION, "parameters": params, "packets": reports}
    Path(_sidecar_path(args.out)).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    failed = [r["index"] for r in results if r["failed"]]
    if failed:
        print(f"error: {len(failed)} packet(s) failed: {failed}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def _sidecar_path(out) -> str:
    return str(out) + ".json"


def cmd_dwt_expand(args) -> int:
    try:
        streams, meta = dwt53.read_streams(args.streams)
    except OSError as exc:
        raise DataError(f"{args.streams}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError) as exc:
        raise DataError(f"{args.streams}: {exc}") from exc
    signals = [dwt53.inverse(s.expand()) for _, s in streams]
    indices = [idx for idx, _ in streams]
    params = {key: meta.get(key) for key in ("n", "stages", "T")}
    params["streams"] = str(args.streams)
    write_signal_csv(args.out, signals, indices, params)
    summary = {"format_version": FORMAT_VERSION, "parameters": params, "packets": len(signals),
               "kept": int(sum(s.values.size for _, s in streams))}
    if args.reference is not None:
        ref_packets, ref_idx, _ = read_signal_csv(args.reference, int(meta["n"]))
        refs = dict(zip(ref_idx, ref_packets))
        missing = [i for i in indices if i not in refs]
        if missing:
            raise DataError(f"{args.reference}: no reference for packets {missing}")
        per = [prd(refs[i], x) for i, x in zip(indices, signals)]
        summary["prd"] = per
        summary["prd_mean"] = float(np.mean(per))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- bench -----------------------------------------------------------------------


@dataclass
class BenchConfig:
    n: int = 512
    block_size: int = 32
    k: int = 2
    cr_list: list = field(default_factory=lambda: [0.5, 0.6, 0.7])
    model: list = field(default_factory=lambda: ["SIM", "AR1"])
    beta_inv: float | str = 1e-6
    eta: float = 1e-5
    seed: int = 0
    input: str = "synthetic"
    synthetic_params: dict = field(default_factory=lambda: {"active_blocks": 3, "intra_r": 0.95,
                                                           "noise_db": None})
    dict: str = "dct"
    trials: int = 10
    repeats: int = 1
    max_iter: int = 1000

    def __post_init__(self):
        if isinstance(self.model, (str, int)):
            self.model = [self.model]
        try:
            self.model = [Model[m.upper()].name if isinstance(m, str) else Model(m).name for m in self.model]
        except (KeyError, ValueError) as exc:
            raise UsageError(f"unknown model in {self.model!r}; use SIM/AR1 or 0/1") from exc
        if not self.cr_list:
            raise UsageError("cr_list is empty")
        if any(not 0 <= cr < 1 for cr in self.cr_list):
            raise UsageError(f"every compression ratio must lie in [0, 1), got {self.cr_list}")
        if self.block_size < 1 or self.n % self.block_size:
            raise UsageError(f"block_size {self.block_size} does not divide n={self.n}")
        if self.dict not in ("dct", "none"):
            raise UsageError(f"dict must be 'dct' or 'none', got {self.dict!r}")
        if self.trials < 1 or self.repeats < 1:
            raise UsageError("trials and repeats must be >= 1")
        if self.beta_inv != "noisy" and not (isinstance(self.beta_inv, (int, float)) and self.beta_inv > 0):
            raise UsageError(f"beta_inv must be positive or 'noisy', got {self.beta_inv!r}")

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise DataError(f"{path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from exc
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**raw)


def _synthetic_packets(cfg: BenchConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    part = uniform_partition(cfg.n, cfg.block_size)
    D = dct_dictionary(cfg.n) if cfg.dict == "dct" else None
    sp = cfg.synthetic_params
    out = []
    for _ in range(cfg.trials):
        theta, _ = block_sparse_signal(part, sp.get("active_blocks", 3), sp.get("intra_r", 0.95), rng)
        out.append(D.synthesize(theta) if D is not None else theta)
    return out


def _matrix_seed(seed: int, cr_index: int) -> int:
    return int(np.random.SeedSequence([seed, 2, cr_index]).generate_state(1)[0])


def _bench_job(job: dict) -> dict:
    times, result = [], None
    for _ in range(job["repeats"]):
        result = _recover_job(job)
        times.append(result.get("wall_time", 0.0))
    result["times"] = times
    result.pop("x_hat", None)
    return result


def cmd_bench(args) -> int:
    cfg = BenchConfig.from_json(args.config)
    if cfg.input == "synthetic":
        clean = _synthetic_packets(cfg)
    else:
        clean, _, _ = read_signal_csv(cfg.input, cfg.n)
        clean = clean[:cfg.trials]
    noise_db = cfg.synthetic_params.get("noise_db") if cfg.input == "synthetic" else None
    noise_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 3]))
    # at least 5 timed runs per cell
    repeats = max(cfg.repeats, math.ceil(5 / len(clean)))
    jobs, cells = [], []
    for ci, cr in enumerate(cfg.cr_list):
        m = sensing.measurements_for_cr(cfg.n, cr)
        if m >= cfg.n:
            raise UsageError(f"cr={cr} leaves m={m} >= n={cfg.n}")
        seed = _matrix_seed(cfg.seed, ci)
        phi = sensing.generate(m, cfg.n, cfg.k, seed)
        ys = []
        for x in clean:
            y = sensing.encode(phi, x).values
            if noise_db is not None:
                sigma = np.linalg.norm(y) / np.sqrt(m) * 10 ** (-noise_db / 20)
                y = y + sigma * noise_rng.standard_normal(m)
            ys.append(y)
        for model in cfg.model:
            cells.append((cr, model))
            for j, (x, y) in enumerate(zip(clean, ys)):
                jobs.append({"index": j, "cell": len(cells) - 1, "y": y, "x": x,
                             "matrix": (m, cfg.n, cfg.k, seed), "dict": cfg.dict,
                             "model": int(Model[model]), "beta_inv": cfg.beta_inv, "eta": cfg.eta,
                             "max_iter": cfg.max_iter, "block_size": cfg.block_size,
                             "repeats": repeats})
    results = run_ordered(_bench_job, jobs, worker_count(args.workers))
    header = ["cr", "model", "prd_mean", "prd_median", "time_median_s", "time_mean_s",
              "iterations_mean", "errors"]
    buf = io.StringIO()
    meta = dict(asdict(cfg), format_version=FORMAT_VERSION, timed_runs_per_packet=repeats)
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    total_errors = 0
    for c, (cr, model) in enumerate(cells):
        rs = [r for r, job in zip(results, jobs) if job["cell"] == c]
        ok = [r for r in rs if not r["failed"]]
        errors = len(rs) - len(ok)
        total_errors += errors
        prds = [r["prd"] for r in ok]
        times = [t for r in ok for t in r["times"]]
        row = [repr(float(cr)), model]
        if ok:
            row += [repr(float(np.mean(prds))), repr(float(np.median(prds)))]
            row += ["", ""] if args.no_timing else [repr(statistics.median(times)), repr(statistics.fmean(times))]
            row += [repr(float(np.mean([r["iterations"] for r in ok])))]
        else:
            row += ["", "", "", "", ""]
        row.append(errors)
        writer.writerow(row)
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(args.out).write_text(buf.getvalue())
    if total_errors:
        print(f"warning: {total_errors} packet(s) failed; see the errors column", file=sys.stderr)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bsblfm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-matrix", help="write a sparse binary sensing matrix header")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_matrix)

    c = sub.add_parser("compress", help="compress a signal CSV with the CS encoder or the DWT compressor")
    c.add_argument("input")
    c.add_argument("--matrix", help="matrix header JSON (cs mode)")
    c.add_argument("--out", required=True)
    c.add_argument("--mode", choices=("cs", "dwt"), default="cs")
    c.add_argument("--n", type=_positive_int, default=512, help="packet size in dwt mode")
    c.add_argument("--stages", type=int, default=4)
    c.add_argument("--T", type=int, default=8)
    c.add_argument("--quantize", action="store_true", help="round non-integer samples in dwt mode")
    c.set_defaults(func=cmd_compress)

    r = sub.add_parser("recover", help="run BSBL-FM on every packet of a measurement file")
    r.add_argument("measurements")
    r.add_argument("--out", required=True, help="recovered signal CSV; the report goes to OUT.json")
    r.add_argument("--matrix", help="matrix header JSON; defaults to the parameters in the measurement file")
    for key in ("m", "n", "k", "seed"):
        r.add_argument(f"--{key}", type=int)
    r.add_argument("--dict", choices=("dct", "none"), default="dct")
    r.add_argument("--model", type=int, choices=(0, 1), default=0)
    r.add_argument("--beta-inv", type=_parse_beta_inv, default=1e-6)
    r.add_argument("--eta", type=float, default=1e-5)
    r.add_argument("--block-size", type=_positive_int, default=32)
    r.add_argument("--max-iter", type=_positive_int, default=1000)
    r.add_argument("--reference", help="original signal CSV; adds per-packet PRD to the report")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_recover)

    e = sub.add_parser("dwt-expand", help="invert a thresholded DWT stream file")
    e.add_argument("streams")
    e.add_argument("--out", required=True)
    e.add_argument("--reference", help="original signal CSV; PRD is printed")
    e.set_defaults(func=cmd_dwt_expand)

    b = sub.add_parser("bench", help="sweep compression ratios and models, emit a CSV table")
    b.add_argument("config")
    b.add_argument("--out")
    b.add_argument("--workers", type=int)
    b.add_argument("--no-timing", action="store_true", help="blank the timing columns (byte-reproducible output)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except DegeneracyError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"data error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
