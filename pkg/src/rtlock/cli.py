"""Command-line client for the locking service.

The CLI only handles files and flags; all real work happens behind the
HTTP API.  By default requests are dispatched to the bundled app in
process (no server needed), `--server URL` targets a running instance
instead.  Exit codes: 0 success, 1 usage error, 2 input/parse error,
3 internal error.

The only environment variable honored is RTLOCK_OUTPUT_DIR, the default
output directory for commands that write result files.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

OUTPUT_DIR_ENV = "RTLOCK_OUTPUT_DIR"

_EXIT_BY_KIND = {"usage": 1, "input": 2, "parse": 2, "pair-table": 2, "lock": 2}


class CliFailure(Exception):
    def __init__(self, exit_code, message):
        super().__init__(message)
        self.exit_code = exit_code


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this toolkit reserves 2 for bad input."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliFailure(1, message)


class ServiceClient:
    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                response = client.post(path, json=payload)
        else:
            response = asyncio.run(self._post_in_process(path, payload))
        return self._unwrap(response)

    async def _post_in_process(self, path: str, payload: dict):
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://rtlock.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    @staticmethod
    def _unwrap(response: httpx.Response) -> dict:
        if response.status_code < 400:
            return response.json()
        try:
            body = response.json()
        except ValueError:
            raise CliFailure(3, f"service error {response.status_code}: {response.text}")
        error = body.get("error")
        if error:
            exit_code = _EXIT_BY_KIND.get(error.get("kind"), 3)
            message = error.get("message", "unknown error")
            if error.get("line") is not None:
                message = f"{error['line']}:{error['column']}: {message}"
            raise CliFailure(exit_code, message)
        if response.status_code == 422:  # pydantic validation
            raise CliFailure(1, f"invalid request: {body.get('detail')}")
        raise CliFailure(3, f"service error {response.status_code}: {body}")


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliFailure(2, f"cannot read {path}: {exc}") from None


def _write_text(path: str, text: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _out_dir(value: str | None) -> str:
    return value or os.environ.get(OUTPUT_DIR_ENV) or "."


def _load_pair_table_arg(path: str | None):
    if path is None:
        return None
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CliFailure(2, f"pair table {path}: invalid JSON ({exc})") from None


def cmd_bench_gen(args, client: ServiceClient) -> int:
    result = client.post(
        "/bench/generate", {"spec": args.spec, "seed": args.seed, "width": args.width}
    )
    out_path = args.out or os.path.join(_out_dir(None), f"{result['name']}.v")
    _write_text(out_path, result["verilog"])
    print(f"wrote {out_path}: {result['op_count']} operations")
    for name, count in result["op_counts"].items():
        print(f"  {name}: {count}")
    return 0


def cmd_lock(args, client: ServiceClient) -> int:
    payload = {
        "verilog": _read_text(args.input),
        "algorithm": args.algorithm,
        "budget": args.budget,
        "seed": args.seed,
        "pair_table": _load_pair_table_arg(args.pair_table),
    }
    result = client.post("/lock", payload)
    _write_text(args.out, result["verilog"])
    key_out = args.key_out or args.out + ".key"
    _write_text(key_out, result["key_hex"] + "\n")
    trace_out = args.trace_out or args.out + ".trace.csv"
    _write_text(trace_out, result["trace_csv"])
    for warning in result["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    print(json.dumps(result["metric"], indent=2))
    if result["budget_exceeded"]:
        print(f"budget exceeded: used {result['bits_used']}")
    print(f"wrote {args.out}, {key_out}, {trace_out}")
    return 0


def cmd_metric(args, client: ServiceClient) -> int:
    payload = {
        "verilog": _read_text(args.input),
        "original_verilog": _read_text(args.original),
        "pair_table": _load_pair_table_arg(args.pair_table),
    }
    result = client.post("/metric", payload)
    print(json.dumps(result["metric"], indent=2))
    if args.trace:
        curve = _metric_curve(_read_text(args.trace))
        if args.trace_out:
            _write_text(args.trace_out, curve)
            print(f"wrote {args.trace_out}")
        else:
            print(curve, end="")
    return 0


def _metric_curve(trace_text: str) -> str:
    """Project a session trace CSV onto plot-ready (step, bits, metric) rows."""
    lines = trace_text.strip().splitlines()
    if not lines or not lines[0].startswith("step,"):
        raise CliFailure(2, "trace file does not look like a session trace CSV")
    header = lines[0].split(",")
    try:
        bits_col = header.index("bits_used")
        metric_col = header.index("metric_global")
    except ValueError:
        raise CliFailure(2, "trace file is missing bits_used/metric_global columns")
    out = ["step,bits_used,metric_global"]
    for line in lines[1:]:
        cells = line.split(",")
        out.append(f"{cells[0]},{cells[bits_col]},{cells[metric_col]}")
    return "\n".join(out) + "\n"


def cmd_attack(args, client: ServiceClient) -> int:
    config = _attack_config(args)
    out_dir = _out_dir(args.out_dir or config.pop("output_dir", None))
    os.makedirs(out_dir, exist_ok=True)
    runs_path = os.path.join(out_dir, "runs.csv")
    pair_table = _load_pair_table_arg(args.pair_table)

    all_rows = []
    wrote_header = False
    # One request per benchmark x algorithm keeps requests small and lets
    # partial results land on disk as they complete.  Seeds are derived
    # per trial, so batching does not change any result.
    with open(runs_path, "w", encoding="utf-8", newline="\n") as runs_file:
        for benchmark in config["benchmarks"]:
            for algorithm in config["algorithms"]:
                payload = {
                    "benchmarks": [_benchmark_payload(benchmark)],
                    "algorithms": [algorithm],
                    "key_budget": config["key_budget"],
                    "test_copies": config["test_copies"],
                    "train_rounds": config["train_rounds"],
                    "seeds": config["seeds"],
                    "pair_table": pair_table,
                }
                result = client.post("/attack/run", payload)
                csv_text = result["runs_csv"]
                body = csv_text.split("\n", 1)[1]
                if not wrote_header:
                    runs_file.write(csv_text.split("\n", 1)[0] + "\n")
                    wrote_header = True
                runs_file.write(body)
                runs_file.flush()
                all_rows.extend(result["rows"])

    summary = client.post("/attack/summarize", {"rows": all_rows})
    summary_path = os.path.join(out_dir, "summary.csv")
    _write_text(summary_path, summary["summary_csv"])
    print(summary["summary_csv"], end="")
    print(f"wrote {runs_path} and {summary_path}", file=sys.stderr)
    return 0


def _benchmark_payload(entry: str):
    if ":" in entry:
        return entry
    return {"name": os.path.splitext(os.path.basename(entry))[0],
            "verilog": _read_text(entry)}


def _attack_config(args) -> dict:
    config = {
        "benchmarks": [],
        "algorithms": ["assure-serial", "assure-random", "hra", "era"],
        "key_budget": "75%",
        "test_copies": 10,
        "train_rounds": 100,
        "seeds": [0],
    }
    if args.config:
        try:
            loaded = json.loads(_read_text(args.config))
        except json.JSONDecodeError as exc:
            raise CliFailure(2, f"config {args.config}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise CliFailure(2, "config file must hold a JSON object")
        config.update(loaded)
    if args.benchmark:
        config["benchmarks"] = list(args.benchmark)
    if args.algorithms:
        config["algorithms"] = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    if args.budget is not None:
        config["key_budget"] = args.budget
    if args.copies is not None:
        config["test_copies"] = args.copies
    if args.train_rounds is not None:
        config["train_rounds"] = args.train_rounds
    if args.paper_scale:
        config["train_rounds"] = 1000
    if args.seeds:
        try:
            config["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise CliFailure(1, f"bad --seeds value {args.seeds!r}") from None
    if not config["benchmarks"]:
        raise CliFailure(1, "no benchmarks given (use --benchmark or a config file)")
    return config


def cmd_validate_pairs(args, client: ServiceClient) -> int:
    raw = _load_pair_table_arg(args.table)
    result = client.post("/pairs/validate", {"pair_table": raw})
    print(json.dumps(result, indent=2))
    return 0


def cmd_serve(args, client: ServiceClient) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="rtlock", description=__doc__)
    parser.add_argument("--server", help="base URL of a running service; default runs in process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench-gen", help="generate a synthetic benchmark")
    p.add_argument("spec", help="e.g. imbalanced:add:2046, balanced:add-sub:1023, random-mixed:500")
    p.add_argument("-o", "--out", help="output .v path (default <name>.v)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=8)
    p.set_defaults(func=cmd_bench_gen)

    p = sub.add_parser("lock", help="lock a design")
    p.add_argument("input", help="input .v file")
    p.add_argument("-o", "--out", required=True, help="locked .v output path")
    p.add_argument("--algorithm", required=True,
                   choices=["assure-serial", "assure-random", "hra", "era"])
    p.add_argument("--budget", default="75%", help="bits or 'NN%%' of operations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--key-out", help="key file path (default <out>.key)")
    p.add_argument("--trace-out", help="trace CSV path (default <out>.trace.csv)")
    p.add_argument("--pair-table", help="JSON pair table override")
    p.set_defaults(func=cmd_lock)

    p = sub.add_parser("metric", help="score a locked design against its original")
    p.add_argument("input", help="locked .v file")
    p.add_argument("original", help="original .v file")
    p.add_argument("--trace", help="session trace CSV to project into a metric curve")
    p.add_argument("--trace-out", help="write the metric curve CSV here")
    p.add_argument("--pair-table", help="JSON pair table override")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("attack", help="run the key-recovery evaluation pipeline")
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--benchmark", action="append",
                   help="spec string or .v path; repeatable")
    p.add_argument("--algorithms", help="comma-separated algorithm list")
    p.add_argument("--budget", help="bits or 'NN%%' of operations")
    p.add_argument("--copies", type=int, help="test copies per benchmark")
    p.add_argument("--train-rounds", type=int, help="relocking rounds per test copy")
    p.add_argument("--paper-scale", action="store_true",
                   help="use 1000 training rounds instead of the desk-scale 100")
    p.add_argument("--seeds", help="comma-separated master seeds")
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--pair-table", help="JSON pair table override")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("validate-pairs", help="check a pair table for leakage")
    p.add_argument("table", help="JSON pair table file")
    p.set_defaults(func=cmd_validate_pairs)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        client = ServiceClient(args.server)
        return args.func(args, client)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
