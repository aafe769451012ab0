"""
keyframe-reloc entry point: command line (synth, select, query, bench,
inspect, serve) and the FastAPI app served by `serve`.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from loguru import logger

from api.relocalization_routes import router as relocalization_router
from api.system_log_routes import router as system_log_router
from config.settings import AppConfig, load_config
from models import KeyframeSet
from repositories.benchmark_repo import report_frame, write_benchmark_csv, write_summary
from repositories.feature_repo import (
    load_features,
    load_geotags,
    load_ground_truth,
    save_features,
    save_geotags,
    save_ground_truth,
)
from repositories.keyframe_repo import load_keyframes, save_keyframes
from schemas.keyframe import KeyframeSetSchema
from schemas.query import QueryReportOut
from services.clustering import INIT_SCHEMES, exhaustive_best_medoids, recompute_ams
from services.errors import (
    ContractError,
    DataError,
    SeparationInfeasibleError,
    StrategyNotApplicableError,
)
from services.evaluation import TASKS, ToleranceRule, query_windows, run_benchmark
from services.featurestore import FrameDatabase
from services.retrieval import SearchIndex, build_index, query_exhaustive, query_im2im, query_seq2seq, region_stats
from services.synthgen import SynthSpec, generate, generate_route
from services.system_logger import system_logger
from strategies import list_strategies
from strategies.distance import select_distance, select_distance_for_count, select_distance_for_ratio
from strategies.fixed_rate import select_fixed_rate, select_fixed_rate_for_ratio
from strategies.medoid import select_medoid
from strategies.similarity import select_similarity, select_similarity_for_count, select_similarity_for_ratio

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

STRATEGY_CHOICES = ("medoid", "similarity", "distance", "fixed_rate")
LOG_FORMAT = "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan> - {message}"


class InterceptHandler(logging.Handler):
    """Route stdlib logging records into loguru."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno
        frame, depth = logging.currentframe(), 2
        while frame is not None and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1
        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def setup_logging(verbosity: int = 0, log_file: Optional[str] = None) -> None:
    level = "DEBUG" if verbosity > 0 else "WARNING" if verbosity < 0 else "INFO"
    logger.remove()
    # sys.stderr is looked up per message so redirected streams are honoured
    logger.add(lambda message: sys.stderr.write(message), level=level, format=LOG_FORMAT, colorize=False)
    if log_file:
        logger.add(log_file, level="DEBUG", rotation="10 MB")
    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)
    logging.getLogger("uvicorn.access").setLevel(logging.INFO)


def create_app(index: Optional[SearchIndex] = None) -> FastAPI:
    app = FastAPI(title="Keyframe Re-localization API")
    app.state.index = index

    @app.get("/api/health")
    async def health_check():
        return {"status": "healthy", "index_loaded": app.state.index is not None}

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.include_router(relocalization_router)
    app.include_router(system_log_router)
    return app


def _load_db(path: str, geotags: Optional[str], config: AppConfig) -> FrameDatabase:
    db = load_features(path, renorm_tol=config.ingest.renorm_tol)
    if geotags:
        db = db.with_geotags(load_geotags(geotags, expected_count=len(db)))
    return db


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_synth(args: argparse.Namespace, config: AppConfig) -> int:
    if args.route:
        data = generate_route(args.frames, args.dim, step=args.step, query_noise=args.query_noise, seed=args.seed)
    else:
        spec = SynthSpec(
            n_frames=args.frames,
            dim=args.dim,
            n_clusters=args.clusters,
            intra_noise=args.intra_noise,
            inter_gap=args.inter_gap,
            query_noise=args.query_noise,
            seed=args.seed,
            drift=args.drift,
        )
        data = generate(spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".bin" if args.format == "binary" else ".csv"
    files = {
        "db": save_features(data.db, out / f"db{ext}"),
        "queries": save_features(data.queries, out / f"queries{ext}"),
        "geotags": save_geotags(data.db.geotags, out / "geotags.csv"),
        "truth": save_ground_truth(data.truth, out / "truth.csv"),
        "truth_gps": save_ground_truth(data.gps_truth, out / "truth_gps.csv"),
    }
    manifest = {"frames": len(data.db), "dim": data.db.dim, "seed": args.seed, **{k: str(v) for k, v in files.items()}}
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


def _select(args: argparse.Namespace, db: FrameDatabase, config: AppConfig) -> KeyframeSet:
    strategy = args.strategy
    if args.threshold is not None and strategy in ("medoid", "fixed_rate"):
        raise ContractError(f"--threshold does not apply to the {strategy} strategy; use --ratio or --count")
    steps = config.benchmark.similarity_search_steps

    if strategy == "medoid":
        ratio = args.ratio if args.ratio is not None else args.count / len(db)
        seed = args.seed if args.seed is not None else config.clustering.seed
        restarts = args.restarts if args.restarts is not None else config.clustering.restarts
        threads = args.threads if args.threads is not None else config.clustering.threads
        return select_medoid(db, ratio, init=args.init, seed=seed, restarts=restarts, threads=threads)
    if strategy == "fixed_rate":
        if args.count is not None:
            return select_fixed_rate(db, args.count)
        return select_fixed_rate_for_ratio(db, args.ratio)
    if strategy == "similarity":
        if args.threshold is not None:
            return select_similarity(db, args.threshold)
        if args.count is not None:
            return select_similarity_for_count(db, args.count, steps=steps)
        return select_similarity_for_ratio(db, args.ratio, search_steps=steps)
    if args.threshold is not None:
        return select_distance(db, args.threshold)
    if args.count is not None:
        return select_distance_for_count(db, args.count, steps=steps)
    return select_distance_for_ratio(db, args.ratio, search_steps=steps)


def cmd_select(args: argparse.Namespace, config: AppConfig) -> int:
    db = _load_db(args.db, args.geotags, config)
    keyframes = _select(args, db, config)
    logger.info(f"Selected {len(keyframes)} {keyframes.strategy} keyframes of {len(db)} frames")
    if args.out:
        save_keyframes(keyframes, args.out)
    else:
        print(KeyframeSetSchema.from_domain(keyframes).model_dump_json(indent=2))
    return EXIT_OK


def cmd_query(args: argparse.Namespace, config: AppConfig) -> int:
    db = _load_db(args.db, None, config)
    queries = load_features(args.queries, renorm_tol=config.ingest.renorm_tol)
    seq_len = args.seq_len if args.seq_len is not None else config.retrieval.seq_len
    index = None if args.exhaustive else build_index(db, load_keyframes(args.keyframes))

    wanted = set(args.indices) if args.indices else None
    lines: List[str] = []
    for q, features in query_windows(queries, args.task, seq_len):
        if wanted is not None and q not in wanted:
            continue
        if index is None:
            report = query_exhaustive(db, features)
        elif args.task == "im2im":
            report = query_im2im(index, features)
        else:
            report = query_seq2seq(index, features)
        system_logger.log_query(args.task, report.best_index, report.comparisons, report.elapsed_ns)
        lines.append(QueryReportOut.from_report(q, report).model_dump_json())
    _emit("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, config: AppConfig) -> int:
    cfg = config.benchmark
    db = _load_db(args.db, args.geotags, config)
    queries = load_features(args.queries, renorm_tol=config.ingest.renorm_tol)
    truth = load_ground_truth(args.truth)

    mode = args.tolerance_mode or config.tolerance.mode
    tol = args.tolerance
    if tol is None:
        tol = config.tolerance.frame_tol if mode == "frame" else config.tolerance.gps_tol
    rule = ToleranceRule(mode, tol)

    report = run_benchmark(
        db,
        queries,
        truth,
        args.strategies or cfg.strategies,
        args.ratios or cfg.ratios,
        args.tasks or cfg.tasks,
        rule,
        seq_len=args.seq_len if args.seq_len is not None else cfg.seq_len,
        inits=args.inits or cfg.inits,
        seed=args.seed if args.seed is not None else config.clustering.seed,
        restarts=args.restarts if args.restarts is not None else config.clustering.restarts,
        threads=args.threads if args.threads is not None else cfg.threads,
        warmup=cfg.warmup and not args.no_warmup,
        search_steps=cfg.similarity_search_steps,
    )
    if args.out:
        write_benchmark_csv(report, args.out)
    else:
        report_frame(report).to_csv(sys.stdout, index=False)
    if args.summary:
        write_summary(report, args.summary)
    for skip in report.skipped:
        logger.warning(f"Skipped {skip.strategy}: {skip.reason}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, config: AppConfig) -> int:
    if args.strategies:
        rows = [
            {
                "id": s.id,
                "name": s.name,
                "trajectory_free": s.trajectory_free,
                "specified_number": s.specified_number,
                "quality_criterion": s.quality_criterion,
                "description": s.description,
            }
            for s in list_strategies()
        ]
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    if not args.db or not args.keyframes:
        raise ContractError("inspect needs --db and --keyframes (or --strategies)")

    db = _load_db(args.db, None, config)
    keyframes = load_keyframes(args.keyframes)
    index = build_index(db, keyframes)
    summary = {"strategy": keyframes.strategy, "stored_ams": keyframes.ams, **region_stats(index)}
    # AMS of the keyframes taken as medoids; undefined once every frame is a keyframe
    summary["ams"] = recompute_ams(db, keyframes.indices) if len(keyframes) < len(db) else None
    if args.global_optimum:
        medoids, best = exhaustive_best_medoids(db, len(keyframes))
        summary["global_ams"] = best
        summary["global_medoids"] = medoids
        if summary["ams"] is not None:
            summary["gap"] = best - summary["ams"]
            if summary["gap"] > 1e-12:
                logger.warning(f"Keyframes are {summary['gap']:.6f} AMS below the global optimum")
    summary["events"] = system_logger.get_logs(limit=20)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, config: AppConfig) -> int:
    import uvicorn

    db = _load_db(args.db, None, config)
    app = create_app(build_index(db, load_keyframes(args.keyframes)))
    logger.info(f"Serving {len(db)} frames on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_config=None)
    return EXIT_OK


class CliParser(argparse.ArgumentParser):
    """argparse parser whose usage errors print the help text and exit with EXIT_USAGE."""

    def error(self, message: str):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _list_of(cast: Callable, choices: Optional[Sequence[str]] = None) -> Callable[[str], list]:
    def parse(text: str) -> list:
        try:
            values = [cast(part.strip()) for part in text.split(",") if part.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
        if not values:
            raise argparse.ArgumentTypeError("expected a comma-separated list")
        if choices is not None:
            unknown = [v for v in values if v not in choices]
            if unknown:
                raise argparse.ArgumentTypeError(f"unknown value(s) {unknown}; choose from {list(choices)}")
        return values

    return parse


def build_parser() -> CliParser:
    parser = CliParser(prog="keyframe-reloc", description="Keyframe-based visual re-localization toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_const", const=-1, dest="verbose", help="warnings only")
    parser.add_argument("--log-file", help="additional log file sink")
    parser.add_argument("--config", help="YAML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--intra-noise", type=float, default=0.05)
    p.add_argument("--inter-gap", type=float, default=0.5)
    p.add_argument("--query-noise", type=float, default=0.0)
    p.add_argument("--drift", type=float, default=0.0)
    p.add_argument("--route", action="store_true", help="smooth random-walk route instead of clusters")
    p.add_argument("--step", type=float, default=0.05, help="route step in radians")
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("select", help="select keyframes and write KeyframeSet JSON")
    p.add_argument("--db", required=True)
    p.add_argument("--geotags")
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, required=True)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--ratio", type=float)
    target.add_argument("--count", type=int)
    target.add_argument("--threshold", type=float)
    p.add_argument("--init", choices=INIT_SCHEMES, default="fixed_rate")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="clustering restart workers, 0 = all cores")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("query", help="one-shot queries against a keyframe index")
    p.add_argument("--db", required=True)
    p.add_argument("--keyframes")
    p.add_argument("--queries", required=True)
    p.add_argument("--task", choices=TASKS, default="im2im")
    p.add_argument("--seq-len", type=int)
    p.add_argument("--indices", type=_list_of(int), help="comma-separated query indices")
    p.add_argument("--exhaustive", action="store_true", help="search all frames without keyframes")
    p.add_argument("--out", help="JSON-lines output file")
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("bench", help="accuracy and timing grid over strategies and ratios")
    p.add_argument("--db", required=True)
    p.add_argument("--geotags")
    p.add_argument("--queries", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--ratios", type=_list_of(float))
    p.add_argument("--tasks", type=_list_of(str, TASKS))
    p.add_argument("--strategies", type=_list_of(str, STRATEGY_CHOICES))
    p.add_argument("--inits", type=_list_of(str, INIT_SCHEMES))
    p.add_argument("--tolerance-mode", choices=("frame", "gps"))
    p.add_argument("--tolerance", type=float)
    p.add_argument("--seq-len", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--no-warmup", action="store_true")
    p.add_argument("--out", help="CSV output file")
    p.add_argument("--summary", help="JSON summary output file")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("inspect", help="AMS and region statistics of a KeyframeSet")
    p.add_argument("--db")
    p.add_argument("--keyframes")
    p.add_argument("--strategies", action="store_true", help="list keyframe strategies")
    p.add_argument("--global", dest="global_optimum", action="store_true", help="compare with the exhaustive optimum")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("serve", help="HTTP query service")
    p.add_argument("--db", required=True)
    p.add_argument("--keyframes", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.verbose, args.log_file)
    try:
        config = load_config(args.config)
        if args.command == "query" and not args.exhaustive and not args.keyframes:
            parser.error("query needs --keyframes unless --exhaustive is given")
        return args.handler(args, config)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except DataError as e:
        logger.error(str(e))
        system_logger.log_error(type(e).__name__, str(e), {"path": e.path, "frame": e.frame})
        return EXIT_DATA
    except (ContractError, StrategyNotApplicableError, SeparationInfeasibleError) as e:
        logger.error(str(e))
        system_logger.log_error(type(e).__name__, str(e))
        return EXIT_USAGE


def run() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    run()
