"""Command-line interface: generate, compare, serve, stats.

Exit codes: 0 success, 2 configuration error, 3 model/backend error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from random import Random

from .demo import demo_table_lm, demo_vocab
from .model import LanguageModel, UnknownTokenError, train_ngram
from .pipeline import CbsConfig, ConfigError, load_config, run_cbs, run_standard
from .remote import RemoteLM, RemoteProtocolError, RemoteTransportError
from .study import RecordLog, StudyService, compute_stats, random_retention_probability

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3


class BackendError(RuntimeError):
    pass


def build_model(cfg: CbsConfig) -> LanguageModel:
    if cfg.model == "table":
        return demo_table_lm()
    if cfg.model == "ngram":
        if cfg.ngram_corpus is not None:
            try:
                corpus = Path(cfg.ngram_corpus).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read ngram corpus {cfg.ngram_corpus}: {exc}") from exc
        else:
            from .demo import DEMO_CORPUS

            corpus = DEMO_CORPUS
        try:
            return train_ngram(corpus, demo_vocab(), cfg.ngram_order, cfg.ngram_alpha)
        except UnknownTokenError as exc:
            raise ConfigError(f"ngram corpus does not tokenize: {exc}") from exc
    if cfg.model == "remote":
        if not cfg.remote_endpoint:
            raise ConfigError("model=remote requires remote_endpoint")
        return RemoteLM(cfg.remote_endpoint)
    raise ConfigError(f"unknown model selector: {cfg.model!r}")


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--model", choices=["table", "ngram", "remote"])


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, {"model": args.model})
    model = build_model(cfg)
    result = run_cbs(model, args.prompt, cfg)
    print(f"output: {result.output_text}")
    print(f"cbs_equals_dbs: {str(result.cbs_equals_dbs).lower()}")
    if args.show_candidates:
        print("candidates:")
        for i, cand in enumerate(result.candidates):
            marker = " <- winner" if i == result.verdict.winner else ""
            print(
                f"  rank {cand.dbs_rank}  votes {result.verdict.counts[i]}  "
                f"dbs_score {cand.dbs_score:.6f}  logprob {cand.logprob:.6f}  "
                f"text: {cand.text}{marker}"
            )
        print(
            f"verdict: winner rank {result.candidates[result.verdict.winner].dbs_rank}, "
            f"tie_broken {str(result.verdict.tie_broken).lower()}, "
            f"invalid_votes {result.verdict.invalid_votes}"
        )
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, {"model": args.model})
    model = build_model(cfg)
    cbs_text = run_cbs(model, args.prompt, cfg).output_text
    std_text = run_standard(model, args.prompt, cfg)
    cbs_first = Random(args.seed).random() < 0.5
    first, second = (cbs_text, std_text) if cbs_first else (std_text, cbs_text)
    print("Option 1:")
    print(first)
    print("Option 2:")
    print(second)
    reveal = ("CBS", "STD") if cbs_first else ("STD", "CBS")
    print(f"reveal: option 1 = {reveal[0]}, option 2 = {reveal[1]}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    cfg = load_config(args.config, {"model": args.model})
    model = build_model(cfg)
    service = StudyService(model, cfg, RecordLog(args.log))
    ui_dir = args.ui
    if ui_dir is not None and not Path(ui_dir).is_dir():
        raise ConfigError(f"--ui directory not found: {ui_dir}")
    app = create_app(service, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    records = RecordLog(args.log).load()
    answered = [r for r in records.values() if r.preference.value != "PENDING"]
    if not answered:
        print("no answered records")
        return EXIT_OK
    table = compute_stats(answered)
    header = f"{'':<12}{'CBS != DBS':>12}{'CBS == DBS':>12}{'Total':>12}"
    print(header)
    labels = ("CBS", "STD", "Same")
    for label, row, total in zip(labels, table.cells, table.row_totals):
        print(f"{label:<12}{row[0]:>12.4f}{row[1]:>12.4f}{total:>12.4f}")
    print(f"{'Total':<12}{table.col_totals[0]:>12.4f}{table.col_totals[1]:>12.4f}{1.0:>12.4f}")
    print(f"n = {table.n}")
    baseline = float(random_retention_probability(4, 4))
    print(f"random-retention baseline (K=4): {baseline:.8f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbs",
        description="Diverse-beam-search generation with a rotation-calibrated self-vote.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="run the full pipeline on one prompt")
    p_gen.add_argument("--prompt", required=True)
    _add_model_args(p_gen)
    p_gen.add_argument("--show-candidates", action="store_true")
    p_gen.set_defaults(func=_cmd_generate)

    p_cmp = sub.add_parser("compare", help="print both arms in a random order")
    p_cmp.add_argument("--prompt", required=True)
    p_cmp.add_argument("--seed", type=int, required=True)
    _add_model_args(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_srv = sub.add_parser("serve", help="start the preference-study service")
    p_srv.add_argument("--port", type=int, required=True)
    p_srv.add_argument("--log", required=True)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--ui", help="directory with the built web UI to host at /")
    _add_model_args(p_srv)
    p_srv.set_defaults(func=_cmd_serve)

    p_sts = sub.add_parser("stats", help="print the aggregate preference matrix")
    p_sts.add_argument("--log", required=True)
    p_sts.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnknownTokenError, RemoteTransportError, RemoteProtocolError, BackendError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
