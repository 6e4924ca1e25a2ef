"""emotrack command line: fit, extend, simulate, recommend, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .data import data_path
from .embeddings import align_with_lexicon, load_embeddings
from .engine import DEFLECTION_MODES, load_amalgamation, load_equations
from .lexicon import AffectiveLexicon, Kind, load_lexicon, normalize_term, save_lexicon
from .mapper import CRITERIA, MappingModel, SplitSpec, extend_lexicon, fit_mapping
from .service import ServiceState, UnresolvableError, make_server, recommend, simulate_json
from .simulation import SVG_SERIES, load_transcript, render_svg, simulate_variants, trajectories_to_csv

logger = logging.getLogger("emotrack")


class CommandError(Exception):
    pass


def _existing(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise CommandError(f"file not found: {path}")
    return path


def _load_lexicons(paths) -> AffectiveLexicon:
    paths = [_existing(p) for p in (paths or [data_path("lexicon.csv")])]
    lexicon = load_lexicon(paths[0])
    for p in paths[1:]:
        lexicon = lexicon.merged(load_lexicon(p))
    return lexicon


def _binary_flag(args):
    return {"auto": None, "binary": True, "text": False}[args.embeddings_format]


def cmd_fit(args) -> int:
    emb_path, lex_path = _existing(args.embeddings), _existing(args.lexicon)
    kinds = [Kind(k) for k in args.kinds.split(",")]
    lexicon = load_lexicon(lex_path)
    vocab = None
    if args.vocab_filter == "lexicon":
        vocab = {e.term for e in lexicon if e.kind in kinds}
    table = load_embeddings(emb_path, binary=_binary_flag(args), vocabulary=vocab)
    pairs = align_with_lexicon(table, lexicon, kinds)
    if pairs.missing:
        print(f"{len(pairs.missing)} lexicon terms not in embeddings", file=sys.stderr)
    metadata = {"lexicon": lex_path.name, "embeddings": emb_path.name, "vocab_filter": args.vocab_filter,
                "kinds": [k.value for k in kinds], "pairs": len(pairs), "missing": len(pairs.missing)}
    model = fit_mapping(pairs, SplitSpec(args.train_fraction, args.seed), ridge=args.ridge,
                        intercept=args.intercept, criterion=args.criterion, metadata=metadata)
    model.save(args.output)
    for dim, m in model.metrics.items():
        print(f"{dim}: r={m['r']:.4f} rmse={m['rmse']:.4f}")
    return 0


def _read_tokens(path: Path) -> list[tuple[str, Kind]]:
    kinds = {k.value for k in Kind}
    tokens = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        token, sep, kind = line.rpartition(",")
        if sep and kind.strip() in kinds:
            tokens.append((token.strip(), Kind(kind.strip())))
        else:
            tokens.append((line, Kind.EMOJI))
    return tokens


def cmd_extend(args) -> int:
    model_path, emb_path = _existing(args.model), _existing(args.embeddings)
    tok_path, base_path = _existing(args.tokens), _existing(args.base)
    model = MappingModel.load(model_path)
    tokens = _read_tokens(tok_path)
    vocab = {normalize_term(t, k) for t, k in tokens}
    table = load_embeddings(emb_path, binary=_binary_flag(args), vocabulary=vocab)
    lexicon, report = extend_lexicon(model, table, tokens, load_lexicon(base_path))
    for token in report.missing:
        print(f"not in embeddings, skipped: {token}", file=sys.stderr)
    for token in report.skipped:
        print(f"already surveyed, kept: {token}", file=sys.stderr)
    save_lexicon(lexicon, args.output)
    print(f"added {len(report.added)} estimated entries")
    return 0


def _engine_inputs(args):
    eqs = load_equations(_existing(args.equations or data_path("impression_equations.csv")))
    amalg = load_amalgamation(_existing(args.amalgamation or data_path("amalgamation.csv")))
    return eqs, amalg


def cmd_simulate(args) -> int:
    transcript = load_transcript(_existing(args.transcript or data_path("customer_chatbot_transcript.json")))
    lexicon = _load_lexicons(args.lexicon)
    eqs, amalg = _engine_inputs(args)
    state = ServiceState(lexicon, eqs, amalg)
    output = Path(args.output)
    fmt = args.format or ("json" if output.suffix.lower() == ".json" else "csv")
    if fmt == "json":
        text = simulate_json(state, transcript, args.deflection)
    else:
        text = trajectories_to_csv(simulate_variants(transcript, lexicon, eqs, amalg, mode=args.deflection))
    output.write_text(text, encoding="utf-8", newline="\n")
    if args.svg:
        runs = simulate_variants(transcript, lexicon, eqs, amalg, mode=args.deflection)
        for series in SVG_SERIES:
            render_svg(runs, series, output.with_name(f"{output.stem}_{series}.svg"))
    return 0


def cmd_recommend(args) -> int:
    lexicon = _load_lexicons(args.lexicon)
    eqs, amalg = _engine_inputs(args)
    state = ServiceState(lexicon, eqs, amalg)
    ranked = recommend(state, args.actor, args.object, args.behavior, role=args.role, k=args.k,
                       mode=args.deflection)
    if args.json:
        print(json.dumps({"recommendations": ranked}, indent=2, ensure_ascii=False))
    else:
        for row in ranked:
            print(f"{row['rank']}\t{row['emoji']}\t{row['deflection']:.4f}")
    return 0


def cmd_serve(args) -> int:
    lexicon = _load_lexicons(args.lexicon)
    eqs, amalg = _engine_inputs(args)
    model = MappingModel.load(_existing(args.model)) if args.model else None
    table = load_embeddings(_existing(args.embeddings), binary=_binary_flag(args)) if args.embeddings else None
    host, _, port = args.bind.rpartition(":")
    server = make_server(ServiceState(lexicon, eqs, amalg, model, table), host or "127.0.0.1", int(port))
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emotrack", description=__doc__,
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def embeddings_format(p):
        p.add_argument("--embeddings-format", choices=["auto", "text", "binary"], default="auto",
                       help="auto picks binary for a .bin suffix")

    def engine_files(p):
        p.add_argument("--lexicon", action="append", help="lexicon CSV (repeatable; default: bundled)")
        p.add_argument("--equations", help="impression equation CSV (default: bundled)")
        p.add_argument("--amalgamation", help="amalgamation CSV (default: bundled)")
        p.add_argument("--deflection", choices=DEFLECTION_MODES, default="euclidean")

    p = sub.add_parser("fit", help="fit an embedding -> EPA mapping")
    p.add_argument("--embeddings", required=True)
    embeddings_format(p)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--output", required=True, help="model JSON path")
    p.add_argument("--kinds", default="identity,behavior,modifier")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.85)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--criterion", choices=CRITERIA, default="bic")
    p.add_argument("--vocab-filter", choices=["lexicon", "none"], default="lexicon",
                   help="keep only lexicon terms while reading embeddings")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extend", help="add estimated entries to a lexicon")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    embeddings_format(p)
    p.add_argument("--tokens", required=True, help="one token per line, optionally 'token,kind'")
    p.add_argument("--base", required=True, help="base lexicon CSV")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("simulate", help="replay a transcript")
    p.add_argument("--transcript", help="transcript JSON (default: bundled customer/chatbot chat)")
    engine_files(p)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--svg", action="store_true", help="also write one SVG chart per series")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recommend", help="rank emojis by the deflection they produce")
    engine_files(p)
    p.add_argument("--actor", required=True, help="actor identity term")
    p.add_argument("--object", required=True, help="object identity term")
    p.add_argument("--behavior", required=True)
    p.add_argument("--role", choices=["actor", "object"], default="actor",
                   help="which party uses the emoji")
    p.add_argument("-k", type=int, default=3)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("serve", help="serve estimates and simulations over HTTP")
    engine_files(p)
    p.add_argument("--model")
    p.add_argument("--embeddings")
    embeddings_format(p)
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CommandError, UnresolvableError, ValueError, KeyError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"emotrack {args.command}: error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
