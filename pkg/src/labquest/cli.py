"""Command-line entry point.

Subcommands: gen (synthetic game corpora), play (interactive episode),
eval (train/test protocol with report files and figure), solve (search one
game), train (fit and persist a Q policy), convert (annotated document or
raw text to a game file).

Exit codes: 0 success, 1 usage error, 2 data error, 3 budget or generation
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import agents as agents_mod
from . import env as env_mod
from . import ingest as ingest_mod
from . import quests as quests_mod
from . import report as report_mod
from .agents import (
    OracleAgent,
    PolicyAgent,
    QHyperparams,
    RandomAgent,
    SearchAgent,
    TabularPolicy,
    q_train,
)
from .errors import (
    BudgetExhausted,
    GenerationFailed,
    LabQuestError,
    ParseError,
)
from .world import DEFAULT_LEXICON, LEVELS, Lexicon

LEXICON_ENV_VAR = "LABQUEST_LEXICON"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        raise _UsageError(message)


def _parse_levels(spec: str) -> list[int]:
    if ".." in spec:
        low, high = spec.split("..", 1)
        levels = list(range(int(low), int(high) + 1))
    else:
        levels = [int(part) for part in spec.split(",") if part]
    bad = [level for level in levels if level not in LEVELS]
    if bad or not levels:
        raise _UsageError(f"levels must be within {min(LEVELS)}..{max(LEVELS)}: got {spec!r}")
    return levels


def _load_lexicon(path: str | None) -> Lexicon:
    chosen = path or os.environ.get(LEXICON_ENV_VAR)
    if chosen:
        return Lexicon.from_file(chosen)
    return DEFAULT_LEXICON


def _gen_one(job: tuple[int, int, str, str | None]) -> tuple[str, int, int, int]:
    level, seed, out_dir, lexicon_path = job
    lexicon = _load_lexicon(lexicon_path)
    game = env_mod.build_game(level, seed, lexicon)
    graph = quests_mod.generate(level, seed, lexicon)
    base = Path(out_dir) / f"l{level}"
    base.mkdir(parents=True, exist_ok=True)
    game_path = base / f"{game.id}.tlg.json"
    graph_path = base / f"{game.id}.graph.json"
    game_path.write_text(env_mod.save_game(game), encoding="utf-8")
    graph_path.write_text(env_mod.save_graph(graph), encoding="utf-8")
    return (str(game_path), level, seed, len(game.reference_k))


def cmd_gen(args: argparse.Namespace) -> int:
    levels = _parse_levels(args.levels)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_DATA

    jobs = [
        (level, seed, str(out_dir), args.lexicon)
        for level in levels
        for seed in range(args.seed, args.seed + args.count)
    ]
    if args.jobs > 1 and jobs:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_gen_one, jobs))
    else:
        rows = [_gen_one(job) for job in jobs]

    print("path\tlevel\tseed\treference_len")
    for path, level, seed, length in rows:
        print(f"{path}\t{level}\t{seed}\t{length}")
    return EXIT_OK


def cmd_play(args: argparse.Namespace) -> int:
    game = env_mod.load_game(Path(args.game).read_text(encoding="utf-8"))
    env = env_mod.GameEnv(game)
    observation, info = env.reset()
    print(observation)
    print()
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            line = "quit"
        if not line:
            continue
        if line == "quit":
            break
        if line == "valid":
            for action in info["valid_actions"]:
                print(f"  {action.command()}")
            continue
        try:
            command = env_mod.parse_command(line)
        except ParseError as exc:
            print(f"parse error: {exc}")
            continue
        outcome = env.step(command)
        info = outcome.info
        print(outcome.observation)
        running = env.score() if game.reference_k else 0.0
        print(f"[reward {outcome.reward:+d} | score {running:.3f}]")
        if outcome.done:
            print("Episode over.")
            break
    if game.reference_k:
        print(f"final score: {env.score():.3f}")
    else:
        print("final score: n/a (reward-free game)")
    print("actions taken: " + (";".join(env.recent) if env.recent else "(none)"))
    return EXIT_OK


def _make_agent(args: argparse.Namespace, levels: list[int], lexicon: Lexicon):
    if args.agent == "oracle":
        return OracleAgent(), {}
    if args.agent == "random":
        return RandomAgent(seed=args.agent_seed), {}
    if args.agent == "search":
        return SearchAgent(budget=args.budget), {"budget": args.budget}
    hyper = QHyperparams(episodes_per_game=args.episodes)
    policy = q_train(
        levels,
        games_per_level=args.train_games,
        hyperparams=hyper,
        master_seed=args.agent_seed,
        lexicon=lexicon,
    )
    info = dict(hyper.as_dict())
    info.update({"train_games_per_level": args.train_games, "master_seed": args.agent_seed})
    return PolicyAgent(policy, seed=args.agent_seed), info


def cmd_eval(args: argparse.Namespace) -> int:
    levels = _parse_levels(args.levels)
    lexicon = _load_lexicon(args.lexicon)
    agent, hyper = _make_agent(args, levels, lexicon)
    report = agents_mod.evaluate(
        agent,
        levels,
        games_per_level=args.test_games,
        test_seed_start=args.test_seed_start,
        lexicon=lexicon,
        hyperparams=hyper,
    )
    paths = report_mod.write_report(report, args.out, stem=f"report-{agent.name}")
    print(report.to_table(), end="")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    game = env_mod.load_game(Path(args.game).read_text(encoding="utf-8"))
    plan = agents_mod.plan_search(game, budget=args.budget)
    env = env_mod.GameEnv(game)
    env.reset()
    for action in plan:
        print(action.command())
        env.step(action)
    if game.reference_k:
        print(f"score: {env.score():.3f}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    levels = _parse_levels(args.levels)
    lexicon = _load_lexicon(args.lexicon)
    hyper = QHyperparams(episodes_per_game=args.episodes)
    policy = q_train(
        levels,
        games_per_level=args.train_games,
        hyperparams=hyper,
        master_seed=args.agent_seed,
        lexicon=lexicon,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(policy.to_doc(), sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(policy.q)} feature states)")
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    if args.annotated:
        doc = ingest_mod.doc_from_json(Path(args.annotated).read_text(encoding="utf-8"))
        game, warnings = ingest_mod.convert_annotated_with_warnings(doc)
        if warnings:
            print(f"warning: discarded {warnings} relation(s) touching dropped entities",
                  file=sys.stderr)
    else:
        gazetteer = ingest_mod.Gazetteer.from_lexicon(_load_lexicon(args.lexicon))
        game = ingest_mod.game_from_text(
            Path(args.text).read_text(encoding="utf-8"), gazetteer
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(env_mod.save_game(game), encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="labquest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--lexicon", default=None, help="kind<TAB>name lexicon file "
                       f"(default: built-in, or ${LEXICON_ENV_VAR})")

    p_gen = sub.add_parser("gen", help="generate synthetic game and graph files")
    p_gen.add_argument("--levels", default="1..5", help="level range, e.g. 1..5 or 2,4")
    p_gen.add_argument("--count", type=int, default=10, help="games per level")
    p_gen.add_argument("--seed", type=int, default=0, help="first seed; seeds are sequential")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--jobs", type=int, default=1, help="parallel workers")
    add_common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_play = sub.add_parser("play", help="play a game file interactively")
    p_play.add_argument("game", help="path to a .tlg.json game file")
    p_play.set_defaults(func=cmd_play)

    p_eval = sub.add_parser("eval", help="run the train/test protocol and write a report")
    p_eval.add_argument("--agent", choices=["oracle", "random", "search", "qlearn"],
                        default="oracle")
    p_eval.add_argument("--levels", default="1..5")
    p_eval.add_argument("--train-games", type=int, default=100, dest="train_games",
                        help="training games per level (qlearn)")
    p_eval.add_argument("--test-games", type=int, default=10, dest="test_games",
                        help="held-out test games per level")
    p_eval.add_argument("--test-seed-start", type=int, default=agents_mod.TEST_SEED_START,
                        dest="test_seed_start")
    p_eval.add_argument("--episodes", type=int, default=50,
                        help="training episodes per game (qlearn)")
    p_eval.add_argument("--budget", type=int, default=200_000, help="search node budget")
    p_eval.add_argument("--agent-seed", type=int, default=0, dest="agent_seed")
    p_eval.add_argument("--out", default="reports", help="report output directory")
    p_eval.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; "
                        "evaluation is sequential")
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_solve = sub.add_parser("solve", help="plan one game with goal-directed search")
    p_solve.add_argument("game", help="path to a .tlg.json game file")
    p_solve.add_argument("--budget", type=int, default=200_000)
    p_solve.set_defaults(func=cmd_solve)

    p_train = sub.add_parser("train", help="train a tabular Q policy and save it")
    p_train.add_argument("--levels", default="1")
    p_train.add_argument("--train-games", type=int, default=100, dest="train_games")
    p_train.add_argument("--episodes", type=int, default=50)
    p_train.add_argument("--agent-seed", type=int, default=0, dest="agent_seed")
    p_train.add_argument("--out", required=True, help="policy output file (JSON)")
    add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_convert = sub.add_parser("convert", help="convert annotations or raw text to a game")
    group = p_convert.add_mutually_exclusive_group(required=True)
    group.add_argument("--annotated", help="tl-annot/1 JSON document")
    group.add_argument("--text", help="raw procedure text file (gazetteer tagging)")
    p_convert.add_argument("--out", required=True, help="game output file")
    add_common(p_convert)
    p_convert.set_defaults(func=cmd_convert)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExhausted, GenerationFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (LabQuestError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def console_main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
