"""Command-line entry point: ``pathkg <subcommand>``.

Exit codes: 0 success, 2 usage, 3 configuration, 4 data/I-O,
5 endpoint, 6 evaluation/judging, 1 anything else. Failures also print a
one-line JSON object ``{"error": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config, manifest
from .corpus import (
    Dialogue,
    EntityMention,
    Lexicon,
    Role,
    Utterance,
    annotate_entities,
    filter_kamed_multimodal,
    load_corpus,
    load_lexicon,
)
from .errors import ConfigError, DataError, EvalError, GatewayError, JudgeError, PathKGError
from .gateway import GenerationRequest, ParseMode, RequestPool, parse_structured
from .judge import judge_run
from .kg import KnowledgeGraph, load_kg
from .miner import mine
from .pathway import DialogueState, advance, encode_patient
from .pipeline import encode_corpus, evaluate_predictions, generate_predictions, mine_corpus
from .prompts import build_prompt, emit_trainset, prompt_for, turn_contexts
from .records import dumps, load_predictions, write_jsonl

log = logging.getLogger("pathkg")

EXIT_CODES = [
    (ConfigError, 3),
    (DataError, 4),
    (OSError, 4),
    (GatewayError, 5),
    (EvalError, 6),
    (JudgeError, 6),
    (PathKGError, 1),
]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Context:
    """Lazily loaded inputs for one invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._lex = self._kg = self._corpus = None

    @property
    def lexicon(self) -> Lexicon:
        if self._lex is None:
            self.cfg.require("lexicon")
            self._lex = load_lexicon(self.cfg.lexicon)
        return self._lex

    @property
    def kg(self) -> KnowledgeGraph:
        if self._kg is None:
            self.cfg.require("kg")
            self._kg = load_kg(self.cfg.kg)
        return self._kg

    @property
    def corpus(self) -> list[Dialogue]:
        if self._corpus is None:
            self.cfg.require("corpus")
            lex = self.lexicon if self.cfg.lexicon is not None else None
            dialogues = load_corpus(self.cfg.corpus, lex, self.cfg.respect_gold)
            if self.cfg.filter_multimodal:
                dialogues, dropped = filter_kamed_multimodal(dialogues, self.cfg.placeholder)
                log.info("dropped %d dialogues with multimodal placeholders", dropped)
            if self.cfg.split:
                dialogues = [d for d in dialogues if d.split.value == self.cfg.split]
            self._corpus = dialogues
        return self._corpus

    def out(self, name: str) -> Path:
        self.cfg.output_dir.mkdir(parents=True, exist_ok=True)
        return self.cfg.output_dir / name

    def write_manifest(self, command: str, **extra) -> None:
        _write_json(self.out(f"manifest.{command}.json"), manifest(self.cfg, command, extra))


def cmd_kg(ctx: Context, args) -> None:
    print(json.dumps(ctx.kg.stats(), ensure_ascii=False, indent=2, sort_keys=True))


def cmd_mine(ctx: Context, args) -> None:
    n = write_jsonl(ctx.out("knowledge.jsonl"), mine_corpus(ctx.corpus, ctx.kg, ctx.cfg.miner))
    ctx.write_manifest("mine")
    print(f"wrote {n} knowledge bundles to {ctx.out('knowledge.jsonl')}")


def cmd_encode(ctx: Context, args) -> None:
    n = write_jsonl(ctx.out("encoded.jsonl"), encode_corpus(ctx.corpus))
    ctx.write_manifest("encode")
    print(f"wrote {n} encoded dialogues to {ctx.out('encoded.jsonl')}")


def cmd_prompt(ctx: Context, args) -> None:
    for d in ctx.corpus:
        if d.id != args.dialogue:
            continue
        for tc in turn_contexts(d, ctx.kg, ctx.cfg.miner):
            if tc.turn_index == args.turn:
                print(prompt_for(tc, ctx.cfg.budget).input_text)
                return
        raise DataError(f"turn {args.turn} of {args.dialogue!r} is not a doctor turn following a patient turn")
    raise DataError(f"dialogue {args.dialogue!r} not found")


def cmd_emit_trainset(ctx: Context, args) -> None:
    path = ctx.out("trainset.jsonl")
    n = emit_trainset(ctx.corpus, ctx.kg, path, ctx.cfg.miner, ctx.cfg.budget,
                      seed=ctx.cfg.seed, workers=ctx.cfg.workers)
    ctx.write_manifest("emit-trainset")
    print(f"wrote {n} training records to {path}")


def cmd_generate(ctx: Context, args) -> None:
    preds = generate_predictions(ctx.corpus, ctx.kg, ctx.lexicon, ctx.cfg.generator, ctx.cfg.miner,
                                 ctx.cfg.budget, ctx.cfg.seed)
    path = ctx.out("predictions.jsonl")
    write_jsonl(path, (p.to_json() for p in preds))
    ctx.write_manifest("generate")
    print(f"wrote {len(preds)} predictions to {path}")


def _predictions_path(ctx: Context, args) -> Path:
    path = Path(args.predictions) if args.predictions else ctx.cfg.output_dir / "predictions.jsonl"
    if not path.exists():
        raise ConfigError(f"predictions file not found: {path}")
    return path


def cmd_evaluate(ctx: Context, args) -> None:
    pred_path = _predictions_path(ctx, args)
    report = evaluate_predictions(load_predictions(pred_path), ctx.corpus, ctx.lexicon)
    out = report.to_json()
    out["meta"] = {"seed": ctx.cfg.seed, "tokenizer": "cjk-char", "bleu": "sentence, add-one smoothing n>1",
                   "rougeL_beta": 1.0}
    _write_json(ctx.out("eval.json"), out)
    table = report.table()
    ctx.out("eval.txt").write_text(table, encoding="utf-8")
    ctx.write_manifest("evaluate", predictions=pred_path)
    sys.stdout.write(table)


def cmd_judge(ctx: Context, args) -> None:
    pred_path = _predictions_path(ctx, args)
    summary = judge_run(load_predictions(pred_path), ctx.corpus, ctx.cfg.judge)
    rows = [
        {"dialogue_id": did, "turn": turn, **v.to_json()}
        for (did, turn), v in zip(summary.sampled, summary.verdicts)
    ]
    write_jsonl(ctx.out("judge_verdicts.jsonl"), rows)
    _write_json(ctx.out("judge.json"), {**summary.to_json(), "meta": {"seed": ctx.cfg.seed}})
    ctx.write_manifest("judge", predictions=pred_path)
    print(dumps(summary.to_json()))


def cmd_run(ctx: Context, args) -> None:
    """mine, encode, emit-trainset, generate, evaluate and judge in one go."""
    args.predictions = None
    for fn in (cmd_mine, cmd_encode, cmd_emit_trainset, cmd_generate, cmd_evaluate, cmd_judge):
        fn(ctx, args)


def cmd_chat(ctx: Context, args, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    lex, kg, cfg = ctx.lexicon, ctx.kg, ctx.cfg
    pool = RequestPool.from_config(cfg.generator)
    state = DialogueState()
    stdout.write("pathkg chat: type the patient's message; /quit or EOF to exit\n")
    turn = 0
    for line in stdin:
        text = line.strip()
        if text in ("/quit", "/exit"):
            break
        if not text:
            continue
        patient = Utterance(Role.PATIENT, text, tuple(annotate_entities(text, lex)))
        current = encode_patient(patient)
        with_current = advance(state, patient)
        bundle = mine(kg, with_current.cumulative_entities, cfg.miner)
        prompt = build_prompt(state, bundle, current, cfg.budget, dialogue_id="chat", turn_index=turn + 1)
        raw = pool.run([GenerationRequest(prompt.input_text, cfg.budget.max_output_tokens,
                                          cfg.generator.temperature, cfg.seed)])[0]
        parsed = parse_structured(raw, lex)
        stdout.write(f"[entities] {'、'.join(with_current.cumulative_entities) or '-'}\n")
        for t in bundle.direct:
            stdout.write(f"[direct] {t.render()}\n")
        for t, via in bundle.potential:
            stdout.write(f"[potential via {via}] {t.render()}\n")
        if parsed.parse_mode is ParseMode.STRICT:
            names = parsed.predicted_entities
            stdout.write(f"[predicted] entities={'、'.join(names) or '-'} "
                         f"actions={'、'.join(a.label for a in parsed.predicted_actions) or '-'}\n")
        else:
            names = tuple(m.canonical for m in annotate_entities(parsed.response_text, lex))
        stdout.write(f"doctor> {parsed.response_text}\n")
        stdout.flush()
        doctor = Utterance(
            Role.DOCTOR, parsed.response_text,
            tuple(EntityMention(n, lex.type_of(n)) for n in names if lex.type_of(n) is not None),
            parsed.predicted_actions,
        )
        state = advance(with_current, doctor)
        turn += 2


COMMANDS = {
    "kg": cmd_kg,
    "mine": cmd_mine,
    "encode": cmd_encode,
    "prompt": cmd_prompt,
    "emit-trainset": cmd_emit_trainset,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "judge": cmd_judge,
    "chat": cmd_chat,
    "run": cmd_run,
}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subparser from resetting options given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", "-c", help="YAML or JSON run configuration")
    g.add_argument("--kg", help="knowledge graph TSV (head, relation, tail)")
    g.add_argument("--lexicon", help="entity lexicon TSV (surface, canonical, type)")
    g.add_argument("--corpus", help="dialogue corpus JSONL")
    g.add_argument("--out", dest="output_dir", help="output directory")
    g.add_argument("--seed", type=int, help="seed recorded in every artifact")
    g.add_argument("--profile", choices=["meddg", "kamed", "custom"], help="dataset profile")
    g.add_argument("--split", choices=["train", "valid", "test"], help="only use dialogues of this split")
    g.add_argument("--workers", type=int, help="parallel workers for emission")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="pathkg", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"pathkg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("kg", parents=[common], help="knowledge graph utilities")
    p.add_argument("action", choices=["stats"], help="stats: node/triplet counts and relation histogram")
    sub.add_parser("mine", parents=[common], help="write per-turn knowledge bundles (knowledge.jsonl)")
    sub.add_parser("encode", parents=[common], help="write pathway-encoded dialogues (encoded.jsonl)")
    p = sub.add_parser("prompt", parents=[common], help="print the rendered prompt for one doctor turn")
    p.add_argument("--dialogue", required=True, help="dialogue id")
    p.add_argument("--turn", required=True, type=int, help="index of the doctor turn to be generated")
    sub.add_parser("emit-trainset", parents=[common], help="write fine-tuning records (trainset.jsonl)")
    sub.add_parser("generate", parents=[common], help="generate responses (predictions.jsonl)")
    for name, text in (("evaluate", "score predictions (eval.json, eval.txt)"),
                       ("judge", "LLM-judge predictions (judge_verdicts.jsonl, judge.json)")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--predictions", help="predictions JSONL (default: <out>/predictions.jsonl)")
    sub.add_parser("chat", parents=[common], help="interactive consultation REPL")
    sub.add_parser("run", parents=[common], help="mine, encode, emit-trainset, generate, evaluate, judge")
    return parser


def _fail(exc: BaseException) -> int:
    code = next((c for cls, c in EXIT_CODES if isinstance(exc, cls)), 1)
    sys.stderr.write(dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k, None) for k in
                 ("kg", "lexicon", "corpus", "output_dir", "seed", "profile", "split", "workers")}
    try:
        cfg = load_config(getattr(args, "config", None), overrides)
        COMMANDS[args.command](Context(cfg), args)
    except (PathKGError, OSError) as exc:
        return _fail(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
