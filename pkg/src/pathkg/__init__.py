"""Knowledge-graph enhanced, pathway-encoded medical dialogue generation toolkit."""

__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    Dialogue,
    EntityMention,
    EntityType,
    Lexicon,
    PhysicianAction,
    Role,
    Utterance,
    annotate_entities,
    eligible_eval_turns,
    filter_kamed_multimodal,
    load_corpus,
    load_lexicon,
)
from .kg import KnowledgeGraph, Triplet, load_kg, neighborhood, triplets_between  # noqa: E402
from .miner import KnowledgeBundle, MinerConfig, mine  # noqa: E402
from .pathway import DialogueState, encode_doctor, encode_patient  # noqa: E402
from .prompts import BudgetConfig, build_prompt, build_train_record, emit_trainset  # noqa: E402
from .gateway import GenerationRequest, MockBackend, generate, parse_structured  # noqa: E402
from .metrics import aggregate, bleu_n, entity_prf, rouge_l, rouge_n, tokenize  # noqa: E402
from .judge import JudgeConfig, build_judge_prompt, judge_one, judge_run  # noqa: E402
