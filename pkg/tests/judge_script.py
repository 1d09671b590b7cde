"""Scripted judge: ten canned verdicts, three of them unusable."""

import json
import re

from pathkg.corpus import eligible_eval_turns
from pathkg.records import Prediction

VALID = [(0, 6), (1, 7), (2, 5), (1, 8), (3, 6), (0, 9), (2, 4)]
# hand means over the seven valid verdicts: H = 9/7, C = 45/7
MEAN_H, MEAN_C = 1.29, 6.43

SCRIPT = [json.dumps({"hallucination": h, "consistency": c, "reasoning": "scripted"}) for h, c in VALID[:3]]
SCRIPT.append("The reply looks fine to me, I would give it a 7.")
SCRIPT += [json.dumps({"hallucination": h, "consistency": c, "reasoning": "scripted"}) for h, c in VALID[3:5]]
SCRIPT.append('{"hallucination": 11, "consistency": 5, "reasoning": "out of range"}')
SCRIPT += [json.dumps({"hallucination": h, "consistency": c, "reasoning": "scripted"}) for h, c in VALID[5:]]
SCRIPT.append('```json\n{"hallucination": 2, "reasoning": "missing consistency"}\n```')

_TAG = re.compile(r"<<reply-(\d+)>>")


def scripted_predictions(corpus):
    """One tagged prediction per eligible turn, in corpus order."""
    out = []
    for d in corpus:
        for j in eligible_eval_turns(d):
            out.append(Prediction(d.id, j, f"<<reply-{len(out)}>>"))
    return out


def scripted_judge(prompt: str) -> str:
    return SCRIPT[int(_TAG.search(prompt).group(1))]
