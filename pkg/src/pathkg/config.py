"""Run configuration: one YAML/JSON file, overridable from the command line."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .corpus import KAMED_PLACEHOLDER
from .errors import ConfigError
from .gateway import EndpointConfig
from .judge import JudgeConfig
from .miner import MinerConfig
from .prompts import BudgetConfig


class Profile(enum.Enum):
    MEDDG = "meddg"
    KAMED = "kamed"
    CUSTOM = "custom"


@dataclass(frozen=True)
class RunConfig:
    kg: Path | None = None
    lexicon: Path | None = None
    corpus: Path | None = None
    output_dir: Path = Path("pathkg-out")
    miner: MinerConfig = field(default_factory=MinerConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    generator: EndpointConfig = field(default_factory=EndpointConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    seed: int = 0
    profile: Profile = Profile.CUSTOM
    respect_gold: bool = True
    split: str | None = None
    placeholder: str = KAMED_PLACEHOLDER
    workers: int = 4

    @property
    def filter_multimodal(self) -> bool:
        return self.profile is Profile.KAMED

    def require(self, *names: str) -> None:
        for name in names:
            p = getattr(self, name)
            if p is None:
                raise ConfigError(f"no {name} path configured")
            if not Path(p).exists():
                raise ConfigError(f"{name} path does not exist: {p}")

    def snapshot(self) -> dict:
        """Config as plain JSON; paths reduced to file names so snapshots are location-independent."""
        return {
            "kg": Path(self.kg).name if self.kg else None,
            "lexicon": Path(self.lexicon).name if self.lexicon else None,
            "corpus": Path(self.corpus).name if self.corpus else None,
            "miner": self.miner.to_dict(),
            "budget": self.budget.to_dict(),
            "generator": self.generator.to_dict(),
            "judge": {
                "sample_size": self.judge.sample_size,
                "max_retries": self.judge.max_retries,
                "endpoint": self.judge.endpoint.to_dict(),
            },
            "seed": self.seed,
            "profile": self.profile.value,
            "respect_gold": self.respect_gold,
            "split": self.split,
            "placeholder": self.placeholder if self.filter_multimodal else None,
        }


def _endpoint(raw: dict | None, default_kind: str) -> EndpointConfig:
    raw = dict(raw or {})
    raw.setdefault("kind", default_kind)
    names = {f.name for f in dataclasses.fields(EndpointConfig)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown endpoint keys: {sorted(unknown)}")
    return EndpointConfig(**raw)


def _section(cls, raw: dict | None):
    raw = raw or {}
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {cls.__name__} section: {exc}") from None


def build_config(raw: dict, base_dir: Path = Path("."), overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from a parsed config mapping; relative paths resolve against ``base_dir``."""
    raw = dict(raw or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    paths = dict(raw.pop("paths", {}) or {})

    def path_of(key):
        if key in overrides:
            return Path(overrides[key])
        if paths.get(key) is None:
            return None
        p = Path(paths[key])
        return p if p.is_absolute() else base_dir / p

    judge_raw = dict(raw.pop("judge", {}) or {})
    judge_keys = {k: judge_raw.pop(k) for k in ("sample_size", "max_retries") if k in judge_raw}
    corpus_raw = dict(raw.pop("corpus", {}) or {})
    seed = int(overrides.get("seed", raw.pop("seed", 0)))
    budget = _section(BudgetConfig, raw.pop("budget", None))
    try:
        profile = Profile(str(overrides.get("profile", raw.pop("profile", "custom"))).lower())
    except ValueError:
        raise ConfigError("profile must be one of meddg, kamed, custom") from None
    cfg = RunConfig(
        kg=path_of("kg"),
        lexicon=path_of("lexicon"),
        corpus=path_of("corpus"),
        output_dir=path_of("output_dir") or Path("pathkg-out"),
        miner=_section(MinerConfig, raw.pop("miner", None)),
        budget=budget,
        generator=_endpoint(raw.pop("generator", None), "mock"),
        judge=JudgeConfig(seed=seed, endpoint=_endpoint(judge_raw, "mock-judge"), budget=budget, **judge_keys),
        seed=seed,
        profile=profile,
        respect_gold=bool(corpus_raw.pop("respect_gold", True)),
        split=overrides.get("split", corpus_raw.pop("split", None)),
        placeholder=corpus_raw.pop("placeholder", KAMED_PLACEHOLDER),
        workers=int(overrides.get("workers", raw.pop("workers", 4))),
    )
    leftovers = set(raw) | set(corpus_raw)
    if leftovers:
        raise ConfigError(f"unknown config keys: {sorted(leftovers)}")
    for name in ("kg", "lexicon", "corpus"):
        p = getattr(cfg, name)
        if p is not None and not p.exists():
            raise ConfigError(f"{name} path does not exist: {p}")
    return cfg


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return build_config({}, Path("."), overrides)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return build_config(raw or {}, path.parent, overrides)


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest(cfg: RunConfig, command: str, extra_inputs: dict | None = None) -> dict:
    inputs = {}
    for name in ("kg", "lexicon", "corpus"):
        p = getattr(cfg, name)
        if p is not None and Path(p).exists():
            inputs[name] = {"file": Path(p).name, "sha256": file_sha256(p)}
    for name, p in (extra_inputs or {}).items():
        inputs[name] = {"file": Path(p).name, "sha256": file_sha256(p)}
    return {"command": command, "version": __version__, "seed": cfg.seed, "inputs": inputs,
            "config": cfg.snapshot()}
