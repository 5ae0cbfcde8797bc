"""Experiment configuration: defaults, validation and JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .learning import LearningParams
from .macfac import MacParams
from .relational import Backend, SimilarityParams

VARIANT_NAMES = ("featural", "relational", "unguided_fixed", "guided_fixed", "guided_learned")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    variants: list[str] = field(default_factory=lambda: list(VARIANT_NAMES))
    replicates: int = 64
    blocks: int = 5000
    games_per_block: int = 10
    seed: int = 0
    beta: float = 1.0
    theta: float = 1.0
    backend: str = "DIFFERENCE"
    epsilon: float = 1.0
    gamma: float = 1.0
    tau: float = 1.0
    induction_k: float = 6.0
    min_induction_samples: int = 100
    mac_top_n: int | None = None
    mac_p: float = 1.0
    tie_break: str = "RANDOM"
    eval_policy: str = "GREEDY"
    learning_sides: str = "BOTH"
    schema_value: str = "INDUCTION"
    threads: int = 1
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        errors = []
        unknown = [v for v in self.variants if v not in VARIANT_NAMES]
        if unknown or not self.variants:
            errors.append(f"variants: unknown or empty {unknown or self.variants}; choose from {', '.join(VARIANT_NAMES)}")
        if len(set(self.variants)) != len(self.variants):
            errors.append("variants: listed more than once")
        for name in ("replicates", "blocks", "games_per_block", "threads"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                errors.append(f"{name}: must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            errors.append("seed: must be an integer in [0, 2**64)")
        if self.backend not in Backend.__members__:
            errors.append(f"backend: must be one of {', '.join(Backend.__members__)}")
        if self.tie_break not in ("RANDOM", "FIRST"):
            errors.append("tie_break: must be RANDOM or FIRST")
        if self.eval_policy not in ("GREEDY", "SOFTMAX"):
            errors.append("eval_policy: must be GREEDY or SOFTMAX")
        if self.learning_sides not in ("BOTH", "FIRST"):
            errors.append("learning_sides: must be BOTH or FIRST")
        if self.schema_value not in ("INDUCTION", "DECISION"):
            errors.append("schema_value: must be INDUCTION or DECISION")
        for build, label in ((self.similarity_params, "similarity"), (self.learning_params, "learning"),
                             (self.mac_params, "mac")):
            try:
                build()
            except (ValueError, KeyError) as exc:
                errors.append(f"{label}: {exc}")
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def similarity_params(self) -> SimilarityParams:
        return SimilarityParams(self.beta, self.theta, Backend[self.backend])

    def learning_params(self) -> LearningParams:
        return LearningParams(self.epsilon, self.gamma, self.tau, self.induction_k, self.min_induction_samples)

    def mac_params(self) -> MacParams | None:
        if self.mac_top_n is None:
            return None
        return MacParams(self.mac_p, self.mac_top_n)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


DESK_SCALE = {"replicates": 8, "blocks": 500}
FULL_SCALE = {"replicates": 64, "blocks": 5000}
