from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.errors import ConfigurationError
from mri.masks import MaskScheme

ConfigT = TypeVar("ConfigT", bound=BaseModel)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IstaConfig(StrictModel):
    steps: int = Field(200, ge=1)
    eta: float = Field(1.0, gt=0, le=1)
    gamma: float = Field(1e-3, ge=0)
    transform: Literal["dct2", "identity"] = "dct2"


class TrainConfig(StrictModel):
    epochs: int = Field(100, ge=1)
    batch_size: Literal[1] = 1
    # lr = 0 is accepted as a frozen-parameter dry run.
    lr: float = Field(1e-4, ge=0)
    cs_ratio: float = Field(0.1, gt=0, le=1)
    mask_scheme: MaskScheme = MaskScheme.PSEUDO_RADIAL
    mask_seed: int = 0
    per_image_masks: bool = False
    p: int = Field(32, ge=1)
    k: int = Field(8, ge=1)
    n_stages: int = Field(11, ge=1)
    distinct_b: bool = False
    seed: int = 0
    checkpoint_every: int = Field(10, ge=0)
    train_dir: Optional[str] = None
    val_dir: Optional[str] = None
    synthetic_train: int = Field(0, ge=0)
    synthetic_val: int = Field(0, ge=0)
    image_size: int = Field(32, ge=11)

    @model_validator(mode="after")
    def _dataset_source(self) -> "TrainConfig":
        if self.train_dir is None and self.synthetic_train == 0:
            raise ValueError("either train_dir or synthetic_train must be given")
        return self


class MethodConfig(StrictModel):
    name: str = Field(min_length=1, max_length=64)
    kind: Literal["zero-filling", "ista", "dgdn"]
    # JSON object keys are ratio strings such as "0.1".
    checkpoints: Dict[float, str] = Field(default_factory=dict)
    ista: Optional[IstaConfig] = None

    @field_validator("checkpoints")
    @classmethod
    def _checkpoint_ratios(cls, value: Dict[float, str]) -> Dict[float, str]:
        bad = [ratio for ratio in value if not 0 < ratio <= 1]
        if bad:
            raise ValueError(f"checkpoint ratios must lie in (0, 1], got {bad}")
        return value

    def checkpoint_for(self, ratio: float) -> Optional[str]:
        for key, path in self.checkpoints.items():
            if abs(key - ratio) < 1e-9:
                return path
        return None


class EvalConfig(StrictModel):
    ratios: List[float] = Field(min_length=1)
    methods: List[MethodConfig] = Field(min_length=1)
    mask_scheme: MaskScheme = MaskScheme.PSEUDO_RADIAL
    mask_seed: int = 0
    test_dir: Optional[str] = None
    synthetic_test: int = Field(0, ge=0)
    synthetic_seed: int = 1000
    image_size: int = Field(32, ge=11)

    @model_validator(mode="after")
    def _check(self) -> "EvalConfig":
        if any(not 0 < r <= 1 for r in self.ratios):
            raise ValueError("every ratio must lie in (0, 1]")
        if self.test_dir is None and self.synthetic_test == 0:
            raise ValueError("either test_dir or synthetic_test must be given")
        return self


def parse_config(model_cls: Type[ConfigT], document: Union[dict, str]) -> ConfigT:
    try:
        if isinstance(document, str):
            return model_cls.model_validate_json(document)
        return model_cls.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError(
            f"invalid {model_cls.__name__}",
            {"errors": json.loads(exc.json(include_url=False))},
        ) from exc


def load_config(model_cls: Type[ConfigT], path: Union[str, Path]) -> ConfigT:
    return parse_config(model_cls, Path(path).read_text(encoding="utf-8"))
