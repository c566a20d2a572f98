"""Model catalog: per-model training configurations and their stage profiles.

Real per-stage measurements can be loaded from a profile CSV with one row
per (model, config, stage).  The built-in catalog covers the same nine models
with made-up but internally consistent numbers: stage compute scales with the
model, gradients are fp32 parameter bytes split across stages, and the
activation tensor crossing each stage boundary is shared evenly among the
receiving replicas.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, TextIO, Tuple

import numpy as np

from ..model import MB, AllReduceKind, StageProfile, check_data_identity

PROFILE_FIELDS = ["model", "config", "stage", "fp_time", "bp_time", "data_in", "data_out",
                  "param_size", "replicas", "allreduce_kind"]


class ProfileFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    name: str
    stages: Tuple[StageProfile, ...]

    @property
    def gpus(self) -> int:
        return sum(s.replicas for s in self.stages)


@dataclass(frozen=True)
class ModelProfile:
    name: str
    configs: Tuple[TrainingConfig, ...]

    def __post_init__(self):
        if not self.configs:
            raise ValueError(f"model {self.name} has no configurations")
        for c in self.configs:
            check_data_identity(c.stages)


Catalog = Tuple[ModelProfile, ...]


def check_catalog(catalog: Sequence[ModelProfile]) -> None:
    if not catalog:
        raise ValueError("catalog is empty")
    if not any(c.gpus == 1 for m in catalog for c in m.configs):
        raise ValueError("catalog needs at least one single-GPU configuration")


def layout_stages(replicas: Sequence[int], fp_total: float, grad_bytes: float,
                  act_bytes: float, kind: AllReduceKind) -> Tuple[StageProfile, ...]:
    """Split a model evenly into ``len(replicas)`` pipeline stages."""
    num = len(replicas)
    out = []
    for s, k in enumerate(replicas):
        fp = fp_total / num
        out.append(StageProfile(
            fp_time=fp,
            bp_time=2.0 * fp,
            data_in=act_bytes / k if s > 0 else 0.0,
            data_out=act_bytes / k if s + 1 < num else 0.0,
            param_size=grad_bytes / num,
            replicas=k,
            allreduce_kind=kind,
        ))
    return tuple(out)


# name, forward seconds per mini-batch on one GPU, fp32 gradient MB, boundary
# activation MB, sync pattern, layouts.  The three large language models are
# three-layer proxies, so their sizes are far below the full models.
_ROSTER = [
    ("VGG19", 0.030, 576.0, 6.0, AllReduceKind.RAR,
     [(1,), (2,), (4,), (2, 2), (4, 4)]),
    ("ResNet152", 0.045, 240.0, 12.0, AllReduceKind.RAR,
     [(1,), (2,), (4,), (2, 2), (2, 2, 2, 2)]),
    ("Inception-V3", 0.025, 96.0, 8.0, AllReduceKind.RAR,
     [(1,), (2,), (1, 1), (4,), (4, 4)]),
    ("BERT-large", 0.040, 1360.0, 8.0, AllReduceKind.TAR,
     [(1,), (1, 1), (2, 2), (1, 1, 1, 1), (2, 2, 2, 2)]),
    ("XLNet-large", 0.055, 2200.0, 8.0, AllReduceKind.TAR,
     [(1,), (1, 1), (2, 2), (1, 1, 1, 1), (2, 2, 2, 2)]),
    ("T5", 0.060, 800.0, 16.0, AllReduceKind.TAR,
     [(1, 1), (2, 2), (1, 1, 1, 1), (2, 2, 2, 2)]),
    ("GPT-6.7B", 0.050, 1200.0, 24.0, AllReduceKind.TAR,
     [(1, 1), (2, 2), (1, 1, 1, 1), (2, 2, 2, 2)]),
    ("GPT-13B", 0.070, 1900.0, 30.0, AllReduceKind.TAR,
     [(1, 1), (1, 1, 1, 1), (2, 2, 2, 2), (4, 4)]),
    ("GPT-175B", 0.090, 3600.0, 48.0, AllReduceKind.TAR,
     [(1, 1, 1, 1), (2, 2, 2, 2), (1, 1, 1, 1, 1, 1, 1, 1)]),
]


def default_catalog() -> Catalog:
    models = []
    for name, fp, grad_mb, act_mb, kind, layouts in _ROSTER:
        configs = []
        for layout in layouts:
            cname = f"{len(layout)}x" + "-".join(str(k) for k in layout)
            configs.append(TrainingConfig(cname, layout_stages(layout, fp, grad_mb * MB,
                                                               act_mb * MB, kind)))
        models.append(ModelProfile(name, tuple(configs)))
    return tuple(models)


def save_profiles(catalog: Iterable[ModelProfile], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PROFILE_FIELDS)
    for m in catalog:
        for c in m.configs:
            for s, st in enumerate(c.stages):
                w.writerow([m.name, c.name, s, repr(st.fp_time), repr(st.bp_time),
                            repr(st.data_in), repr(st.data_out), repr(st.param_size),
                            st.replicas, st.allreduce_kind.value])


def load_profiles(fh: TextIO) -> Catalog:
    """Parse a profile CSV; stages of a config must be listed as 0, 1, 2, ..."""
    reader = csv.DictReader(fh)
    missing = [f for f in PROFILE_FIELDS if f not in (reader.fieldnames or [])]
    if missing:
        raise ProfileFormatError(f"profile CSV missing columns: {', '.join(missing)}")
    models: Dict[str, Dict[str, List[StageProfile]]] = {}
    for line, row in enumerate(reader, start=2):
        try:
            stage = int(row["stage"])
            st = StageProfile(
                fp_time=float(row["fp_time"]), bp_time=float(row["bp_time"]),
                data_in=float(row["data_in"]), data_out=float(row["data_out"]),
                param_size=float(row["param_size"]), replicas=int(row["replicas"]),
                allreduce_kind=AllReduceKind(row["allreduce_kind"].strip().upper()))
        except (TypeError, ValueError) as e:
            raise ProfileFormatError(f"line {line}: {e}") from None
        stages = models.setdefault(row["model"], {}).setdefault(row["config"], [])
        if stage != len(stages):
            raise ProfileFormatError(f"line {line}: expected stage {len(stages)}, got {stage}")
        stages.append(st)
    try:
        catalog = tuple(ModelProfile(name, tuple(TrainingConfig(c, tuple(st))
                                                 for c, st in cfgs.items()))
                        for name, cfgs in models.items())
    except ValueError as e:
        raise ProfileFormatError(str(e)) from None
    check_catalog(catalog)
    return catalog


def random_layout(rng, gpus: int, max_stages: int = 4) -> Tuple[int, ...]:
    """Random, possibly unbalanced, replica counts per stage summing to ``gpus``."""
    num = int(rng.integers(1, min(max_stages, gpus) + 1))
    cuts = sorted(rng.choice(range(1, gpus), size=num - 1, replace=False).tolist()) if num > 1 else []
    return tuple(int(k) for k in np.diff([0, *cuts, gpus]))


def balanced_layout(rng, max_gpus: int, max_stages: int = 5,
                    max_replicas: int = 4) -> Tuple[int, ...]:
    """Planner-style layout: S stages with k replicas each, 2 <= S*k <= max_gpus."""
    shapes = [(S, k) for S in range(1, max_stages + 1) for k in range(1, max_replicas + 1)
              if 2 <= S * k <= max_gpus]
    if not shapes:
        raise ValueError("max_gpus must be >= 2")
    S, k = shapes[int(rng.integers(len(shapes)))]
    return (k,) * S


def random_model_stages(rng, layout: Sequence[int]) -> Tuple[StageProfile, ...]:
    """A random roster model laid out as ``layout``.

    Sizes are jittered by up to 2x either way so repeated draws of one model differ.
    """
    name, fp, grad_mb, act_mb, kind, _ = _ROSTER[int(rng.integers(len(_ROSTER)))]
    j = np.exp(rng.uniform(np.log(0.5), np.log(2.0), size=3))
    return layout_stages(layout, fp * j[0], grad_mb * j[1] * MB, act_mb * j[2] * MB, kind)
