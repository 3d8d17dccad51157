# src/qadvlab/settings.py
from __future__ import annotations

import os

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

THREADS_ENV = "QADVLAB_THREADS"


class Tolerances(BaseModel):
    """Every numerical tolerance the package uses, in one place."""

    model_config = ConfigDict(frozen=True)

    hermitian: float = 1e-12
    trace: float = 1e-10
    psd: float = 1e-10
    zero_matrix: float = 1e-14
    purity: float = 1e-8
    sqrt_clamp: float = 1e-10
    dimension_cap: int = Field(default=1024, ge=2)
    qubit_cap: int = Field(default=10, ge=1)


TOL = Tolerances()


def thread_count() -> int:
    """
    Worker count for sweeps, from QADVLAB_THREADS (.env honoured).
    0, unset or garbage means one worker per CPU.
    """
    load_dotenv()
    raw = os.environ.get(THREADS_ENV, "").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


_STREAMS = {"data": 0, "init": 1, "attack": 2, "rademacher": 3, "restarts": 4, "perturb": 5, "selftest": 6}


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Independent generator for one named use of an experiment seed, so that
    drawing more data never shifts the model initialisation and vice versa.
    """
    entropy = [int(seed), _STREAMS[name], *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
