"""Component-wise data model: independent components, deterministic private
features and utility tasks over sub-vectors of the components."""
import dataclasses
import functools
import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import torch

from . import infotheory
from .types import (
    MERGE_ATOL,
    PMF_ATOL,
    InfeasibleModelError,
    InvalidDistributionError,
    JointTable,
    Labels,
    ModelError,
    as_probs,
    check_pmf,
)
from .utils import ProductAlphabet

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class ComponentModel:
    """One independent component X_i with its private feature S_i = f_i(X_i)."""

    alphabet_x: Labels
    pmf: torch.Tensor
    private_map: Tuple[int, ...]
    alphabet_s: Labels

    def __post_init__(self):
        object.__setattr__(self, "alphabet_x", tuple(str(a) for a in self.alphabet_x))
        object.__setattr__(self, "alphabet_s", tuple(str(a) for a in self.alphabet_s))
        object.__setattr__(self, "private_map", tuple(int(s) for s in self.private_map))
        pmf = as_probs(self.pmf)
        object.__setattr__(self, "pmf", pmf)
        if pmf.shape != (len(self.alphabet_x),):
            raise ModelError("pmf length differs from the alphabet size")
        try:
            check_pmf(pmf)
        except InvalidDistributionError as e:
            raise ModelError(str(e)) from e
        if len(self.private_map) != len(self.alphabet_x):
            raise ModelError("private_map must be total over the alphabet")
        if any(s < 0 or s >= len(self.alphabet_s) for s in self.private_map):
            raise ModelError("private_map points outside the private alphabet")
        if set(self.private_map) != set(range(len(self.alphabet_s))):
            raise ModelError("private alphabet must equal the image of private_map")

    @property
    def n_x(self) -> int:
        return len(self.alphabet_x)

    @property
    def n_s(self) -> int:
        return len(self.alphabet_s)

    @functools.cached_property
    def private_pmf(self) -> torch.Tensor:
        p_s = torch.zeros(self.n_s, dtype=self.pmf.dtype)
        return p_s.index_add_(0, torch.tensor(self.private_map), self.pmf)

    @functools.cached_property
    def h_x(self) -> float:
        return infotheory.entropy(self.pmf)

    @functools.cached_property
    def h_s(self) -> float:
        return infotheory.entropy(self.private_pmf)

    def joint_xs(self) -> JointTable:
        """Joint law of (X_i, S_i)."""
        probs = torch.zeros(self.n_x, self.n_s, dtype=self.pmf.dtype)
        probs[torch.arange(self.n_x), torch.tensor(self.private_map)] = self.pmf
        return JointTable(self.alphabet_x, self.alphabet_s, probs)


@dataclasses.dataclass(frozen=True)
class TaskSpec:
    """A candidate task C_k with its utility target in bits."""

    components: Tuple[int, ...]
    gamma_bits: Optional[float] = None
    distortion_bits: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(sorted({int(i) for i in self.components})))
        if len(self.components) == 0:
            raise ModelError("task must cover at least one component")
        if (self.gamma_bits is None) == (self.distortion_bits is None):
            raise ModelError("task needs exactly one of gamma_bits or distortion_bits")


@dataclasses.dataclass(frozen=True, eq=False)
class DataModel:
    components: Tuple[ComponentModel, ...]
    tasks: Tuple[TaskSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if len(self.components) == 0:
            raise ModelError("model needs at least one component")
        for k, task in enumerate(self.tasks):
            bad = [i for i in task.components if i >= len(self.components)]
            if bad:
                raise ModelError(f"task {k} refers to unknown components {bad}")

    @property
    def n_components(self) -> int:
        return len(self.components)

    def gamma(self, k: int) -> float:
        """Utility target γ(C_k) in bits; distortion targets map to H(C_k) − D_k."""
        task = self.tasks[k]
        if task.gamma_bits is not None:
            return float(task.gamma_bits)
        return self.task_entropy(k) - float(task.distortion_bits)

    @property
    def gammas(self) -> List[float]:
        return [self.gamma(k) for k in range(len(self.tasks))]

    def task_entropy(self, k: int) -> float:
        """H(C_k), additive over the independent components of the task."""
        return sum(self.components[i].h_x for i in self.tasks[k].components)

    @functools.cached_property
    def alphabet(self) -> ProductAlphabet:
        return ProductAlphabet([c.alphabet_x for c in self.components])

    @functools.cached_property
    def private_alphabet(self) -> ProductAlphabet:
        return ProductAlphabet([c.alphabet_s for c in self.components])

    def private_index(self) -> torch.Tensor:
        """Index of S = (f_1(X_1), ..., f_N(X_N)) for every joint symbol of X."""
        return self.alphabet.ravel(
            range(self.n_components), [c.private_map for c in self.components]
        )


def joint_pmf(model: DataModel, indices: Sequence[int]) -> torch.Tensor:
    """Product pmf of the listed components, lexicographic in component order."""
    indices = sorted(set(indices))
    if not indices:
        raise ModelError("joint_pmf needs a non-empty index set")
    if indices[0] < 0 or indices[-1] >= model.n_components:
        raise ModelError(f"invalid component indices {indices}")
    return functools.reduce(torch.kron, [model.components[i].pmf for i in indices])


def check_feasibility(model: DataModel) -> List[int]:
    """Tasks whose target lies outside [0, Σ_{i∈C_k} H(X_i)]."""
    violated = []
    for k in range(len(model.tasks)):
        g = model.gamma(k)
        if g < -PMF_ATOL or g > model.task_entropy(k) + PMF_ATOL:
            violated.append(k)
    return violated


def with_gammas(model: DataModel, gammas: Sequence[float]) -> DataModel:
    """Same components, tasks re-targeted to explicit γ values."""
    if len(gammas) != len(model.tasks):
        raise ModelError("one gamma per task expected")
    tasks = [
        TaskSpec(t.components, gamma_bits=float(g)) for t, g in zip(model.tasks, gammas)
    ]
    return DataModel(model.components, tasks)


def scaled(model: DataModel, scale: float) -> DataModel:
    return with_gammas(model, [scale * g for g in model.gammas])


def _normalized(pmf: List[float]) -> torch.Tensor:
    p = as_probs(pmf)
    total = float(p.sum())
    # Stored verbatim when already tight so that save/load round-trips exactly.
    if abs(total - 1.0) > MERGE_ATOL and abs(total - 1.0) <= PMF_ATOL and total > 0:
        logger.debug("renormalizing pmf with sum %r", total)
        p = p / total
    return p


def _bits(value) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        raise ModelError(f"target {value!r} is not finite")
    return value


def model_from_dict(spec: dict) -> DataModel:
    try:
        components = [
            ComponentModel(
                alphabet_x=c["alphabet"],
                pmf=_normalized(c["pmf"]),
                private_map=c["private_map"],
                alphabet_s=c["private_alphabet"],
            )
            for c in spec["components"]
        ]
        tasks = [
            TaskSpec(
                components=t["components"],
                gamma_bits=_bits(t.get("gamma_bits")),
                distortion_bits=_bits(t.get("distortion_bits")),
            )
            for t in spec.get("tasks", [])
        ]
    except ModelError:
        raise
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise ModelError(f"malformed model spec: {e!r}") from e
    return DataModel(components, tasks)


def model_to_dict(model: DataModel) -> dict:
    return {
        "components": [
            {
                "alphabet": list(c.alphabet_x),
                "pmf": c.pmf.tolist(),
                "private_map": list(c.private_map),
                "private_alphabet": list(c.alphabet_s),
            }
            for c in model.components
        ],
        "tasks": [
            {"components": list(t.components), "gamma_bits": g}
            for t, g in zip(model.tasks, model.gammas)
        ],
    }


def load_model(path: Union[str, Path], check: bool = True) -> DataModel:
    """Parse and validate a model spec file; γ targets are resolved in bits.

    With `check`, targets outside [0, Σ H(X_i)] raise InfeasibleModelError.
    """
    path = Path(path)
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelError(f"{path}: {e}") from e
    model = model_from_dict(spec)
    violated = check_feasibility(model) if check else []
    if violated:
        details = ", ".join(
            f"task {k}: gamma={model.gamma(k):.6g} not in [0, {model.task_entropy(k):.6g}]"
            for k in violated
        )
        raise InfeasibleModelError(f"{path}: infeasible targets ({details})", violated)
    logger.info(
        "loaded %s: %d components, %d tasks, %d joint symbols",
        path,
        model.n_components,
        len(model.tasks),
        math.prod(c.n_x for c in model.components),
    )
    return model


def save_model(model: DataModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2), encoding="utf-8")
