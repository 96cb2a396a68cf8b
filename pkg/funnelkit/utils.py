import contextlib
import dataclasses
import math
from typing import Any, Iterator, Sequence

import torch

from .types import MAX_JOINT_SYMBOLS, CapacityError, Labels


@dataclasses.dataclass
class ProductAlphabet:
    """Lexicographic enumeration of a product of ordered alphabets.

    The first alphabet is the most significant coordinate, so symbol `j` of the
    product has coordinates `coords[j]` and label `labels[j]`, the component
    labels joined by commas.
    """

    alphabets: Sequence[Labels]
    cap: int = MAX_JOINT_SYMBOLS
    sizes: tuple = dataclasses.field(init=False)
    coords: torch.Tensor = dataclasses.field(init=False)
    labels: Labels = dataclasses.field(init=False)

    def __post_init__(self):
        self.alphabets = tuple(tuple(a) for a in self.alphabets)
        if len(self.alphabets) == 0:
            raise ValueError("product of zero alphabets")
        self.sizes = tuple(len(a) for a in self.alphabets)
        total = math.prod(self.sizes)
        if total > self.cap:
            raise CapacityError(
                f"product alphabet has {total} symbols, cap is {self.cap}"
            )
        grids = torch.meshgrid(*[torch.arange(n) for n in self.sizes], indexing="ij")
        self.coords = torch.stack(grids, -1).reshape(-1, len(self.sizes))
        self.labels = tuple(
            ",".join(a[c] for a, c in zip(self.alphabets, row))
            for row in self.coords.tolist()
        )

    def __len__(self) -> int:
        return len(self.labels)

    def ravel(self, axes: Sequence[int], maps: Sequence[Sequence[int]] = None) -> torch.Tensor:
        """Index of every product symbol inside the sub-product over `axes`.

        When `maps` is given, coordinate `axes[j]` is first sent through
        `maps[j]` (a per-component relabeling such as a private-feature map),
        and the sub-product is formed over the images.
        """
        axes = list(axes)
        if maps is None:
            cols = [self.coords[:, a] for a in axes]
            sizes = [self.sizes[a] for a in axes]
        else:
            cols, sizes = [], []
            for a, m in zip(axes, maps):
                m = torch.as_tensor(list(m), dtype=torch.long)
                cols.append(m[self.coords[:, a]])
                sizes.append(int(m.max()) + 1 if m.numel() > 0 else 1)
        index = torch.zeros(len(self), dtype=torch.long)
        for col, n in zip(cols, sizes):
            index = index * n + col
        return index


@contextlib.contextmanager
def seeded(seed: int) -> Iterator[None]:
    """Scope the global torch generator to `seed`, restoring it afterwards."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def round_sig(x: float, digits: int = 12) -> Any:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.{digits}g}")


def jsonable(obj: Any, digits: int = 12) -> Any:
    """Convert nested results to JSON-ready values with stable number formatting."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: jsonable(getattr(obj, f.name), digits)
            for f in dataclasses.fields(obj)
        }
    if torch.is_tensor(obj):
        return jsonable(obj.tolist(), digits)
    if isinstance(obj, dict):
        return {str(k): jsonable(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v, digits) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, float):
        return round_sig(obj, digits)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
