"""
Stage-4 asymptotic distillation: entropy, base rate, key-pool segmenting and
classical advantage distillation (CAD).

Domain Context:
- A raw key with QBER Q distills to 1-2h(Q) secret bits per sifted bit
- Raw pools mix bits from paths of different length, hence different noise
- CAD splits the key into blocks of C bits, keeps blocks whose parities agree
  and trades length for a lower effective error

Business Rules:
- Segmenting distills every noise class (or class range) separately; by
  concavity of h this never lowers the rate
- CAD throughput counts block survival and the 1/C shrink, so levels compare fairly
- The CAD rate is optimized over the free Bell-diagonal parameter lambda in [0, Q];
  the default takes the worst case, werner mode fixes lambda = Q/2
- Rates are clamped at 0

System Constraints:
- All functions are pure; cad_rate results are memoized per (Q, C, grid, mode)
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from src.domain.entanglement import path_qber
from src.exceptions import DistillationInputError

if TYPE_CHECKING:
    from src.domain.keyaccount import RawKeyPool

FRACTION_TOLERANCE = 1e-9
DEFAULT_LAMBDA_GRID = 1000


class LambdaMode(Enum):
    WORST_CASE = "worst-case"
    WERNER = "werner"

    @classmethod
    def parse(cls, value: Union[str, "LambdaMode"]) -> "LambdaMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DistillationInputError(
                f"Unknown lambda mode '{value}', expected one of {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class CadParams:
    C: int
    lambda_grid: int = DEFAULT_LAMBDA_GRID
    lambda_mode: LambdaMode = LambdaMode.WORST_CASE

    def __post_init__(self):
        if self.C < 1:
            raise DistillationInputError(f"CAD block size must be >= 1, got {self.C}")
        if self.lambda_grid < 1:
            raise DistillationInputError(f"Lambda grid resolution must be >= 1, got {self.lambda_grid}")

    def rate(self, Q: float) -> float:
        return cad_rate(Q, self.C, self.lambda_grid, self.lambda_mode)

    def throughput(self, Q: float) -> float:
        return cad_throughput(Q, self.C, self.lambda_grid, self.lambda_mode)


@dataclass(frozen=True)
class DistillationOptions:
    segmenting: bool = False
    cad: bool = False
    C_max: int = 8
    segment_width: int = 1
    lambda_grid: int = DEFAULT_LAMBDA_GRID
    lambda_mode: LambdaMode = LambdaMode.WORST_CASE

    def __post_init__(self):
        if self.C_max < 1:
            raise DistillationInputError(f"C_max must be >= 1, got {self.C_max}")
        if self.segment_width < 1:
            raise DistillationInputError(f"Segment width must be >= 1, got {self.segment_width}")

    @property
    def label(self) -> str:
        parts = [name for name, on in (("segmenting", self.segmenting), ("cad", self.cad)) if on]
        return "+".join(parts) or "none"


def _h(x):
    """Binary entropy without domain checks; arguments are clipped into [0, 1]"""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    inside = (x > 0) & (x < 1)
    safe = np.where(inside, x, 0.5)
    return np.where(inside, -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe), 0.0)


def binary_entropy(x):
    """h(x) in bits for a probability or an array of them; h(0) = h(1) = 0"""
    values = np.asarray(x, dtype=float)
    if np.any(np.isnan(values)) or np.any(values < 0) or np.any(values > 1):
        raise DistillationInputError(f"Binary entropy is defined on [0, 1], got {x}")
    result = _h(values)
    return float(result) if result.ndim == 0 else result


def base_rate(Q: float) -> float:
    if not 0.0 <= Q <= 0.5 + FRACTION_TOLERANCE:
        raise DistillationInputError(f"QBER must be in [0, 0.5], got {Q}")
    return max(0.0, 1.0 - 2.0 * float(_h(Q)))


def segmented_rate(fractions: Iterable[Tuple[float, float]]) -> float:
    """Weighted per-segment rate for (fraction p_i, QBER Q_i) segments with sum(p_i) = 1"""
    segments = list(fractions)
    if not segments:
        raise DistillationInputError("No segments given")
    total = 0.0
    rate = 0.0
    for p, Q in segments:
        if p < 0:
            raise DistillationInputError(f"Segment fraction must be >= 0, got {p}")
        total += p
        rate += p * base_rate(Q)
    if abs(total - 1.0) > FRACTION_TOLERANCE:
        raise DistillationInputError(f"Segment fractions must sum to 1, got {total}")
    return rate


def _cad_formula(Q: float, C: int, lam):
    qc, pc = Q ** C, (1.0 - Q) ** C
    alpha = qc / (qc + pc)
    beta = (1.0 - 3.0 * Q + 2.0 * lam) / (1.0 - Q)
    gamma = np.abs(Q - 2.0 * lam) / Q if Q > 0 else np.zeros_like(lam)
    return (1.0 - _h(alpha)
            - (1.0 - alpha) * _h((1.0 - beta ** C) / 2.0)
            - alpha * _h((1.0 - gamma ** C) / 2.0))


@lru_cache(maxsize=65536)
def _cad_rate_cached(Q: float, C: int, lambda_grid: int, mode: LambdaMode) -> float:
    if Q == 0.0:
        return 1.0
    if mode is LambdaMode.WERNER:
        value = float(_cad_formula(Q, C, np.float64(Q / 2.0)))
        return max(0.0, value)

    grid = np.linspace(0.0, Q, max(lambda_grid, 2))
    values = _cad_formula(Q, C, grid)
    best = int(np.argmin(values))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    refined = minimize_scalar(lambda lam: float(_cad_formula(Q, C, np.float64(lam))),
                              bounds=(lo, hi), method="bounded")
    value = min(float(values[best]), float(refined.fun))
    return max(0.0, value)


def cad_rate(Q: float, C: int, lambda_grid: int = DEFAULT_LAMBDA_GRID,
             lambda_mode: Union[str, LambdaMode] = LambdaMode.WORST_CASE) -> float:
    """Secret bits per post-CAD bit at block size C"""
    if not 0.0 <= Q <= 0.5:
        raise DistillationInputError(f"QBER must be in [0, 0.5], got {Q}")
    if C < 1:
        raise DistillationInputError(f"CAD block size must be >= 1, got {C}")
    return _cad_rate_cached(float(Q), int(C), int(lambda_grid), LambdaMode.parse(lambda_mode))


def block_survival(Q: float, C: int) -> float:
    return Q ** C + (1.0 - Q) ** C


def cad_throughput(Q: float, C: int, lambda_grid: int = DEFAULT_LAMBDA_GRID,
                   lambda_mode: Union[str, LambdaMode] = LambdaMode.WORST_CASE) -> float:
    """Secret bits per pre-CAD sifted bit"""
    return block_survival(Q, C) / C * cad_rate(Q, C, lambda_grid, lambda_mode)


def optimize_cad(Q: float, C_max: int, lambda_grid: int = DEFAULT_LAMBDA_GRID,
                 lambda_mode: Union[str, LambdaMode] = LambdaMode.WORST_CASE) -> Tuple[int, float]:
    """Best block size in 1..C_max and its throughput; ties go to the smaller C"""
    if C_max < 1:
        raise DistillationInputError(f"C_max must be >= 1, got {C_max}")
    best_C, best = 1, 0.0
    for C in range(1, C_max + 1):
        value = cad_throughput(Q, C, lambda_grid, lambda_mode)
        if value > best + 1e-15:
            best_C, best = C, value
    return best_C, best


def per_bit_rate(Q: float, opts: DistillationOptions) -> float:
    if opts.cad:
        return optimize_cad(Q, opts.C_max, opts.lambda_grid, opts.lambda_mode)[1]
    return base_rate(Q)


def noise_classes(counts: Mapping[int, int], D: float, width: int = 1) -> List[Tuple[int, float]]:
    """
    Group repeater counts into ranges [w*j, w*j + w - 1].

    Returns (bits, QBER) per non-empty range, the QBER being the
    count-weighted mean of its classes.
    """
    grouped: Dict[int, List[float]] = {}
    for k, n in counts.items():
        if n <= 0:
            continue
        bucket = grouped.setdefault(k // width, [0.0, 0.0])
        bucket[0] += n
        bucket[1] += n * path_qber(D, k)
    return [(int(n), q_weighted / n) for _, (n, q_weighted) in sorted(grouped.items())]


def pooled_qber(counts: Mapping[int, int], D: float) -> float:
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return sum(n * path_qber(D, k) for k, n in counts.items()) / total


def distill(pool: "RawKeyPool", D: float, opts: DistillationOptions) -> float:
    """Secret bits extracted from a raw key pool"""
    counts = pool.counts
    total = sum(counts.values())
    if total == 0:
        return 0.0
    if opts.segmenting:
        return sum(n * per_bit_rate(Q, opts) for n, Q in noise_classes(counts, D, opts.segment_width))
    return total * per_bit_rate(pooled_qber(counts, D), opts)


def rate_table(Q_values: Sequence[float], C_max: int, lambda_grid: int = DEFAULT_LAMBDA_GRID,
               lambda_mode: Union[str, LambdaMode] = LambdaMode.WORST_CASE) -> List[Dict[str, float]]:
    """Rows of base rate and CAD rate/throughput per level for inspection"""
    rows = []
    for Q in Q_values:
        row = {"Q": float(Q), "base": base_rate(Q)}
        for C in range(1, C_max + 1):
            row[f"r{C}"] = cad_rate(Q, C, lambda_grid, lambda_mode)
            row[f"t{C}"] = cad_throughput(Q, C, lambda_grid, lambda_mode)
        row["C*"], row["best"] = optimize_cad(Q, C_max, lambda_grid, lambda_mode)
        rows.append(row)
    return rows
