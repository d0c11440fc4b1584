import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from src.exceptions import ResultsWriteError
from src.services.simulator import SimResult

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")

SCALAR_COLUMNS = [
    "preset", "policy", "decoherence", "seed", "rounds",
    "key_rate", "flow_value", "total_sifted", "total_waste",
]
PAIR_COLUMNS = ["secret_bits", "flows", "waste", "pools", "class_qber", "empirical_qber", "config"]
RUNTIME_COLUMN = "runtime_s"


def header(omit_runtime: bool = False) -> List[str]:
    columns = SCALAR_COLUMNS + PAIR_COLUMNS
    return columns if omit_runtime else columns + [RUNTIME_COLUMN]


def _string_keys(nested: Dict[str, Dict[int, Any]]) -> Dict[str, Dict[str, Any]]:
    return {pair: {str(k): v for k, v in inner.items()} for pair, inner in nested.items()}


@dataclass
class OutputRecord:
    """One flattened result row; per-pair maps stay nested until written"""
    preset: str
    policy: str
    decoherence: float
    seed: int
    rounds: int
    key_rate: float
    flow_value: float
    total_sifted: int
    total_waste: float
    secret_bits: Dict[str, float] = field(default_factory=dict)
    flows: Dict[str, float] = field(default_factory=dict)
    waste: Dict[str, float] = field(default_factory=dict)
    pools: Dict[str, Dict[str, int]] = field(default_factory=dict)
    class_qber: Dict[str, Dict[str, float]] = field(default_factory=dict)
    empirical_qber: Dict[str, Dict[str, float]] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    runtime_s: Optional[float] = None

    @classmethod
    def from_result(cls, result: SimResult, omit_runtime: bool = False) -> "OutputRecord":
        return cls(
            preset=result.preset,
            policy=result.policy,
            decoherence=result.decoherence,
            seed=result.seed,
            rounds=result.rounds,
            key_rate=result.key_rate,
            flow_value=result.flow_value,
            total_sifted=result.total_sifted,
            total_waste=result.total_waste,
            secret_bits=dict(result.secret_bits),
            flows=dict(result.flows),
            waste=dict(result.waste),
            pools=_string_keys(result.pools),
            class_qber=_string_keys(result.class_qber),
            empirical_qber=_string_keys(result.empirical_qber),
            config=dict(result.config),
            runtime_s=None if omit_runtime else result.runtime_s,
        )

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if data[RUNTIME_COLUMN] is None:
            del data[RUNTIME_COLUMN]
        return data

    def as_row(self) -> Dict[str, Any]:
        """CSV row: nested maps JSON-encoded so the header never depends on the preset"""
        row = self.as_dict()
        for column in PAIR_COLUMNS:
            row[column] = json.dumps(row[column], sort_keys=True)
        return row


def write_results(records: Sequence[OutputRecord], path: Union[str, Path], format: str = "csv") -> None:
    if format not in FORMATS:
        raise ValueError(f"Unknown output format '{format}', expected one of {FORMATS}")
    path = Path(path)
    omit_runtime = bool(records) and all(r.runtime_s is None for r in records)
    try:
        if format == "csv":
            frame = pd.DataFrame([r.as_row() for r in records], columns=header(omit_runtime))
            frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
        else:
            with open(path, "w", encoding="utf-8") as f:
                json.dump([r.as_dict() for r in records], f, indent=2, sort_keys=True)
                f.write("\n")
    except OSError as e:
        raise ResultsWriteError(path, str(e)) from e
    logger.info(f"Wrote {len(records)} records to {path}")
