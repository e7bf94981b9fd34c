"""Tensor and CPD File Formats

.tns3: header line `tns3 n1 n2 n3`, then the n1*n2*n3 entries in layout
order (i3 fastest), whitespace separated. The writer puts one mode-3
fiber per line with 17 significant digits.

.cpd.json: {"dims": [n1, n2, n3], "factors": {"A": [[...], ...], "B": ..., "C": ...}}
with each factor stored as a list of its columns.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from ..core.tensor_core import Cpd, Tensor3
from ..errors import FileFormatError, InputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
TNS3_MAGIC = "tns3"
FLOAT_FORMAT = "%.16e"
FACTOR_KEYS = ("A", "B", "C")


class CpdDocument(BaseModel):
    """Validated contents of a .cpd.json file"""
    dims: List[int]
    factors: Dict[str, List[List[float]]]

    @field_validator("dims")
    @classmethod
    def _three_positive_dims(cls, dims: List[int]) -> List[int]:
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {dims}")
        return dims

    @model_validator(mode="after")
    def _factor_shapes(self) -> "CpdDocument":
        if sorted(self.factors) != list(FACTOR_KEYS):
            raise ValueError(f"factors must have exactly the keys A, B, C, got {sorted(self.factors)}")
        ranks = {len(self.factors[key]) for key in FACTOR_KEYS}
        if len(ranks) != 1 or 0 in ranks:
            raise ValueError("factors A, B, C must have the same positive number of columns")
        for key, n in zip(FACTOR_KEYS, self.dims):
            bad = [j for j, column in enumerate(self.factors[key]) if len(column) != n]
            if bad:
                raise ValueError(f"factor {key} column {bad[0]} has length {len(self.factors[key][bad[0]])}, expected {n}")
        return self

    @classmethod
    def from_cpd(cls, cpd: Cpd) -> "CpdDocument":
        return cls(
            dims=list(cpd.dims),
            factors={key: m.T.tolist() for key, m in zip(FACTOR_KEYS, cpd.factors)},
        )

    def to_cpd(self) -> Cpd:
        a, b, c = (np.asarray(self.factors[key], dtype=np.float64).T for key in FACTOR_KEYS)
        return Cpd.from_factors(a, b, c)


def write_tns3(path: PathLike, t: Tensor3) -> None:
    n1, n2, n3 = t.dims
    lines = [f"{TNS3_MAGIC} {n1} {n2} {n3}"]
    for fiber in t.data.reshape(n1 * n2, n3):
        lines.append(" ".join(FLOAT_FORMAT % value for value in fiber))
    Path(path).write_text("\n".join(lines) + "\n")
    logger.debug(f"Wrote {n1}x{n2}x{n3} tensor to {path}")


def _parse_header(path: str, line: str) -> tuple:
    fields = line.split()
    if len(fields) != 4 or fields[0] != TNS3_MAGIC:
        raise FileFormatError(path, 1, f"expected header '{TNS3_MAGIC} n1 n2 n3', got '{line.strip()}'")
    try:
        dims = tuple(int(f) for f in fields[1:])
    except ValueError:
        raise FileFormatError(path, 1, f"dimensions must be integers, got '{' '.join(fields[1:])}'")
    if min(dims) < 1:
        raise FileFormatError(path, 1, f"dimensions must be positive, got {dims}")
    return dims


def read_tns3(path: PathLike) -> Tensor3:
    """Read a .tns3 file

    Raises:
        FileFormatError: bad header, unparsable or non-finite entry, wrong entry count
    """
    name = str(path)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FileFormatError(name, None, f"cannot read file: {e}")
    lines = text.splitlines()
    if not lines:
        raise FileFormatError(name, 1, "file is empty")

    dims = _parse_header(name, lines[0])
    expected = dims[0] * dims[1] * dims[2]
    values: List[float] = []
    for lineno, line in enumerate(lines[1:], start=2):
        for token in line.split():
            try:
                value = float(token)
            except ValueError:
                raise FileFormatError(name, lineno, f"not a number: '{token}'")
            if not np.isfinite(value):
                raise FileFormatError(name, lineno, f"non-finite entry '{token}'")
            values.append(value)
            if len(values) > expected:
                raise FileFormatError(name, lineno, f"more than {expected} entries for dims {dims}")
    if len(values) < expected:
        raise FileFormatError(name, len(lines), f"expected {expected} entries for dims {dims}, found {len(values)}")
    return Tensor3.from_flat(dims, values)


def write_cpd_json(path: PathLike, cpd: Cpd) -> None:
    Path(path).write_text(CpdDocument.from_cpd(cpd).model_dump_json(indent=2) + "\n")
    logger.debug(f"Wrote rank-{cpd.rank} CPD to {path}")


def read_cpd_json(path: PathLike) -> Cpd:
    """Read a .cpd.json file

    Raises:
        FileFormatError: invalid JSON (with line), schema violation or unusable factors
    """
    name = str(path)
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise FileFormatError(name, None, f"cannot read file: {e}")
    except json.JSONDecodeError as e:
        raise FileFormatError(name, e.lineno, e.msg)
    try:
        document = CpdDocument.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise FileFormatError(name, None, f"{location or 'document'}: {first['msg']}")
    try:
        return document.to_cpd()
    except InputError as e:
        raise FileFormatError(name, None, str(e))
