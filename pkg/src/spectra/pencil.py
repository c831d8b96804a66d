"""Block-diagonal sparse matrix pencils and the spectrahedral-shadow data model.

A shadow ``S = {x in R^n : exists y in R^m, Lam + sum_i x_i A_i + sum_j y_j B_j >= 0}``
is stored as a list of block groups, one per diagonal block of the pencil.
Every matrix is a sparse symmetric matrix holding only its upper triangle;
zero matrices are stored with empty entry lists so that each block always
carries exactly ``n`` A-matrices and ``m`` B-matrices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, ShadowFormatError

FORMAT_VERSION = 1

#: A symmetric matrix M is accepted as PSD iff lambda_min(M) >= -tol * (1 + ||M||_F).
DEFAULT_PSD_TOL = 1e-7

Entry = tuple[int, int, float]


@dataclass(frozen=True)
class SymSparse:
    """Sparse symmetric matrix in upper-triangle coordinate form.

    Entries are 1-based ``(row, col, value)`` triples with ``row <= col``;
    the lower triangle is implied by symmetry. Each ``(row, col)`` pair
    appears at most once and entries are kept sorted by ``(col, row)``,
    matching the column-stacked triangle layout used throughout.
    """

    size: int
    entries: tuple[Entry, ...] = ()

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ValueError(f"matrix size must be a positive integer, got {self.size!r}")
        seen = set()
        for r, c, v in self.entries:
            if not (isinstance(r, int) and isinstance(c, int)):
                raise ValueError(f"indices must be integers, got ({r!r}, {c!r})")
            if not (1 <= r <= c <= self.size):
                raise ValueError(
                    f"entry ({r}, {c}) outside the upper triangle of a size-{self.size} matrix"
                )
            if not math.isfinite(v):
                raise ValueError(f"entry ({r}, {c}) has non-finite value {v!r}")
            if (r, c) in seen:
                raise ValueError(f"duplicate entry at ({r}, {c})")
            seen.add((r, c))
        object.__setattr__(
            self, "entries", tuple(sorted(((r, c, float(v)) for r, c, v in self.entries),
                                          key=lambda e: (e[1], e[0])))
        )

    @classmethod
    def from_dense(cls, mat: np.ndarray, sym_tol: float = 1e-9) -> "SymSparse":
        """Build from a dense symmetric array, dropping exact zeros.

        The input is symmetrized; asymmetry beyond ``sym_tol`` (relative) is
        rejected.
        """
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        scale = np.abs(mat).max(initial=0.0)
        if np.abs(mat - mat.T).max(initial=0.0) > sym_tol * (1.0 + scale):
            raise ValueError("matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        s = mat.shape[0]
        entries = [
            (r + 1, c + 1, float(mat[r, c]))
            for c in range(s)
            for r in range(c + 1)
            if mat[r, c] != 0.0
        ]
        return cls(s, tuple(entries))

    @classmethod
    def zero(cls, size: int) -> "SymSparse":
        return cls(size, ())

    @classmethod
    def identity(cls, size: int) -> "SymSparse":
        return cls(size, tuple((i, i, 1.0) for i in range(1, size + 1)))

    @classmethod
    def diag(cls, values: Sequence[float]) -> "SymSparse":
        vals = [float(v) for v in values]
        return cls(len(vals), tuple((i + 1, i + 1, v) for i, v in enumerate(vals) if v != 0.0))

    @property
    def is_zero(self) -> bool:
        return not self.entries

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for r, c, v in self.entries:
            out[r - 1, c - 1] = v
            out[c - 1, r - 1] = v
        return out

    def scaled(self, factor: float) -> "SymSparse":
        if factor == 0.0:
            return SymSparse(self.size)
        return SymSparse(self.size, tuple((r, c, factor * v) for r, c, v in self.entries))

    def __neg__(self) -> "SymSparse":
        return self.scaled(-1.0)

    def trace(self) -> float:
        return float(sum(v for r, c, v in self.entries if r == c))

    def frob(self) -> float:
        sq = sum((v * v if r == c else 2.0 * v * v) for r, c, v in self.entries)
        return math.sqrt(sq)

    def congruence(self, p: np.ndarray) -> np.ndarray:
        """Dense ``P^T M P`` for a (size x k) projector ``P``."""
        return p.T @ self.to_dense() @ p


def combine(size: int, terms: Iterable[tuple[float, SymSparse]]) -> SymSparse:
    """Sparse linear combination ``sum_k coeff_k * M_k``; exact zeros are dropped."""
    acc: dict[tuple[int, int], float] = {}
    for coeff, mat in terms:
        if coeff == 0.0 or mat.is_zero:
            continue
        if mat.size != size:
            raise DimensionMismatch(f"cannot combine size-{mat.size} matrix into size-{size}")
        for r, c, v in mat.entries:
            acc[(r, c)] = acc.get((r, c), 0.0) + coeff * v
    return SymSparse(size, tuple((r, c, v) for (r, c), v in acc.items() if v != 0.0))


@dataclass(frozen=True)
class BlockGroup:
    """One diagonal block of the pencil: ``Lam`` plus its A- and B-coefficients."""

    block_size: int
    lam: SymSparse
    a_mats: tuple[SymSparse, ...]
    b_mats: tuple[SymSparse, ...]

    def __post_init__(self):
        object.__setattr__(self, "a_mats", tuple(self.a_mats))
        object.__setattr__(self, "b_mats", tuple(self.b_mats))
        if self.block_size < 1:
            raise ValueError(f"block size must be positive, got {self.block_size}")
        for mat in (self.lam, *self.a_mats, *self.b_mats):
            if mat.size != self.block_size:
                raise ValueError(
                    f"matrix of size {mat.size} stored in a block of size {self.block_size}"
                )


@dataclass(frozen=True)
class Shadow:
    """A spectrahedral shadow with ambient dimension ``n`` and lifted dimension ``m``."""

    n: int
    m: int
    blocks: tuple[BlockGroup, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.n < 1:
            raise ValueError(f"ambient dimension must be positive, got {self.n}")
        if self.m < 0:
            raise ValueError(f"lifted dimension must be nonnegative, got {self.m}")
        if not self.blocks:
            raise ValueError("a shadow needs at least one block")
        for blk in self.blocks:
            if len(blk.a_mats) != self.n:
                raise ValueError(f"block has {len(blk.a_mats)} A-matrices, expected {self.n}")
            if len(blk.b_mats) != self.m:
                raise ValueError(f"block has {len(blk.b_mats)} B-matrices, expected {self.m}")

    @property
    def size(self) -> int:
        return sum(blk.block_size for blk in self.blocks)

    def lambda_frob(self) -> float:
        """Frobenius norm of the full block-diagonal ``Lam``."""
        return math.sqrt(sum(blk.lam.frob() ** 2 for blk in self.blocks))


def assemble(shadow: Shadow, x: Sequence[float], y: Sequence[float] = ()) -> list[np.ndarray]:
    """Evaluate the pencil at ``(x, y)``, one dense symmetric matrix per block.

    Concatenating the returned matrices block-diagonally yields ``Lam(x, y)``;
    the full dense matrix is deliberately never formed here.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != shadow.n:
        raise DimensionMismatch(f"x has length {x.shape[0]}, shadow has n = {shadow.n}")
    if y.shape[0] != shadow.m:
        raise DimensionMismatch(f"y has length {y.shape[0]}, shadow has m = {shadow.m}")
    out = []
    for blk in shadow.blocks:
        dense = blk.lam.to_dense()
        for xi, mat in zip(x, blk.a_mats):
            if xi != 0.0 and not mat.is_zero:
                dense += xi * mat.to_dense()
        for yj, mat in zip(y, blk.b_mats):
            if yj != 0.0 and not mat.is_zero:
                dense += yj * mat.to_dense()
        out.append(dense)
    return out


def is_psd(mat: np.ndarray, tol: float = DEFAULT_PSD_TOL) -> bool:
    """Scale-aware PSD acceptance: ``lambda_min >= -tol * (1 + ||M||_F)``."""
    if mat.shape[0] == 1:
        lam_min = mat[0, 0]
    else:
        lam_min = float(np.linalg.eigvalsh(mat)[0])
    return lam_min >= -tol * (1.0 + float(np.linalg.norm(mat)))


def eval_membership_fast(
    shadow: Shadow, x: Sequence[float], y: Sequence[float] = (), tol: float = DEFAULT_PSD_TOL
) -> bool:
    """Certificate check: is ``Lam(x, y)`` PSD blockwise within ``tol``?

    This witnesses membership of ``x`` for the specific ``y`` supplied; a
    False answer does not rule out membership via some other ``y`` (use
    ``validate.contains_point`` for the projection test).
    """
    return all(is_psd(mat, tol) for mat in assemble(shadow, x, y))


Target = tuple[str, int]  # ("x"|"y", 1-based output index)


@dataclass(frozen=True)
class MergePlan:
    """Remap of one input shadow's variables onto output variable slots."""

    x_targets: tuple[Target, ...]
    y_targets: tuple[Target, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "x_targets", tuple(self.x_targets))
        object.__setattr__(self, "y_targets", tuple(self.y_targets))
        for kind, idx in (*self.x_targets, *self.y_targets):
            if kind not in ("x", "y") or idx < 1:
                raise ValueError(f"invalid merge target ({kind!r}, {idx})")
        all_targets = (*self.x_targets, *self.y_targets)
        if len(set(all_targets)) != len(all_targets):
            raise ValueError("merge plan maps two input variables onto the same output slot")

    @classmethod
    def identity(cls, n: int, m: int, x_offset: int = 0, y_offset: int = 0) -> "MergePlan":
        return cls(
            tuple(("x", x_offset + i) for i in range(1, n + 1)),
            tuple(("y", y_offset + j) for j in range(1, m + 1)),
        )


def diag_concat(
    shadows: Sequence[Shadow], plans: Sequence[MergePlan], n: int, m: int
) -> Shadow:
    """Stack shadows block-diagonally, rerouting variables per the merge plans.

    Purely structural: no stored value is changed, only the slot each matrix
    occupies. The set semantics (intersection, product, ...) are determined
    entirely by how the plans share or separate output variables.
    """
    if len(shadows) != len(plans):
        raise DimensionMismatch(f"{len(shadows)} shadows but {len(plans)} plans")
    if not shadows:
        raise ValueError("diag_concat needs at least one input")
    blocks: list[BlockGroup] = []
    for shadow, plan in zip(shadows, plans):
        if len(plan.x_targets) != shadow.n or len(plan.y_targets) != shadow.m:
            raise DimensionMismatch(
                f"plan covers ({len(plan.x_targets)}, {len(plan.y_targets)}) variables, "
                f"shadow has ({shadow.n}, {shadow.m})"
            )
        for kind, idx in (*plan.x_targets, *plan.y_targets):
            bound = n if kind == "x" else m
            if idx > bound:
                raise DimensionMismatch(f"target ({kind}, {idx}) exceeds output dimension {bound}")
        for blk in shadow.blocks:
            a_out = [SymSparse.zero(blk.block_size)] * n
            b_out = [SymSparse.zero(blk.block_size)] * m
            for mat, (kind, idx) in zip(blk.a_mats + blk.b_mats,
                                        plan.x_targets + plan.y_targets):
                if kind == "x":
                    a_out[idx - 1] = mat
                else:
                    b_out[idx - 1] = mat
            blocks.append(BlockGroup(blk.block_size, blk.lam, tuple(a_out), tuple(b_out)))
    return Shadow(n, m, tuple(blocks))


# ---------------------------------------------------------------------------
# Serialization. The on-disk format is a JSON document:
#   {"version": 1, "n": .., "m": .., "blocks": [
#       {"size": .., "lambda": [[r, c, v], ...], "a": [[[r, c, v], ...] x n],
#        "b": [... x m]}]}
# with 1-based upper-triangle indices and full-precision decimal values.
# ---------------------------------------------------------------------------


def _entries_to_doc(mat: SymSparse) -> list[list]:
    return [[r, c, v] for r, c, v in mat.entries]


def _entries_from_doc(size: int, doc, what: str) -> SymSparse:
    if not isinstance(doc, list):
        raise ShadowFormatError(f"{what}: expected a list of entries")
    entries = []
    for item in doc:
        if not (isinstance(item, list) and len(item) == 3):
            raise ShadowFormatError(f"{what}: entry {item!r} is not a [row, col, value] triple")
        r, c, v = item
        if not (isinstance(r, int) and isinstance(c, int) and isinstance(v, (int, float))):
            raise ShadowFormatError(f"{what}: entry {item!r} has wrong field types")
        entries.append((r, c, float(v)))
    try:
        return SymSparse(size, tuple(entries))
    except ValueError as err:
        raise ShadowFormatError(f"{what}: {err}") from err


def serialize(shadow: Shadow) -> str:
    doc = {
        "version": FORMAT_VERSION,
        "n": shadow.n,
        "m": shadow.m,
        "blocks": [
            {
                "size": blk.block_size,
                "lambda": _entries_to_doc(blk.lam),
                "a": [_entries_to_doc(mat) for mat in blk.a_mats],
                "b": [_entries_to_doc(mat) for mat in blk.b_mats],
            }
            for blk in shadow.blocks
        ],
    }
    return json.dumps(doc, allow_nan=False)


def deserialize(text: str) -> Shadow:
    def _reject_constant(name):
        raise ShadowFormatError(f"non-finite value {name} in document")

    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as err:
        raise ShadowFormatError(f"not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ShadowFormatError("top-level document must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ShadowFormatError(f"unsupported format version {doc.get('version')!r}")
    for key in ("n", "m", "blocks"):
        if key not in doc:
            raise ShadowFormatError(f"missing field {key!r}")
    n, m = doc["n"], doc["m"]
    if not (isinstance(n, int) and isinstance(m, int)):
        raise ShadowFormatError("n and m must be integers")
    if not isinstance(doc["blocks"], list) or not doc["blocks"]:
        raise ShadowFormatError("blocks must be a nonempty list")
    blocks = []
    for k, bdoc in enumerate(doc["blocks"]):
        if not isinstance(bdoc, dict):
            raise ShadowFormatError(f"block {k}: expected an object")
        size = bdoc.get("size")
        if not isinstance(size, int) or size < 1:
            raise ShadowFormatError(f"block {k}: bad size {size!r}")
        lam = _entries_from_doc(size, bdoc.get("lambda"), f"block {k} lambda")
        a_docs = bdoc.get("a")
        b_docs = bdoc.get("b")
        if not isinstance(a_docs, list) or len(a_docs) != n:
            raise ShadowFormatError(f"block {k}: expected {n} A-matrices")
        if not isinstance(b_docs, list) or len(b_docs) != m:
            raise ShadowFormatError(f"block {k}: expected {m} B-matrices")
        a_mats = tuple(_entries_from_doc(size, d, f"block {k} a[{i}]") for i, d in enumerate(a_docs))
        b_mats = tuple(_entries_from_doc(size, d, f"block {k} b[{j}]") for j, d in enumerate(b_docs))
        blocks.append(BlockGroup(size, lam, a_mats, b_mats))
    try:
        return Shadow(n, m, tuple(blocks))
    except ValueError as err:
        raise ShadowFormatError(str(err)) from err


def save(shadow: Shadow, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(shadow))
        fh.write("\n")


def load(path) -> Shadow:
    with open(path, "r", encoding="utf-8") as fh:
        return deserialize(fh.read())
