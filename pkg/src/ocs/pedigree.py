"""Pedigree parsing, validation and canonical ordering.

A pedigree is a list of candidate members, each with up to two known
parents and an estimated breeding value (EBV).  All matrix algebra in
:mod:`ocs.kinship` assumes the *canonical* ordering produced here:
members are numbered ``1..m`` such that every member has a larger index
than both of its parents, and the first parent slot holds the larger
parent index (``sire >= dam``, with ``0`` encoding an unknown parent).

Input files are CSV with header ``id,sire,dam,ebv``; lines starting with
``#`` are comments and an unknown parent is written as ``0`` or left
empty.  Files need not be topologically sorted: parsing applies a stable
topological renumbering and keeps the original identifiers as labels.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PedigreeError",
    "MemberRecord",
    "Pedigree",
    "ParentGroups",
    "parse_pedigree",
    "classify",
    "write_pedigree",
]


class PedigreeError(ValueError):
    """Raised for structurally invalid pedigree data."""


@dataclass(frozen=True)
class MemberRecord:
    """One raw row of a pedigree file, prior to renumbering.

    ``sire``/``dam`` hold external identifiers as written in the file;
    ``None`` means the parent is unknown.
    """

    id: str
    sire: str | None
    dam: str | None
    ebv: float


@dataclass(frozen=True)
class Pedigree:
    """A validated pedigree in canonical order.

    Attributes
    ----------
    sire, dam : ndarray of int
        1-based parent indices per member, ``0`` when unknown.  The
        canonical invariant is ``i > sire[i-1] >= dam[i-1]`` for every
        member ``i`` (indices here are 1-based member numbers).
    ebv : ndarray of float
        Estimated breeding values; the objective coefficients.
    labels : tuple of str
        External identifiers in canonical order, for output mapping.
    """

    sire: np.ndarray
    dam: np.ndarray
    ebv: np.ndarray
    labels: tuple[str, ...] = field(repr=False)

    def __post_init__(self):
        m = len(self.sire)
        if not (len(self.dam) == len(self.ebv) == len(self.labels) == m):
            raise PedigreeError("pedigree arrays have inconsistent lengths")
        idx = np.arange(1, m + 1)
        if np.any(self.sire >= idx) or np.any(self.dam >= idx):
            raise PedigreeError("parent index does not precede member")
        if np.any(self.sire < self.dam) or np.any(self.dam < 0):
            raise PedigreeError("parent slots violate sire >= dam >= 0")
        if not np.all(np.isfinite(self.ebv)):
            raise PedigreeError("non-finite breeding value")

    @property
    def size(self) -> int:
        """Number of members ``m``."""
        return len(self.sire)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pedigree):
            return NotImplemented
        return (
            np.array_equal(self.sire, other.sire)
            and np.array_equal(self.dam, other.dam)
            and np.array_equal(self.ebv, other.ebv)
            and self.labels == other.labels
        )


@dataclass(frozen=True)
class ParentGroups:
    """Partition of members by parent knowledge.

    ``founders`` have no known parent, ``single`` exactly one, ``full``
    both.  Each array holds 1-based member indices; together they cover
    ``{1..m}`` exactly once.
    """

    founders: np.ndarray
    single: np.ndarray
    full: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.founders), len(self.single), len(self.full)


def classify(ped: Pedigree) -> ParentGroups:
    """Split members into founder / one-parent / two-parent groups.

    In canonical order a known single parent always occupies the sire
    slot, so the test reduces to which slots are zero.
    """
    members = np.arange(1, ped.size + 1)
    founders = members[ped.sire == 0]
    single = members[(ped.sire != 0) & (ped.dam == 0)]
    full = members[ped.dam != 0]
    return ParentGroups(founders=founders, single=single, full=full)


def _parse_parent(token: str, row: int) -> str | None:
    token = token.strip()
    if token == "" or token == "0":
        return None
    return token


def _parse_records(text: str) -> list[MemberRecord]:
    records = []
    lines = text.splitlines()
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not header_seen:
            cols = [c.strip().lower() for c in stripped.split(",")]
            if cols[:4] != ["id", "sire", "dam", "ebv"]:
                raise PedigreeError(
                    f"line {lineno}: expected header 'id,sire,dam,ebv'"
                )
            header_seen = True
            continue
        parts = stripped.split(",")
        if len(parts) != 4:
            raise PedigreeError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        ident = parts[0].strip()
        if not ident:
            raise PedigreeError(f"line {lineno}: empty id")
        if ident == "0":
            raise PedigreeError(f"line {lineno}: id '0' is reserved for unknown parents")
        ebv_text = parts[3].strip()
        if ebv_text == "":
            raise PedigreeError(f"line {lineno}: missing ebv for member '{ident}'")
        try:
            ebv = float(ebv_text)
        except ValueError:
            raise PedigreeError(
                f"line {lineno}: malformed numeric field '{ebv_text}'"
            ) from None
        if not np.isfinite(ebv):
            raise PedigreeError(f"line {lineno}: non-finite ebv for '{ident}'")
        records.append(
            MemberRecord(
                id=ident,
                sire=_parse_parent(parts[1], lineno),
                dam=_parse_parent(parts[2], lineno),
                ebv=ebv,
            )
        )
    if not header_seen:
        raise PedigreeError("empty pedigree: no header found")
    return records


def _topological_order(records: list[MemberRecord]) -> list[int]:
    """Stable parents-first order of record positions (Kahn with a heap).

    Among members whose parents are all placed, the one earliest in the
    file goes first, so already-sorted files keep their ordering.
    """
    n = len(records)
    index_of = {r.id: k for k, r in enumerate(records)}
    children: list[list[int]] = [[] for _ in range(n)]
    pending = np.zeros(n, dtype=int)
    for k, rec in enumerate(records):
        for parent in (rec.sire, rec.dam):
            if parent is None:
                continue
            j = index_of[parent]
            children[j].append(k)
            pending[k] += 1
    ready = [k for k in range(n) if pending[k] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        k = heapq.heappop(ready)
        order.append(k)
        for child in children[k]:
            pending[child] -= 1
            if pending[child] == 0:
                heapq.heappush(ready, child)
    if len(order) < n:
        stuck = [records[k].id for k in range(n) if pending[k] > 0]
        raise PedigreeError(f"cyclic ancestry involving members {stuck[:5]}")
    return order


def parse_pedigree(text) -> Pedigree:
    """Parse CSV pedigree data into canonical order.

    Parameters
    ----------
    text : str or readable text stream
        CSV content with header ``id,sire,dam,ebv``.

    Returns
    -------
    Pedigree
        Members renumbered so parents precede children and the known
        parent of a one-parent member sits in the sire slot.

    Raises
    ------
    PedigreeError
        On duplicate ids, undefined parents, self-parenting, cyclic
        ancestry, or malformed numeric fields.
    """
    if hasattr(text, "read"):
        text = text.read()
    records = _parse_records(text)

    seen: set[str] = set()
    for rec in records:
        if rec.id in seen:
            raise PedigreeError(f"duplicate id '{rec.id}'")
        seen.add(rec.id)
    for rec in records:
        for parent in (rec.sire, rec.dam):
            if parent is None:
                continue
            if parent == rec.id:
                raise PedigreeError(f"member '{rec.id}' lists itself as a parent")
            if parent not in seen:
                raise PedigreeError(
                    f"parent '{parent}' of member '{rec.id}' is not defined"
                )

    order = _topological_order(records)
    # canonical 1-based number for each record position
    number = np.empty(len(records), dtype=int)
    for new, old in enumerate(order):
        number[old] = new + 1

    m = len(records)
    sire = np.zeros(m, dtype=np.int64)
    dam = np.zeros(m, dtype=np.int64)
    ebv = np.zeros(m)
    labels = []
    index_of = {r.id: k for k, r in enumerate(records)}
    for new, old in enumerate(order):
        rec = records[old]
        a = number[index_of[rec.sire]] if rec.sire is not None else 0
        b = number[index_of[rec.dam]] if rec.dam is not None else 0
        # known single parent goes in the sire slot; sire >= dam otherwise
        sire[new], dam[new] = (a, b) if a >= b else (b, a)
        ebv[new] = rec.ebv
        labels.append(rec.id)
    return Pedigree(sire=sire, dam=dam, ebv=ebv, labels=tuple(labels))


def write_pedigree(ped: Pedigree, sink) -> None:
    """Write a pedigree back out in the canonical CSV format.

    Unknown parents are written as ``0``; re-parsing the output yields a
    pedigree equal to ``ped``.
    """
    own = isinstance(sink, str)
    handle = open(sink, "w", encoding="utf-8") if own else sink
    try:
        handle.write("id,sire,dam,ebv\n")
        for i in range(ped.size):
            s = ped.labels[ped.sire[i] - 1] if ped.sire[i] else "0"
            d = ped.labels[ped.dam[i] - 1] if ped.dam[i] else "0"
            handle.write(f"{ped.labels[i]},{s},{d},{float(ped.ebv[i])!r}\n")
    finally:
        if own:
            handle.close()


def pedigree_to_csv(ped: Pedigree) -> str:
    """Serialize a pedigree to a CSV string (see :func:`write_pedigree`)."""
    buf = io.StringIO()
    write_pedigree(ped, buf)
    return buf.getvalue()
