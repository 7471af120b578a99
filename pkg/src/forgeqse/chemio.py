"""Molecular integrals: FCIDUMP input/output, frozen-core reduction and orbital metadata."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

HARTREE_TO_EV = 27.211386245988

C2V_IRREPS = ("A1", "A2", "B1", "B2")

# ORBSYM integer -> C2v irrep.  DEFAULT_ORBSYM is the 1-based (A1, A2, B1, B2)
# ordering; MOLPRO_C2V is the (A1, B1, B2, A2) ordering MOLPRO documents.
DEFAULT_ORBSYM = {1: "A1", 2: "A2", 3: "B1", 4: "B2"}
MOLPRO_C2V = {1: "A1", 2: "B1", 3: "B2", 4: "A2"}


class FCIDUMPError(ValueError):
    """Malformed FCIDUMP content."""


class FCIDUMPBoundsError(FCIDUMPError, IndexError):
    """An integral index lies outside 1..NORB."""


class UnsupportedReferenceError(FCIDUMPError):
    """Open-shell (MS2 != 0) references are not handled."""


class ConfigurationError(ValueError):
    """Inconsistent active-space or frozen-core definition."""


@dataclass(frozen=True, eq=False)
class MolecularIntegrals:
    """Active-space Hamiltonian ingredients in chemists' notation.

    ``h[p, q]`` are one-electron integrals and ``g[p, q, r, s] = (pq|rs)``.
    """

    n_orbitals: int
    n_alpha: int
    n_beta: int
    core_energy: float
    h: np.ndarray
    g: np.ndarray
    orbital_irreps: tuple[str, ...] = ()
    point_group: str = "C2v"

    def __post_init__(self):
        n = self.n_orbitals
        h = np.asarray(self.h, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if h.shape != (n, n) or g.shape != (n, n, n, n):
            raise ValueError(f"integral arrays must be dimensioned by n_orbitals={n}")
        if self.orbital_irreps and len(self.orbital_irreps) != n:
            raise ValueError("orbital_irreps must have one label per orbital")
        h.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "orbital_irreps", tuple(self.orbital_irreps))

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    def irreps(self) -> tuple[str, ...]:
        """Orbital irreps, defaulting to all-A1 when none were supplied."""
        return self.orbital_irreps or ("A1",) * self.n_orbitals

    def check_symmetry(self, atol: float = 1e-10) -> bool:
        h, g = self.h, self.g
        return bool(
            np.allclose(h, h.T, atol=atol)
            and np.allclose(g, g.transpose(1, 0, 2, 3), atol=atol)
            and np.allclose(g, g.transpose(0, 1, 3, 2), atol=atol)
            and np.allclose(g, g.transpose(2, 3, 0, 1), atol=atol)
        )

    def same_as(self, other: "MolecularIntegrals") -> bool:
        return (
            self.n_orbitals == other.n_orbitals
            and self.n_alpha == other.n_alpha
            and self.n_beta == other.n_beta
            and self.core_energy == other.core_energy
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.g, other.g)
            and self.orbital_irreps == other.orbital_irreps
        )


@dataclass(frozen=True)
class ActiveSpaceSpec:
    active_orbital_indices: tuple[int, ...]
    n_active_electrons: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.active_orbital_indices)
        object.__setattr__(self, "active_orbital_indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigurationError("active orbital indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise ConfigurationError("active orbital indices must be non-negative")
        if self.n_active_electrons % 2:
            raise ConfigurationError("a closed-shell active space needs an even electron count")
        if self.n_active_electrons > 2 * len(idx):
            raise ConfigurationError("more active electrons than active spin-orbitals")


_HEADER_END = re.compile(r"&END|^\s*/\s*$", re.IGNORECASE)


def _parse_header(lines: list[str]) -> tuple[dict[str, list[str]], int]:
    if not lines or "&FCI" not in lines[0].upper():
        raise FCIDUMPError("line 1: expected '&FCI' namelist header")
    chunks = []
    for lineno, line in enumerate(lines):
        chunks.append(line)
        if _HEADER_END.search(line):
            body = " ".join(chunks)
            body = re.sub(r"&FCI", "", body, flags=re.IGNORECASE)
            body = re.sub(r"&END", "", body, flags=re.IGNORECASE).replace("/", " ")
            break
    else:
        raise FCIDUMPError(f"line {len(lines)}: header is never terminated by &END")

    fields: dict[str, list[str]] = {}
    key = None
    for token in re.split(r"[,\s]+", body):
        if not token:
            continue
        if "=" in token:
            key, _, value = token.partition("=")
            key = key.strip().upper()
            fields[key] = [value] if value else []
        elif key is None:
            raise FCIDUMPError(f"line 1: unexpected token {token!r} in header")
        else:
            fields[key].append(token)
    return fields, lineno + 1


def parse_fcidump(
    text: str, orbsym_map: Mapping[int, str] = DEFAULT_ORBSYM
) -> MolecularIntegrals:
    """Parse an FCIDUMP document (1-based indices, chemists' notation)."""
    lines = text.splitlines()
    fields, first_data = _parse_header(lines)

    def scalar(name, default=None):
        if name not in fields or not fields[name]:
            if default is None:
                raise FCIDUMPError(f"line 1: header is missing {name}")
            return default
        try:
            return int(fields[name][0])
        except ValueError:
            raise FCIDUMPError(f"line 1: {name} is not an integer") from None

    norb = scalar("NORB")
    nelec = scalar("NELEC")
    ms2 = scalar("MS2", 0)
    if ms2 != 0:
        raise UnsupportedReferenceError(f"MS2={ms2}: only closed-shell references are supported")
    if nelec % 2:
        raise UnsupportedReferenceError(f"NELEC={nelec} is odd")
    raw_orbsym = [int(x) for x in fields.get("ORBSYM", []) if x]
    if raw_orbsym and len(raw_orbsym) != norb:
        raise FCIDUMPError(f"line 1: ORBSYM has {len(raw_orbsym)} entries, NORB={norb}")
    try:
        irreps = tuple(orbsym_map[s] for s in raw_orbsym)
    except KeyError as exc:
        raise FCIDUMPError(f"line 1: ORBSYM value {exc.args[0]} has no irrep mapping") from None

    h = np.zeros((norb, norb))
    g = np.zeros((norb, norb, norb, norb))
    core = 0.0
    for lineno in range(first_data, len(lines)):
        parts = lines[lineno].split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FCIDUMPError(f"line {lineno + 1}: expected 'value i j k l'")
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError:
            raise FCIDUMPError(f"line {lineno + 1}: cannot parse {lines[lineno]!r}") from None
        if any(x < 0 or x > norb for x in (i, j, k, l)):
            raise FCIDUMPBoundsError(f"line {lineno + 1}: index out of range 1..{norb}")
        if i == j == k == l == 0:
            core = value
        elif k == l == 0:
            if j == 0:
                continue  # orbital energy records
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        elif i and j and k and l:
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in (
                (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
            ):
                g[a, b, c, d] = value
        else:
            raise FCIDUMPError(f"line {lineno + 1}: unrecognised index pattern")
    return MolecularIntegrals(
        n_orbitals=norb,
        n_alpha=nelec // 2,
        n_beta=nelec // 2,
        core_energy=core,
        h=h,
        g=g,
        orbital_irreps=irreps,
    )


def read_fcidump(path, orbsym_map: Mapping[int, str] = DEFAULT_ORBSYM) -> MolecularIntegrals:
    with open(path) as fh:
        return parse_fcidump(fh.read(), orbsym_map)


def write_fcidump(
    ints: MolecularIntegrals,
    orbsym_map: Mapping[int, str] = DEFAULT_ORBSYM,
    tol: float = 0.0,
) -> str:
    """Serialize to FCIDUMP text; values are written with round-trip precision."""
    n = ints.n_orbitals
    inverse = {v: k for k, v in orbsym_map.items()}
    orbsym = ",".join(str(inverse[r]) for r in ints.irreps())
    out = io.StringIO()
    out.write(f" &FCI NORB={n},NELEC={ints.n_electrons},MS2={ints.n_alpha - ints.n_beta},\n")
    out.write(f"  ORBSYM={orbsym},\n  ISYM=1,\n &END\n")

    def emit(v, i, j, k, l):
        out.write(f"{v!r:>26} {i:4d} {j:4d} {k:4d} {l:4d}\n")

    g, h = ints.g, ints.h
    for p in range(n):
        for q in range(p + 1):
            pq = p * (p + 1) // 2 + q
            for r in range(n):
                for s in range(r + 1):
                    if r * (r + 1) // 2 + s > pq:
                        continue
                    v = float(g[p, q, r, s])
                    if v != 0.0 and abs(v) > tol:
                        emit(v, p + 1, q + 1, r + 1, s + 1)
    for p in range(n):
        for q in range(p + 1):
            v = float(h[p, q])
            if v != 0.0 and abs(v) > tol:
                emit(v, p + 1, q + 1, 0, 0)
    emit(float(ints.core_energy), 0, 0, 0, 0)
    return out.getvalue()


def freeze_core(
    full: MolecularIntegrals, spec: ActiveSpaceSpec, frozen_occupied: Sequence[int] = ()
) -> MolecularIntegrals:
    """Embed doubly-occupied frozen orbitals into an active-space Hamiltonian."""
    active = list(spec.active_orbital_indices)
    frozen = sorted(int(i) for i in frozen_occupied)
    if set(active) & set(frozen):
        raise ConfigurationError(f"orbitals {sorted(set(active) & set(frozen))} are both frozen and active")
    if len(set(frozen)) != len(frozen):
        raise ConfigurationError("duplicate frozen orbital index")
    if any(i >= full.n_orbitals or i < 0 for i in active + frozen):
        raise ConfigurationError("orbital index outside the full orbital set")
    if spec.n_active_electrons + 2 * len(frozen) != full.n_electrons:
        raise ConfigurationError(
            f"{spec.n_active_electrons} active + {2 * len(frozen)} frozen electrons "
            f"!= {full.n_electrons} total"
        )

    h, g = full.h, full.g
    core = full.core_energy
    if frozen:
        f = np.array(frozen)
        core += 2.0 * h[f, f].sum()
        coul = g[f[:, None], f[:, None], f[None, :], f[None, :]]
        exch = g[f[:, None], f[None, :], f[None, :], f[:, None]]
        core += (2.0 * coul - exch).sum()
    a = np.array(active, dtype=int)
    h_act = h[np.ix_(a, a)].copy()
    for i in frozen:
        h_act += 2.0 * g[a[:, None], a[None, :], i, i] - g[a[:, None], i, i, a[None, :]]
    g_act = g[np.ix_(a, a, a, a)].copy()
    irreps = tuple(full.orbital_irreps[i] for i in active) if full.orbital_irreps else ()
    n_half = spec.n_active_electrons // 2
    return MolecularIntegrals(
        n_orbitals=len(active),
        n_alpha=n_half,
        n_beta=n_half,
        core_energy=float(core),
        h=h_act,
        g=g_act,
        orbital_irreps=irreps,
        point_group=full.point_group,
    )


@dataclass(frozen=True)
class OrbitalRecord:
    index: int
    irrep: str
    occupancy: int
    character: str
    energy_ev: float


_METADATA_CACHE: dict[str, list[OrbitalRecord]] = {}


def _load_metadata() -> dict[str, list[OrbitalRecord]]:
    if not _METADATA_CACHE:
        text = resources.files("forgeqse").joinpath("data/orbitals.tsv").read_text()
        rows = (line for line in text.splitlines() if line and not line.startswith("#"))
        for row in csv.DictReader(rows, delimiter="\t"):
            rec = OrbitalRecord(
                index=int(row["index"]),
                irrep=row["irrep"],
                occupancy=int(row["occupancy"]),
                character=row["character"],
                energy_ev=float(row["energy_ev"]),
            )
            _METADATA_CACHE.setdefault(row["molecule"], []).append(rec)
    return _METADATA_CACHE


def orbital_metadata_table(molecule: str) -> list[OrbitalRecord]:
    """Active-space orbital records for one of the bundled heterocycles."""
    table = _load_metadata()
    try:
        return list(table[molecule.lower()])
    except KeyError:
        raise LookupError(f"no orbital metadata for {molecule!r}; known: {sorted(table)}") from None


def irrep_label(orbital_label: str) -> str:
    """Map an orbital label such as ``b1`` to the state-level ``B1``."""
    label = orbital_label.upper()
    if label not in C2V_IRREPS:
        raise ValueError(f"unknown C2v label {orbital_label!r}")
    return label


def random_integrals(
    n_orbitals: int,
    n_electrons: int,
    orbital_irreps: tuple[str, ...] = (),
    seed: int | None = None,
    scale: float = 0.03,
) -> MolecularIntegrals:
    """Synthetic, symmetry-respecting integrals for testing.

    ``g`` is built as ``sum_k L_k (x) L_k`` with symmetric ``L_k`` so it carries
    the full 8-fold permutational symmetry and is positive semidefinite; each
    ``L_k`` belongs to one irrep so point-group selection rules hold.
    """
    from .operators import irrep_product

    rng = np.random.default_rng(seed)
    n = n_orbitals
    irreps = tuple(orbital_irreps) or ("A1",) * n
    pair_irrep = np.array([[irrep_product(irreps[p], irreps[q]) for q in range(n)] for p in range(n)])
    h = rng.normal(scale=scale, size=(n, n))
    h = 0.5 * (h + h.T)
    h[pair_irrep != "A1"] = 0.0
    n_occ = n_electrons // 2
    # occupied levels well below the virtual ones, as for a closed-shell molecule
    h[np.diag_indices(n)] = np.concatenate(
        [np.sort(rng.uniform(-1.5, -1.2, size=n_occ)), np.sort(rng.uniform(-0.9, -0.6, size=n - n_occ))]
    )
    # a smooth Coulomb-like part plus small symmetry-adapted fluctuations
    l0 = np.diag(np.sqrt(rng.uniform(0.4, 0.6, size=n)))
    g = np.einsum("pq,rs->pqrs", l0, l0)
    for gamma in sorted(set(pair_irrep.ravel())):
        mask = pair_irrep == gamma
        for _ in range(n):
            lk = rng.normal(scale=np.sqrt(scale), size=(n, n))
            lk = 0.5 * (lk + lk.T) * mask
            g += np.einsum("pq,rs->pqrs", lk, lk)
    return MolecularIntegrals(
        n_orbitals=n,
        n_alpha=n_electrons // 2,
        n_beta=n_electrons // 2,
        core_energy=float(rng.uniform(-5.0, 5.0)),
        h=h,
        g=g,
        orbital_irreps=tuple(orbital_irreps),
    )
