"""Implicit-feedback ingestion, k-core filtering, and per-user splits.

Interactions are (user, item) pairs with an implicit positive label. Raw
ids are remapped to dense 0-based integers at load time; the mapping is
returned so pipelines can persist it next to the split files. All
operations are pure: they return new sets and never mutate their inputs.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

SPLIT_RATIOS = (0.6, 0.2, 0.2)
SPLIT_FILES = ("train.tsv", "val.tsv", "test.tsv")
ID_MAP_FILE = "id_map.json"

_EMPTY_ITEMS = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class InteractionSet:
    """Deduplicated (user, item) pairs over a fixed user/item universe.

    ``users`` and ``items`` are the universe (arrays of ids); every pair
    references ids from it. Pairs are kept sorted for determinism.
    """

    users: np.ndarray
    items: np.ndarray
    pairs: np.ndarray  # shape (n, 2), lexicographically sorted, unique
    _by_user: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_pairs(cls, pairs, users=None, items=None) -> "InteractionSet":
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        pairs = np.unique(pairs, axis=0) if len(pairs) else pairs
        if users is None:
            users = np.unique(pairs[:, 0]) if len(pairs) else _EMPTY_ITEMS
        if items is None:
            items = np.unique(pairs[:, 1]) if len(pairs) else _EMPTY_ITEMS
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if len(pairs):
            if not np.isin(pairs[:, 0], users).all():
                raise ValueError("pair references a user outside the universe")
            if not np.isin(pairs[:, 1], items).all():
                raise ValueError("pair references an item outside the universe")
        iset = cls(users=users, items=items, pairs=pairs)
        for arr in (iset.users, iset.items, iset.pairs):
            arr.setflags(write=False)
        return iset

    def __post_init__(self):
        by_user: dict[int, np.ndarray] = {}
        if len(self.pairs):
            cut = np.flatnonzero(np.diff(self.pairs[:, 0])) + 1
            for chunk in np.split(np.arange(len(self.pairs)), cut):
                u = int(self.pairs[chunk[0], 0])
                by_user[u] = self.pairs[chunk, 1]
        self._by_user.update(by_user)

    @property
    def n_interactions(self) -> int:
        return len(self.pairs)

    def items_of(self, user: int) -> np.ndarray:
        """Items this user interacted with (ascending), empty if none."""
        return self._by_user.get(int(user), _EMPTY_ITEMS)


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/val/test parts over one shared user/item universe."""

    train: InteractionSet
    val: InteractionSet
    test: InteractionSet
    seed: int

    @property
    def users(self) -> np.ndarray:
        return self.train.users

    @property
    def items(self) -> np.ndarray:
        return self.train.items


@dataclass(frozen=True)
class CandidateSet:
    """Items a user may still be recommended (never their train items)."""

    user: int
    items: np.ndarray

    def __len__(self) -> int:
        return len(self.items)


def load_interactions(path):
    """Read `user<TAB>item` lines into an InteractionSet with dense ids.

    Blank lines and lines starting with '#' are skipped; extra tab-separated
    fields after the first two are ignored; duplicates collapse to one pair.
    Returns (interactions, id_map) where id_map holds the original-id ->
    dense-index dictionaries for persisting alongside the outputs.
    """
    user_ids: dict[str, int] = {}
    item_ids: dict[str, int] = {}
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2 or not parts[0] or not parts[1]:
                raise ValueError(f"{path}: line {lineno}: expected 'user<TAB>item', got {line!r}")
            u = user_ids.setdefault(parts[0], len(user_ids))
            i = item_ids.setdefault(parts[1], len(item_ids))
            pairs.append((u, i))
    if not pairs:
        raise ValueError(f"{path}: no interactions found")
    iset = InteractionSet.from_pairs(
        pairs,
        users=np.arange(len(user_ids)),
        items=np.arange(len(item_ids)),
    )
    return iset, {"users": user_ids, "items": item_ids}


def kcore_filter(iset: InteractionSet, k: int) -> InteractionSet:
    """Iteratively drop users and items with fewer than k interactions.

    Runs to fixpoint; an empty result is valid and reported as a warning.
    Surviving ids keep their original values (see ``compact`` to re-densify).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pairs = iset.pairs
    while len(pairs):
        u_ids, u_deg = np.unique(pairs[:, 0], return_counts=True)
        i_ids, i_deg = np.unique(pairs[:, 1], return_counts=True)
        bad_u = u_ids[u_deg < k]
        bad_i = i_ids[i_deg < k]
        if not len(bad_u) and not len(bad_i):
            break
        keep = ~np.isin(pairs[:, 0], bad_u) & ~np.isin(pairs[:, 1], bad_i)
        pairs = pairs[keep]
    if not len(pairs):
        warnings.warn(f"{k}-core filtering removed every interaction", stacklevel=2)
        return InteractionSet.from_pairs(
            np.empty((0, 2), dtype=np.int64), users=_EMPTY_ITEMS, items=_EMPTY_ITEMS
        )
    return InteractionSet.from_pairs(pairs)


def compact(iset: InteractionSet):
    """Remap surviving ids to dense 0-based ranges.

    Returns (remapped set, user_index, item_index) where the index arrays
    give old id -> position, for composing with a load-time id map.
    """
    new_u = np.searchsorted(iset.users, iset.pairs[:, 0])
    new_i = np.searchsorted(iset.items, iset.pairs[:, 1])
    remapped = InteractionSet.from_pairs(
        np.stack([new_u, new_i], axis=1),
        users=np.arange(len(iset.users)),
        items=np.arange(len(iset.items)),
    )
    return remapped, iset.users.copy(), iset.items.copy()


def _largest_remainder(n: int, ratios) -> list[int]:
    exact = [r * n for r in ratios]
    base = [int(np.floor(e + 1e-9)) for e in exact]
    leftover = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda j: (-(exact[j] - base[j]), j))
    for j in order[:leftover]:
        base[j] += 1
    return base


def split(iset: InteractionSet, ratios=SPLIT_RATIOS, seed: int = 0) -> SplitDataset:
    """Partition each user's interactions into train/val/test.

    Sizes follow largest-remainder rounding of the ratios (ties toward the
    earlier part), so small users may leave val or test empty. The shuffle
    is seeded per user, making the split independent of iteration order.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if len(ratios) != 3:
        raise ValueError("exactly three ratios (train, val, test) are required")
    parts: list[list] = [[], [], []]
    for u in iset.users:
        items = iset.items_of(u)
        if not len(items):
            continue
        rng = np.random.default_rng([seed, int(u)])
        shuffled = items[rng.permutation(len(items))]
        sizes = _largest_remainder(len(items), ratios)
        offs = np.cumsum([0] + sizes)
        for part, lo, hi in zip(parts, offs[:-1], offs[1:]):
            part.extend((int(u), int(i)) for i in shuffled[lo:hi])
    sets = [
        InteractionSet.from_pairs(
            np.asarray(p, dtype=np.int64).reshape(-1, 2),
            users=iset.users,
            items=iset.items,
        )
        for p in parts
    ]
    return SplitDataset(train=sets[0], val=sets[1], test=sets[2], seed=seed)


def candidate_items(user: int, split_ds: SplitDataset, exclude_val: bool = False) -> CandidateSet:
    """All items outside the user's train set, ascending by id.

    With ``exclude_val`` the user's validation positives are removed too
    (the default at final-recommendation time, where they were calibration
    labels). An empty result is returned as-is; rankers treat it as
    degenerate.
    """
    if int(user) not in split_ds.users:
        raise KeyError(f"unknown user {user}")
    banned = split_ds.train.items_of(user)
    if exclude_val:
        banned = np.union1d(banned, split_ds.val.items_of(user))
    items = np.setdiff1d(split_ds.items, banned, assume_unique=True)
    return CandidateSet(user=int(user), items=items)


def save_split(split_ds: SplitDataset, workdir, id_map=None, header: str = "") -> None:
    """Write train/val/test TSVs plus the id-map JSON into ``workdir``."""
    from .util import atomic_write

    for name, part in zip(SPLIT_FILES, (split_ds.train, split_ds.val, split_ds.test)):
        lines = [header] if header else []
        lines.extend(f"{u}\t{i}" for u, i in part.pairs)
        atomic_write(workdir / name, "\n".join(lines) + "\n")
    mapping = {
        "users": (id_map or {}).get("users", {}),
        "items": (id_map or {}).get("items", {}),
        "seed": split_ds.seed,
    }
    atomic_write(workdir / ID_MAP_FILE, json.dumps(mapping, sort_keys=True, indent=1) + "\n")


def load_split(workdir) -> SplitDataset:
    """Re-read a directory produced by ``save_split``."""
    with open(workdir / ID_MAP_FILE, encoding="utf-8") as fh:
        mapping = json.load(fh)
    n_users = len(mapping["users"])
    n_items = len(mapping["items"])
    parts = []
    for name in SPLIT_FILES:
        pairs = []
        with open(workdir / name, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                u, i = line.split("\t")[:2]
                pairs.append((int(u), int(i)))
        parts.append(
            InteractionSet.from_pairs(
                np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
                users=np.arange(n_users),
                items=np.arange(n_items),
            )
        )
    return SplitDataset(train=parts[0], val=parts[1], test=parts[2], seed=int(mapping["seed"]))
