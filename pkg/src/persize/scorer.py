"""Ranking scores: a minimal pairwise matrix-factorization trainer plus an
importer/exporter so scores from any external recommender can be used.

The built-in model learns user/item embeddings by stochastic gradient
descent on the pairwise objective -log sigmoid(f(u, i+) - f(u, i-)) with
uniformly sampled negatives. Training is sequential and seeded, so a given
configuration always produces the same model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CandidateSet, InteractionSet

_HEADER_DTYPE = np.dtype("<i8")


class DegenerateUserError(ValueError):
    """User has no rankable candidates (or no scored entries)."""


@dataclass(frozen=True)
class BPRConfig:
    d: int = 64
    epochs: int = 50
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    negatives_per_positive: int = 1
    seed: int = 0


@dataclass(frozen=True)
class ScoreModel:
    """Dot-product scorer: score(u, i) = user_vectors[u] @ item_vectors[i]."""

    user_vectors: np.ndarray
    item_vectors: np.ndarray
    epoch_losses: tuple = ()

    @property
    def d(self) -> int:
        return self.user_vectors.shape[1]


@dataclass(frozen=True)
class RankedList:
    """Top items of one user, scores non-increasing, ties by ascending id."""

    user: int
    items: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.items)


class ScoreTable:
    """Per-user (item, score) entries covering each user's candidate set."""

    def __init__(self, entries: dict):
        self._entries = {}
        for user, (items, scores) in entries.items():
            items = np.asarray(items, dtype=np.int64)
            scores = np.asarray(scores, dtype=np.float64)
            if len(items) != len(scores):
                raise ValueError(f"user {user}: items and scores differ in length")
            if len(np.unique(items)) != len(items):
                raise ValueError(f"user {user}: duplicate item ids")
            if not np.all(np.isfinite(scores)):
                raise ValueError(f"user {user}: non-finite score")
            self._entries[int(user)] = (items, scores)

    def users(self):
        return sorted(self._entries)

    def get(self, user: int):
        try:
            return self._entries[int(user)]
        except KeyError:
            raise KeyError(f"no scores for user {user}") from None

    def __contains__(self, user) -> bool:
        return int(user) in self._entries

    def __len__(self) -> int:
        return len(self._entries)


def train_bpr(train: InteractionSet, config: BPRConfig = BPRConfig()) -> ScoreModel:
    """Fit embeddings on the pairwise ranking objective.

    One SGD step per (positive, sampled negative) pair, in a seeded shuffle
    each epoch. Negatives are drawn uniformly from the items the user never
    interacted with in ``train``. Raises if the loss goes non-finite.
    """
    if train.n_interactions == 0:
        raise ValueError("cannot train on an empty interaction set")
    if config.d < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {config.d}")
    n_users = len(train.users)
    n_items = len(train.items)
    if train.pairs[:, 0].max() >= n_users or train.pairs[:, 1].max() >= n_items:
        raise ValueError("train_bpr expects dense 0-based ids (see dataset.compact)")

    rng = np.random.default_rng(config.seed)
    u_vecs = rng.uniform(-0.01, 0.01, size=(n_users, config.d))
    i_vecs = rng.uniform(-0.01, 0.01, size=(n_items, config.d))
    pos_user = train.pairs[:, 0]
    pos_item = train.pairs[:, 1]
    pos_sets = {int(u): set(train.items_of(u).tolist()) for u in np.unique(pos_user)}

    lr = config.learning_rate
    wd = config.weight_decay
    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(len(pos_user))
        epoch_loss = 0.0
        steps = 0
        for idx in order:
            u = int(pos_user[idx])
            i = int(pos_item[idx])
            owned = pos_sets[u]
            if len(owned) >= n_items:
                continue  # no negatives exist for this user
            for _ in range(config.negatives_per_positive):
                j = int(rng.integers(n_items))
                while j in owned:
                    j = int(rng.integers(n_items))
                uv = u_vecs[u]
                diff = i_vecs[i] - i_vecs[j]
                x = float(uv @ diff)
                # d/dx of -log sigmoid(x) is -sigmoid(-x)
                g = 1.0 / (1.0 + np.exp(min(x, 500.0)))
                u_vecs[u] = uv + lr * (g * diff - wd * uv)
                i_vecs[i] += lr * (g * uv - wd * i_vecs[i])
                i_vecs[j] += lr * (-g * uv - wd * i_vecs[j])
                epoch_loss += np.logaddexp(0.0, -x)
                steps += 1
        mean_loss = epoch_loss / max(steps, 1)
        if not np.isfinite(mean_loss):
            raise RuntimeError(
                f"ranking loss became non-finite at epoch {len(losses) + 1} "
                f"(lr={lr}, wd={wd}); lower the learning rate"
            )
        losses.append(float(mean_loss))
    return ScoreModel(user_vectors=u_vecs, item_vectors=i_vecs, epoch_losses=tuple(losses))


def score(model: ScoreModel, user: int, item: int) -> float:
    """Inner product of one user/item embedding pair."""
    if not 0 <= user < len(model.user_vectors):
        raise IndexError(f"user id {user} out of range")
    if not 0 <= item < len(model.item_vectors):
        raise IndexError(f"item id {item} out of range")
    return float(model.user_vectors[user] @ model.item_vectors[item])


def score_candidates(model: ScoreModel, user: int, items) -> np.ndarray:
    """Scores for a batch of items of one user.

    Computed item by item with the same dot product as ``score`` so that
    exported tables match single lookups bit for bit (BLAS matrix-vector
    kernels round differently).
    """
    if not 0 <= user < len(model.user_vectors):
        raise IndexError(f"user id {user} out of range")
    items = np.asarray(items, dtype=np.int64)
    uv = model.user_vectors[user]
    iv = model.item_vectors
    return np.array([uv @ iv[i] for i in items], dtype=np.float64)


def build_score_table(model: ScoreModel, candidate_sets) -> ScoreTable:
    """Score each user's candidate items into one table."""
    entries = {}
    for cand in candidate_sets:
        entries[cand.user] = (cand.items, score_candidates(model, cand.user, cand.items))
    return ScoreTable(entries)


def rank_topk(scores: ScoreTable, user: int, candidates: CandidateSet, K: int) -> RankedList:
    """Top-min(K, |candidates|) items by descending score, ties by item id."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if len(candidates) == 0:
        raise DegenerateUserError(f"user {user} has no candidate items")
    items, vals = scores.get(user)
    pos = {int(i): ix for ix, i in enumerate(items)}
    try:
        take = np.array([pos[int(i)] for i in candidates.items], dtype=np.int64)
    except KeyError as exc:
        raise KeyError(f"user {user}: candidate item {exc.args[0]} has no score") from None
    cand_items = items[take]
    cand_scores = vals[take]
    order = np.lexsort((cand_items, -cand_scores))[:K]
    return RankedList(user=int(user), items=cand_items[order], scores=cand_scores[order])


def export_scores(table: ScoreTable, path, header: str = "") -> None:
    """Write `user<TAB>item<TAB>score` rows; floats round-trip exactly."""
    from .util import atomic_write

    lines = [header] if header else []
    for user in table.users():
        items, vals = table.get(user)
        lines.extend(f"{user}\t{i}\t{float(v)!r}" for i, v in zip(items, vals))
    atomic_write(path, "\n".join(lines) + "\n")


def import_scores(path) -> ScoreTable:
    """Read a score file written by ``export_scores`` (or any recommender).

    Rejects non-finite scores and duplicate (user, item) rows, naming the
    offending line.
    """
    per_user_items: dict[int, list] = {}
    per_user_scores: dict[int, list] = {}
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise ValueError(f"{path}: line {lineno}: expected 'user<TAB>item<TAB>score'")
            try:
                u, i, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {line!r}") from None
            if not np.isfinite(v):
                raise ValueError(f"{path}: line {lineno}: non-finite score for ({u}, {i})")
            if (u, i) in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate entry for ({u}, {i})")
            seen.add((u, i))
            per_user_items.setdefault(u, []).append(i)
            per_user_scores.setdefault(u, []).append(v)
    return ScoreTable(
        {u: (per_user_items[u], per_user_scores[u]) for u in per_user_items}
    )


def save_model(model: ScoreModel, path) -> None:
    """Flat binary checkpoint: int64 (n_users, n_items, d) header, then the
    two float64 matrices row-major."""
    header = np.array(
        [len(model.user_vectors), len(model.item_vectors), model.d], dtype=_HEADER_DTYPE
    )
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(model.user_vectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.item_vectors, dtype="<f8").tobytes())


def load_model(path) -> ScoreModel:
    with open(path, "rb") as fh:
        header = np.frombuffer(fh.read(24), dtype=_HEADER_DTYPE)
        n_users, n_items, d = (int(x) for x in header)
        u = np.frombuffer(fh.read(n_users * d * 8), dtype="<f8").reshape(n_users, d)
        i = np.frombuffer(fh.read(n_items * d * 8), dtype="<f8").reshape(n_items, d)
    return ScoreModel(user_vectors=u.copy(), item_vectors=i.copy())
