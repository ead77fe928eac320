import numpy as np
import pytest

from persize.dataset import (
    InteractionSet,
    candidate_items,
    compact,
    kcore_filter,
    load_interactions,
    load_split,
    save_split,
    split,
)


def _write(tmp_path, text, name="data.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoad:
    def test_basic_read(self, tmp_path):
        path = _write(tmp_path, "a\tx\na\ty\nb\tx\n")
        iset, id_map = load_interactions(path)
        assert len(iset.users) == 2
        assert len(iset.items) == 2
        assert iset.n_interactions == 3
        assert id_map["users"] == {"a": 0, "b": 1}

    def test_duplicates_collapse(self, tmp_path):
        path = _write(tmp_path, "a\tx\na\tx\n")
        iset, _ = load_interactions(path)
        assert iset.n_interactions == 1

    def test_malformed_line_names_lineno(self, tmp_path):
        path = _write(tmp_path, "a\tx\na\n")
        with pytest.raises(ValueError, match="line 2"):
            load_interactions(path)

    def test_empty_file_rejected(self, tmp_path):
        path = _write(tmp_path, "")
        with pytest.raises(ValueError, match="no interactions"):
            load_interactions(path)

    def test_extra_fields_ignored_and_comments_skipped(self, tmp_path):
        path = _write(tmp_path, "# header\na\tx\t123\textra\n\nb\ty\n")
        iset, _ = load_interactions(path)
        assert iset.n_interactions == 2


class TestKcore:
    def test_k1_is_identity(self):
        iset = InteractionSet.from_pairs([[0, 0], [0, 1], [1, 0]])
        out = kcore_filter(iset, 1)
        np.testing.assert_array_equal(out.pairs, iset.pairs)

    def test_star_graph_collapses(self):
        # one user, five items each seen once: 2-core starves everything
        pairs = [[0, i] for i in range(5)]
        with pytest.warns(UserWarning):
            out = kcore_filter(InteractionSet.from_pairs(pairs), 2)
        assert out.n_interactions == 0

    def test_complete_bipartite_unchanged(self):
        pairs = [[u, i] for u in range(20) for i in range(20)]
        out = kcore_filter(InteractionSet.from_pairs(pairs), 20)
        assert out.n_interactions == 400

    def test_fixpoint_degrees(self):
        rng = np.random.default_rng(0)
        pairs = np.unique(rng.integers(0, 30, size=(400, 2)), axis=0)
        out = kcore_filter(InteractionSet.from_pairs(pairs), 5)
        if out.n_interactions:
            _, u_deg = np.unique(out.pairs[:, 0], return_counts=True)
            _, i_deg = np.unique(out.pairs[:, 1], return_counts=True)
            assert u_deg.min() >= 5
            assert i_deg.min() >= 5

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            kcore_filter(InteractionSet.from_pairs([[0, 0]]), 0)


class TestSplit:
    def _user_with(self, n):
        pairs = [[0, i] for i in range(n)]
        return InteractionSet.from_pairs(pairs, users=[0], items=list(range(n)))

    def test_ten_interactions_split_622(self):
        sp = split(self._user_with(10), seed=1)
        assert len(sp.train.items_of(0)) == 6
        assert len(sp.val.items_of(0)) == 2
        assert len(sp.test.items_of(0)) == 2

    def test_five_interactions_split_311(self):
        sp = split(self._user_with(5), seed=1)
        sizes = tuple(len(part.items_of(0)) for part in (sp.train, sp.val, sp.test))
        assert sizes == (3, 1, 1)

    def test_tiny_users_get_empty_parts_not_errors(self):
        sp = split(self._user_with(1), seed=1)
        assert len(sp.train.items_of(0)) == 1
        assert len(sp.val.items_of(0)) == 0
        assert len(sp.test.items_of(0)) == 0

    def test_partition_property(self):
        rng = np.random.default_rng(2)
        pairs = []
        for u in range(15):
            items = rng.choice(40, size=int(rng.integers(1, 20)), replace=False)
            pairs.extend([u, int(i)] for i in items)
        iset = InteractionSet.from_pairs(pairs, users=np.arange(15), items=np.arange(40))
        sp = split(iset, seed=9)
        for u in range(15):
            tr = set(sp.train.items_of(u).tolist())
            va = set(sp.val.items_of(u).tolist())
            te = set(sp.test.items_of(u).tolist())
            assert not (tr & va) and not (tr & te) and not (va & te)
            assert tr | va | te == set(iset.items_of(u).tolist())
            assert len(tr) >= 1

    def test_determinism(self):
        iset = InteractionSet.from_pairs([[u, i] for u in range(5) for i in range(7)])
        a = split(iset, seed=42)
        b = split(iset, seed=42)
        for pa, pb in zip((a.train, a.val, a.test), (b.train, b.val, b.test)):
            np.testing.assert_array_equal(pa.pairs, pb.pairs)
        c = split(iset, seed=43)
        assert any(
            not np.array_equal(pa.pairs, pc.pairs)
            for pa, pc in zip((a.train, a.val, a.test), (c.train, c.val, c.test))
        )

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split(self._user_with(4), ratios=(0.5, 0.2, 0.2))
        with pytest.raises(ValueError):
            split(self._user_with(4), ratios=(0.5, 0.5))


class TestCandidates:
    def _split(self):
        users, items = np.arange(1), np.arange(5)
        train = InteractionSet.from_pairs([[0, 0], [0, 1]], users, items)
        val = InteractionSet.from_pairs([[0, 2]], users, items)
        test = InteractionSet.from_pairs([[0, 3]], users, items)
        from persize.dataset import SplitDataset

        return SplitDataset(train=train, val=val, test=test, seed=0)

    def test_excludes_train(self):
        cand = candidate_items(0, self._split())
        np.testing.assert_array_equal(cand.items, [2, 3, 4])

    def test_exclude_val_flag(self):
        cand = candidate_items(0, self._split(), exclude_val=True)
        np.testing.assert_array_equal(cand.items, [3, 4])

    def test_union_with_train_covers_everything(self):
        sp = self._split()
        cand = candidate_items(0, sp)
        both = np.concatenate([sp.train.items_of(0), cand.items])
        np.testing.assert_array_equal(np.sort(both), np.arange(5))

    def test_unknown_user(self):
        with pytest.raises(KeyError):
            candidate_items(7, self._split())

    def test_user_owning_everything_gets_empty_set(self):
        users, items = np.arange(1), np.arange(2)
        from persize.dataset import SplitDataset

        train = InteractionSet.from_pairs([[0, 0], [0, 1]], users, items)
        empty = InteractionSet.from_pairs(np.empty((0, 2), dtype=np.int64), users, items)
        sp = SplitDataset(train=train, val=empty, test=empty, seed=0)
        assert len(candidate_items(0, sp)) == 0


class TestCompactAndRoundTrip:
    def test_compact_densifies(self):
        iset = InteractionSet.from_pairs([[3, 10], [3, 20], [9, 10], [9, 20]])
        dense, old_users, old_items = compact(iset)
        np.testing.assert_array_equal(dense.users, [0, 1])
        np.testing.assert_array_equal(old_users, [3, 9])
        np.testing.assert_array_equal(dense.items_of(0), [0, 1])

    def test_save_load_round_trip(self, tmp_path):
        iset = InteractionSet.from_pairs(
            [[u, i] for u in range(4) for i in range(u + 3)],
            users=np.arange(4),
            items=np.arange(7),
        )
        sp = split(iset, seed=5)
        id_map = {
            "users": {f"u{u}": u for u in range(4)},
            "items": {f"i{i}": i for i in range(7)},
        }
        save_split(sp, tmp_path, id_map, header="# cfg")
        back = load_split(tmp_path)
        assert back.seed == 5
        for pa, pb in zip((sp.train, sp.val, sp.test), (back.train, back.val, back.test)):
            np.testing.assert_array_equal(pa.pairs, pb.pairs)

    def test_twenty_core_on_bundled(self, bundled_split):
        # every bundled user keeps enough data for calibration and testing
        for u in bundled_split.users:
            assert len(bundled_split.train.items_of(u)) >= 1
            assert len(bundled_split.val.items_of(u)) >= 1
            assert len(bundled_split.test.items_of(u)) >= 1
