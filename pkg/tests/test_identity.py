import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negguide.identity import ContextPool, IdentityContext, NegativeStrategy, generate_contexts, select_negative


def pool_of(*vecs):
    return ContextPool.from_matrix(np.array(vecs, dtype=float))


class TestGenerate:
    def test_single(self):
        pool = generate_contexts(1, 4, seed=0)
        assert len(pool) == 1
        assert np.linalg.norm(pool[0].embedding) == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self):
        a, b = generate_contexts(20, 8, seed=5), generate_contexts(20, 8, seed=5)
        assert a.matrix.tobytes() == b.matrix.tobytes()
        assert a.ids == list(range(20))

    def test_unit_norm(self):
        m = generate_contexts(200, 16, seed=1).matrix
        np.testing.assert_allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-12)

    def test_sphere_uniformity(self):
        m = generate_contexts(1000, 64, seed=2).matrix
        sims = m @ m.T
        off = sims[np.triu_indices(1000, k=1)]
        # each pairwise cosine has variance 1/64; the mean over ~5e5 pairs is far inside 0.01
        assert abs(off.mean()) < 0.01

    @pytest.mark.parametrize("n,dim", [(0, 4), (3, 1)])
    def test_errors(self, n, dim):
        with pytest.raises(ValueError):
            generate_contexts(n, dim, seed=0)

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            IdentityContext(0, np.array([1.0, 1.0]))

    def test_duplicate_ids_rejected(self):
        e = np.array([1.0, 0.0])
        with pytest.raises(ValueError):
            ContextPool((IdentityContext(1, e), IdentityContext(1, e)), 2)


class TestSelectNegative:
    def test_antipodal(self):
        pool = pool_of([1, 0, 0], [0, 1, 0], [-1, 0, 0])
        assert select_negative(pool[0], pool, NegativeStrategy.far()).id == 2

    def test_only_candidate(self):
        pool = pool_of([1, 0], [0, 1])
        assert select_negative(pool[0], pool, NegativeStrategy.far()).id == 1
        assert select_negative(pool[0], pool, NegativeStrategy.random(3)).id == 1

    def test_tie_lowest_id(self):
        pool = pool_of([1, 0, 0], [0, 1, 0], [0, 0, 1])
        assert select_negative(pool[0], pool, NegativeStrategy.far()).id == 1

    def test_pool_too_small(self):
        pool = pool_of([1, 0])
        with pytest.raises(ValueError):
            select_negative(pool[0], pool, NegativeStrategy.far())

    def test_external_positive(self):
        pool = pool_of([1, 0], [0, 1], [-1, 0])
        pos = IdentityContext(99, np.array([0.0, -1.0]))
        assert select_negative(pos, pool, NegativeStrategy.far()).id == 1

    def test_far_matches_exhaustive_scan(self):
        pool = generate_contexts(100, 16, seed=11)
        for pos in pool.contexts[:20]:
            best_id, best = None, np.inf
            for c in pool.contexts:
                if c.id == pos.id:
                    continue
                sim = float(np.dot(c.embedding, pos.embedding)) / (np.linalg.norm(c.embedding) * np.linalg.norm(pos.embedding))
                if sim < best - 1e-15:
                    best_id, best = c.id, sim
            assert select_negative(pos, pool, NegativeStrategy.far()).id == best_id

    def test_random_deterministic(self):
        pool = generate_contexts(30, 8, seed=0)
        picks = [select_negative(pool[3], pool, NegativeStrategy.random(7)).id for _ in range(3)]
        assert len(set(picks)) == 1

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 2**31), st.sampled_from(["far", "random"]))
    def test_never_returns_positive(self, n, seed, kind):
        pool = generate_contexts(n, 5, seed=seed)
        strat = NegativeStrategy(kind, seed)
        for pos in pool.contexts:
            assert select_negative(pos, pool, strat).id != pos.id

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.01, 100))
    def test_far_invariant_to_score_rescaling(self, seed, scale):
        pool = generate_contexts(25, 6, seed=seed)
        pos = pool[0]
        others = [c for c in pool.contexts if c.id != pos.id]
        sims = np.array([c.embedding @ pos.embedding for c in others])
        chosen = select_negative(pos, pool, NegativeStrategy.far()).id
        assert others[int(np.argmin(scale * sims))].id == chosen
