import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inferbudget.core import BudgetPrior, DegenerateGameError, ParameterError, rsa_grid
from inferbudget.rsa import (
    AgentMatrix,
    ReferenceGame,
    boltzmann_speaker,
    generate_game,
    generate_population,
    listener_step,
    literal_listener,
    literal_speaker,
    recursion_log_tables,
    rsa_sweep,
    speaker_step,
)

CANONICAL = np.array([[1.0, 1.0], [0.0, 1.0]])


def random_game(rng, u=3, t=3):
    lex = rng.uniform(0.05, 1.0, size=(u, t))
    prior = rng.dirichlet(np.ones(t))
    return ReferenceGame(lex, prior)


class TestGameInvariants:
    def test_zero_row_rejected(self):
        with pytest.raises(DegenerateGameError):
            ReferenceGame(np.array([[0.0, 0.0], [1.0, 1.0]]))

    def test_zero_column_rejected(self):
        with pytest.raises(DegenerateGameError):
            ReferenceGame(np.array([[1.0, 0.0], [1.0, 0.0]]))

    def test_bad_prior_rejected(self):
        with pytest.raises(DegenerateGameError):
            ReferenceGame(CANONICAL, np.array([0.7, 0.7]))


class TestLiteralAgents:
    def test_canonical_listener(self):
        L0 = literal_listener(ReferenceGame(CANONICAL))
        assert np.allclose(L0.probs, [[0.5, 0.5], [0.0, 1.0]], atol=1e-12)

    def test_uniform_lexicon_uniform_listener(self):
        L0 = literal_listener(ReferenceGame(np.ones((3, 3))))
        assert np.allclose(L0.probs, 1 / 3, atol=1e-15)

    def test_degenerate_game(self):
        L0 = literal_listener(ReferenceGame(np.array([[2.0]])))
        assert np.allclose(L0.probs, [[1.0]])


class TestSpeakerListenerSteps:
    def test_canonical_speaker(self):
        S1 = speaker_step(literal_listener(ReferenceGame(CANONICAL)))
        assert np.allclose(S1.probs, [[1.0, 0.0], [1 / 3, 2 / 3]], atol=1e-12)
        assert S1.level == 1

    def test_canonical_listener_level1(self):
        game = ReferenceGame(CANONICAL)
        L1 = listener_step(speaker_step(literal_listener(game)),
                           game.target_prior)
        assert np.allclose(L1.probs, [[0.75, 0.25], [0.0, 1.0]], atol=1e-12)

    def test_uniform_fixed_points(self):
        game = ReferenceGame(np.ones((3, 3)))
        S1 = speaker_step(literal_listener(game))
        assert np.allclose(S1.probs, 1 / 3, atol=1e-15)
        L1 = listener_step(AgentMatrix("speaker", 1, np.full((3, 3), 1 / 3)),
                           np.array([0.2, 0.3, 0.5]))
        assert np.allclose(L1.probs, [[0.2, 0.3, 0.5]] * 3, atol=1e-14)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            game = random_game(rng)
            sweep = rsa_sweep(game, None, rsa_grid(3))
            for m in sweep.speakers + sweep.listeners:
                assert np.max(np.abs(m.probs.sum(axis=1) - 1.0)) < 1e-12

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        game = random_game(rng)
        pu = rng.permutation(3)
        pt = rng.permutation(3)
        permuted = ReferenceGame(game.lexicon[pu][:, pt], game.target_prior[pt])
        for level in (0, 1, 2, 3):
            a = rsa_sweep(game, None, rsa_grid(3)).speakers[level].probs
            b = rsa_sweep(permuted, None, rsa_grid(3)).speakers[level].probs
            assert np.allclose(a[pt][:, pu], b, atol=1e-12)


class TestRsaSweep:
    def test_level1_matches_composition(self):
        rng = np.random.default_rng(1)
        game = random_game(rng)
        sweep = rsa_sweep(game, None, rsa_grid(1))
        direct = speaker_step(literal_listener(game))
        assert np.allclose(sweep.speakers[1].probs, direct.probs, atol=1e-15)

    def test_anytime_normalization_count(self):
        rng = np.random.default_rng(2)
        game = random_game(rng)
        sweep = rsa_sweep(game, None, rsa_grid(3))
        assert sweep.normalizations == 3  # max(grid), not sum(grid)

    def test_level3_matches_manual_iterations(self):
        rng = np.random.default_rng(3)
        game = random_game(rng)
        listener = literal_listener(game)
        speakers = [literal_speaker(game)]
        for _ in range(3):
            s = speaker_step(listener)
            listener = listener_step(s, game.target_prior)
            speakers.append(s)
        sweep = rsa_sweep(game, None, rsa_grid(3))
        for k in range(4):
            assert np.allclose(sweep.speakers[k].probs, speakers[k].probs,
                               atol=1e-15)


class TestBoltzmannSpeaker:
    def test_identity_at_temp_one(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            game = random_game(rng)
            L0 = literal_listener(game)
            assert np.allclose(boltzmann_speaker(L0, 1.0).probs,
                               speaker_step(L0).probs, atol=1e-12)

    def test_argmax_limit(self):
        L0 = literal_listener(ReferenceGame(CANONICAL))
        S = boltzmann_speaker(L0, 200.0)
        assert S.probs[1, 1] == pytest.approx(1.0, abs=1e-12)

    def test_scalar_evaluation_temp_two(self):
        L0 = literal_listener(ReferenceGame(CANONICAL))
        S = boltzmann_speaker(L0, 2.0)
        assert np.allclose(S.probs[1], [0.2, 0.8], atol=1e-12)

    def test_temp_zero_uniform(self):
        L0 = literal_listener(ReferenceGame(CANONICAL))
        S = boltzmann_speaker(L0, 0.0)
        assert np.allclose(S.probs, 0.5, atol=1e-15)

    def test_negative_temp_rejected(self):
        L0 = literal_listener(ReferenceGame(CANONICAL))
        with pytest.raises(ParameterError):
            boltzmann_speaker(L0, -1.0)


class TestLogTables:
    def test_tables_match_linear_recursion(self):
        rng = np.random.default_rng(5)
        game = random_game(rng)
        with np.errstate(divide="ignore"):
            M = np.log(game.lexicon)
            logp = np.log(game.target_prior)
        speak, listen = recursion_log_tables(M, logp, 3)
        sweep = rsa_sweep(game, None, rsa_grid(3))
        for k in range(4):
            assert np.allclose(np.exp(speak[k]), sweep.speakers[k].probs,
                               atol=1e-12)
            assert np.allclose(np.exp(listen[k]), sweep.listeners[k].probs,
                               atol=1e-12)


class TestGeneratePopulation:
    def grid(self):
        return rsa_grid(3)

    def priors(self):
        return [BudgetPrior(np.log(np.clip([1, 0, 0, 0], 1e-30, None)), 0)]

    def test_determinism(self):
        g1, r1 = generate_population(11, 5, 1, self.priors(), 100, self.grid())
        g2, r2 = generate_population(11, 5, 1, self.priors(), 100, self.grid())
        assert all(np.array_equal(a.lexicon, b.lexicon) for a, b in zip(g1, g2))
        assert r1 == r2

    def test_empty(self):
        games, rounds = generate_population(11, 0, 1, self.priors(), 100,
                                            self.grid())
        assert games == [] and rounds == []

    def test_literal_point_mass_frequencies(self):
        # chi-square sanity: empirical utterance counts vs the literal speaker
        games, rounds = generate_population(13, 1, 1, self.priors(), 10_000,
                                            self.grid())
        S0 = literal_speaker(games[0]).probs
        counts = np.zeros_like(S0)
        tcounts = np.zeros(games[0].n_targets)
        for r in rounds:
            counts[r.target_index, r.utterance_index] += 1
            tcounts[r.target_index] += 1
        chi2 = 0.0
        dof = 0
        for t in range(games[0].n_targets):
            exp = S0[t] * tcounts[t]
            mask = exp > 5
            chi2 += float(np.sum((counts[t, mask] - exp[mask]) ** 2 / exp[mask]))
            dof += int(mask.sum()) - 1
        # generous bound: mean chi2 is dof, sd ~ sqrt(2 dof)
        assert chi2 < dof + 6 * np.sqrt(2 * dof)
