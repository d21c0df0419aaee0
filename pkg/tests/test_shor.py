"""Pipeline stages: modexp layouts, plateau detection, measurement, LNN QFT."""

import numpy as np
import pytest
from _helpers import mps_as_canonical_dense, rank_oracle_for_bond

from shormps import oracle, shor
from shormps.mps import LOWER_REGISTER, MpsState
from shormps.numtheory import SemiprimeInstance, multiplicative_order, two_adic_split


def fresh(n, a, l=None):
    return SemiprimeInstance.make(n, a, l=l)


def run_layout(instance, layout, max_elements=1 << 30):
    state, lower = shor.build_initial(instance)
    cfg = shor.PipelineConfig(layout=layout, max_elements=max_elements)
    alpha_hat = shor.run_modexp(state, lower, instance, cfg)
    return state, lower, alpha_hat


class TestGates:
    def test_phase_gate_action(self):
        state = MpsState.product_state((2,), (1,), complex_mode=True)
        state.apply_single_qudit_gate(0, shor.phase_gate(1))
        np.testing.assert_allclose(
            state.to_state_vector(), [0, np.exp(-1j * np.pi / 2)], atol=1e-15
        )

    def test_fused_gate_is_cphase_then_swap(self):
        fused = shor.fused_cphase_swap(2)
        seq = shor.swap_gate(True) @ shor.controlled_phase(2)
        np.testing.assert_array_equal(fused, seq)
        # acts like controlled phase up to qubit relabeling
        amp = fused @ np.array([0, 0, 0, 1], dtype=complex)
        assert amp[3] == pytest.approx(np.exp(-1j * np.pi / 4))


class TestBuildInitial:
    def test_single_unit_site(self):
        state, lower = shor.build_initial(fresh(21, 2))
        assert state.n_sites == 1 and state.dims == (1,)
        assert lower.residues == [1]
        assert state.elements_live == 1
        assert state.to_state_vector() == pytest.approx([1.0])


class TestControlledModexp:
    def test_first_gate_i0(self):
        inst = fresh(21, 2)
        state, lower = shor.build_initial(inst)
        shor.apply_controlled_modexp(state, lower, inst, 0, "B")
        assert lower.residues == [1, 2]
        assert state.bond_dims() == (2,)
        assert state.labels == [0, LOWER_REGISTER]

    def test_first_gate_i9_multiplier(self):
        inst = fresh(21, 2)
        state, lower = shor.build_initial(inst)
        shor.apply_controlled_modexp(state, lower, inst, 9, "B")
        # 2^512 mod 21 = 4
        assert lower.residues == [1, 4]

    def test_identity_multiplier_keeps_rank(self):
        inst = fresh(15, 14)  # 14^2 = 1 mod 15, so any i >= 1 multiplies by 1
        state, lower = shor.build_initial(inst)
        shor.apply_controlled_modexp(state, lower, inst, 3, "B")
        assert lower.residues == [1]
        assert state.bond_dims() == (1,)

    def test_element_guard(self):
        inst = fresh(21, 2)
        state, lower = shor.build_initial(inst)
        with pytest.raises(shor.MemoryLimitError) as err:
            shor.apply_controlled_modexp(state, lower, inst, 9, "B", max_elements=5)
        assert err.value.stage == "modexp"


class TestStaticModexp:
    def test_n21_structure(self):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "static")
        assert lower.dim == 6
        assert state.labels == [9, 8, 7, 6, 5, 4, 3, 2, 1, 0, LOWER_REGISTER]
        dims = state.bond_dims()
        assert dims[-1] == 6  # innermost bond carries the full order
        assert all(x <= y for x, y in zip(dims, dims[1:]))  # nondecreasing toward R

    def test_n15_a7_rank_is_order(self):
        state, lower, _ = run_layout(fresh(15, 7), "static")
        assert lower.dim == 4 and state.bond_dims()[-1] == 4

    def test_matches_dense_oracle(self):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "static")
        got = mps_as_canonical_dense(state, lower, inst)
        want, _ = oracle.dense_modexp_state(inst)
        np.testing.assert_allclose(got.amps, want.amps, atol=1e-10)

    def test_every_bond_matches_residue_oracle(self):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "static")
        for bond, rank in enumerate(state.schmidt_ranks("modexp").ranks):
            assert rank == rank_oracle_for_bond(state, inst, bond)


class TestDynamicModexp:
    def test_n21_structure(self):
        inst = fresh(21, 2)
        state, lower, alpha_hat = run_layout(inst, "dynamic")
        assert alpha_hat == 1
        assert lower.dim == 6
        rpos = state.position_of(LOWER_REGISTER)
        assert rpos == state.n_sites - 2  # single right-side qubit
        assert state.labels[rpos + 1] == 0
        assert state.bond_dims()[rpos - 1] == 3  # left-block bond to R
        assert state.bond_dims()[rpos] == 2  # right-block bond

    def test_n15_a14_all_identity_left(self):
        state, lower, alpha_hat = run_layout(fresh(15, 14), "dynamic")
        assert alpha_hat == 1
        assert lower.dim == 2
        assert state.labels[state.position_of(LOWER_REGISTER) + 1] == 0

    def test_n15_a2_two_right_qubits(self):
        state, lower, alpha_hat = run_layout(fresh(15, 2), "dynamic")
        assert alpha_hat == 2 and lower.dim == 4
        rpos = state.position_of(LOWER_REGISTER)
        assert sorted(state.labels[rpos + 1 :]) == [0, 1]
        assert state.bond_dims()[rpos] == 4 and state.bond_dims()[rpos + 1] == 2

    def test_matches_dense_oracle(self):
        for n, a in [(21, 2), (15, 7), (15, 2)]:
            inst = fresh(n, a)
            state, lower, _ = run_layout(inst, "dynamic")
            got = mps_as_canonical_dense(state, lower, inst)
            want, _ = oracle.dense_modexp_state(inst)
            np.testing.assert_allclose(got.amps, want.amps, atol=1e-10)

    def test_every_bond_matches_residue_oracle(self):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "dynamic")
        for bond, rank in enumerate(state.schmidt_ranks("modexp").ranks):
            assert rank == rank_oracle_for_bond(state, inst, bond)

    def test_alpha_hat_equals_true_two_adic_exponent(self):
        for n, a in [(21, 2), (15, 7), (15, 2), (15, 14), (21, 5), (247, 2)]:
            inst = fresh(n, a)
            _, _, alpha_hat = run_layout(inst, "dynamic")
            r = multiplicative_order(a, n)
            assert alpha_hat == two_adic_split(r)[0], (n, a)


class TestMeasureLowerRegister:
    def test_probabilities_exact(self):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "dynamic")
        rpos = state.position_of(LOWER_REGISTER)
        state.sweep("right", range(rpos))
        rho = state.reduced_density_local(rpos)
        probs = np.real(np.diag(rho))
        big_q = 1 << (2 * inst.l)
        for idx, residue in enumerate(lower.residues):
            j = oracle.residue_orbit(21, 2).index(residue)
            expected = ((big_q - 1 - j) // 6 + 1) / big_q
            assert probs[idx] == pytest.approx(expected, abs=1e-10)

    def test_dynamic_post_measurement_structure(self, rng):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "dynamic")
        residue = shor.measure_lower_register(state, lower, rng, layout="dynamic")
        assert residue in {1, 2, 4, 8, 16, 11}
        assert LOWER_REGISTER not in state.labels
        ranks = state.schmidt_ranks("after-measure").ranks
        assert max(ranks) == 3  # odd part of the order
        assert ranks[-1] == 1  # right-block qubit fully separable

    def test_static_measurement_agrees(self, rng):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "static")
        residue = shor.measure_lower_register(state, lower, rng, layout="static")
        assert residue in {1, 2, 4, 8, 16, 11}
        assert max(state.schmidt_ranks("after-measure").ranks) == 3

    def test_forced_residue(self, rng):
        inst = fresh(21, 2)
        state, lower, _ = run_layout(inst, "dynamic")
        residue = shor.measure_lower_register(
            state, lower, rng, layout="dynamic", forced_residue=11
        )
        assert residue == 11


class TestLnnQft:
    def test_requires_complex_mode(self, rng):
        state = MpsState.product_state((2, 2), (0, 0), labels=[1, 0])
        with pytest.raises(shor.PipelineStateError):
            shor.apply_lnn_qft(state, rng)

    def test_zero_register_fully_separable(self, rng):
        state = MpsState.product_state((2,) * 4, (0,) * 4, labels=[3, 2, 1, 0],
                                       complex_mode=True)
        bits = shor.apply_lnn_qft(state, rng)
        assert len(bits) == 4 and set(bits) <= {0, 1}
        assert state.n_sites == 1 and state.bond_dims() == ()

    def test_two_qubit_plus_zero(self, rng):
        # upper state |00> + |10>: the transform supports s in {0, 2} only
        seen = set()
        for _ in range(40):
            state = MpsState.product_state((2, 2), (0, 0), labels=[1, 0],
                                           complex_mode=True)
            state.apply_single_qudit_gate(0, shor.hadamard(True))
            bits = shor.apply_lnn_qft(state, rng)
            s = shor.assemble_s(bits, 1)
            assert s in (0, 2)
            seen.add(s)
        assert seen == {0, 2}

    def test_forced_bits(self):
        state = MpsState.product_state((2,) * 4, (0,) * 4, labels=[3, 2, 1, 0],
                                       complex_mode=True)
        bits = shor.apply_lnn_qft(state, forced_bits=[1, 0, 1, 1])
        assert bits == [1, 0, 1, 1]


class TestAssembleS:
    def test_all_zero(self):
        assert shor.assemble_s([0] * 10, 5) == 0

    def test_all_one(self):
        assert shor.assemble_s([1] * 10, 5) == 2**10 - 1

    def test_first_bit_least_significant(self):
        assert shor.assemble_s([1, 0, 0, 0], 2) == 1
        assert shor.assemble_s([0, 0, 0, 1], 2) == 8

    def test_wrong_count(self):
        with pytest.raises(ValueError):
            shor.assemble_s([0, 1], 5)


class TestSampleRun:
    def test_record_fields_n21(self):
        inst = fresh(21, 2)
        cfg = shor.PipelineConfig(layout="dynamic")
        rec = shor.sample_run(inst, cfg, np.random.default_rng(7))
        assert rec.n == 21 and rec.a == 2 and rec.l == 5
        assert rec.alpha_hat == 1
        assert rec.measured_residue in {1, 2, 4, 8, 16, 11}
        assert 0 <= rec.measured_s < 1024
        assert rec.verified_r in (None, 6)
        if rec.factors is not None:
            assert rec.factors == (3, 7)
        assert {"build", "modexp", "measure", "qft"} <= set(rec.peak_elements)
        assert [p.stage for p in rec.rank_profiles] == ["modexp", "measure", "qft"]

    def test_factor_recovery_rate(self):
        inst = fresh(21, 2)
        cfg = shor.PipelineConfig(layout="dynamic", collect_profiles=False)
        wins = sum(
            shor.sample_run(inst, cfg, np.random.default_rng(1000 + k)).factors
            == (3, 7)
            for k in range(20)
        )
        assert wins >= 3

    def test_comb_instance_s_support(self):
        inst = fresh(15, 7)  # order 4 divides 2^(2l): exact four-peak comb
        cfg = shor.PipelineConfig(layout="dynamic", collect_profiles=False)
        for k in range(60):
            rec = shor.sample_run(inst, cfg, np.random.default_rng(k))
            assert rec.measured_s in (0, 256, 512, 768)

    def test_static_layout_end_to_end(self):
        inst = fresh(15, 7)
        cfg = shor.PipelineConfig(layout="static", collect_profiles=False)
        for k in range(20):
            rec = shor.sample_run(inst, cfg, np.random.default_rng(k))
            assert rec.layout == "static" and rec.alpha_hat is None
            assert rec.measured_s in (0, 256, 512, 768)

    def test_memory_limit_surfaces(self):
        inst = fresh(21, 2)
        cfg = shor.PipelineConfig(layout="dynamic", max_elements=10, retries=0)
        with pytest.raises(shor.MemoryLimitError):
            shor.sample_run(inst, cfg, np.random.default_rng(0))

    def test_retries_redraw_base(self):
        inst = fresh(21, 2)
        cfg = shor.PipelineConfig(layout="dynamic", max_elements=10, retries=2)
        with pytest.raises(shor.MemoryLimitError):
            shor.sample_run(inst, cfg, np.random.default_rng(0))

    def test_determinism(self):
        inst = fresh(21, 2)
        cfg = shor.PipelineConfig(layout="dynamic")
        a = shor.sample_run(inst, cfg, np.random.default_rng(42))
        b = shor.sample_run(inst, cfg, np.random.default_rng(42))
        assert a.measured_s == b.measured_s
        assert a.measured_residue == b.measured_residue
        assert a.convergents == b.convergents
        assert a.rank_profiles == b.rank_profiles
        assert a.peak_elements == b.peak_elements


class TestEndToEndDistribution:
    def test_tvd_smoke_n21(self):
        inst = fresh(21, 2)
        cfg = shor.PipelineConfig(layout="dynamic", collect_profiles=False)
        counts = np.zeros(1024)
        draws = 2000
        for k in range(draws):
            rec = shor.sample_run(inst, cfg, np.random.default_rng(10_000 + k))
            counts[rec.measured_s] += 1
        table = oracle.exact_distribution(5, 6)
        assert oracle.tvd(table, counts) < 0.08
