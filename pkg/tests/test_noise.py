import math
from collections import Counter

import numpy as np
import pytest

from holoqutrit.algebra import IDENTITY_LABEL, PauliLabel, build_error_operator, error_labels
from holoqutrit.holonomy import embed_logical_unitary, random_logical_unitary
from holoqutrit.noise import (NoiseDraw, NoiseError, NoiseSpec, apply_noisy_circuit, error_distribution,
                              faulty_locations, run_circuit, sample_noise)
from holoqutrit.state import apply_two_site, leak_probability, random_logical_state

ID2 = embed_logical_unitary(np.eye(4), (0, 1), "id")


def test_symmetric_distribution_exact():
    dist = error_distribution(NoiseSpec("symmetric"))
    assert len(dist) == 80
    assert all(p == 0.0125 for _, p in dist)
    assert IDENTITY_LABEL not in [lab for lab, _ in dist]


def test_asymmetric_x_weight_zero_limit():
    dist = error_distribution(NoiseSpec("asymmetric", x_weight=0.0, z_weight=1.0))
    mass = {lab: p for lab, p in dist if p > 0}
    assert len(mass) == 8
    assert all(lab.a1 == 0 and lab.b1 == 0 for lab in mass)
    assert abs(sum(mass.values()) - 1) <= 1e-12


def test_asymmetric_weights_formula():
    spec = NoiseSpec("asymmetric", x_weight=2.0, z_weight=0.5)
    dist = dict(error_distribution(spec))
    raw = {lab: 2.0 ** ((lab.a1 > 0) + (lab.b1 > 0)) * 0.5 ** ((lab.a2 > 0) + (lab.b2 > 0)) for lab in error_labels()}
    total = sum(raw.values())
    for lab, w in raw.items():
        assert abs(dist[lab] - w / total) <= 1e-15


def test_probabilities_normalized(rng):
    for _ in range(20):
        x, z = rng.uniform(0.01, 5, size=2)
        dist = error_distribution(NoiseSpec("asymmetric", x_weight=x, z_weight=z))
        assert abs(sum(p for _, p in dist) - 1) <= 1e-12


def test_both_weights_zero():
    with pytest.raises(NoiseError):
        error_distribution(NoiseSpec("asymmetric", x_weight=0, z_weight=0))


def test_error_rate_adds_identity():
    dist = error_distribution(NoiseSpec("symmetric", error_rate=0.2))
    assert dist[0] == (IDENTITY_LABEL, pytest.approx(0.8))
    assert abs(sum(p for _, p in dist) - 1) <= 1e-12


def test_symmetric_frequencies():
    spec = NoiseSpec("symmetric", seed=99)
    counts = Counter(sample_noise(spec, [ID2], i).label for i in range(100_000))
    assert len(counts) == 80
    bound = 3 * math.sqrt(0.0125 * (1 - 0.0125) / 100_000)
    assert bound <= 0.004
    for lab in error_labels():
        assert abs(counts[lab] / 100_000 - 0.0125) <= 0.004


def test_single_gate_location():
    one = embed_logical_unitary([[0, 1], [1, 0]], (1,))
    circuit = [one, ID2, one]
    spec = NoiseSpec(seed=1)
    assert {sample_noise(spec, circuit, i).gate_index for i in range(200)} == {1}


def test_z_weight_zero_excludes_z_only():
    spec = NoiseSpec("asymmetric", x_weight=1, z_weight=0, seed=5)
    for i in range(2000):
        lab = sample_noise(spec, [ID2], i).label
        assert (lab.a1, lab.b1) != (0, 0)


def test_no_two_qutrit_gate():
    with pytest.raises(NoiseError):
        sample_noise(NoiseSpec(), [embed_logical_unitary(np.eye(2), (0,))], 0)


def test_determinism():
    circuit = [ID2, embed_logical_unitary(np.eye(4), (1, 2)), ID2]
    spec = NoiseSpec(seed=1234)
    a = [sample_noise(spec, circuit, i) for i in range(50)]
    b = [sample_noise(spec, circuit, i) for i in reversed(range(50))][::-1]
    assert a == b
    assert a != [sample_noise(NoiseSpec(seed=1235), circuit, i) for i in range(50)]


def test_location_weights():
    circuit = [ID2, embed_logical_unitary(np.eye(4), (1, 2)), ID2]
    locs = faulty_locations(NoiseSpec(location_weights=(1, 0, 3)), circuit)
    assert locs == [(0, 0.25), (1, 0.0), (2, 0.75)]
    spec = NoiseSpec(location_weights=(0, 1, 0), seed=3)
    assert {sample_noise(spec, circuit, i).gate_index for i in range(100)} == {1}
    with pytest.raises(NoiseError):
        faulty_locations(NoiseSpec(location_weights=(1, 1)), circuit)


def test_identity_label_is_noiseless(rng):
    circuit = [ID2, embed_logical_unitary(random_logical_unitary(2, rng), (1, 2))]
    psi = random_logical_state(3, rng)
    out = apply_noisy_circuit(psi, circuit, NoiseDraw(1, IDENTITY_LABEL))
    assert np.allclose(out.amplitudes, run_circuit(psi, circuit).amplitudes, atol=1e-14)


def test_s1_leak_is_mass_off_the_untouched_corner(rng):
    psi = random_logical_state(3, rng)
    t = np.abs(psi.tensor()) ** 2
    beta, gamma, delta = t[:, 0, 1].sum(), t[:, 1, 0].sum(), t[:, 1, 1].sum()
    for a2 in range(3):
        for b2 in range(3):
            out = apply_noisy_circuit(psi, [embed_logical_unitary(np.eye(4), (1, 2))], NoiseDraw(0, PauliLabel(1, a2, 1, b2)))
            assert abs(leak_probability(out) - (beta + gamma + delta)) <= 1e-12


def test_leak_unchanged_by_later_gates(rng):
    n = 3
    psi = random_logical_state(n, rng)
    gates = [embed_logical_unitary(random_logical_unitary(2, rng), (0, 1))]
    after = [embed_logical_unitary(random_logical_unitary(2, rng), tuple(int(s) for s in rng.choice(n, 2, replace=False)))
             for _ in range(6)]
    for lab in error_labels():
        right_after = apply_noisy_circuit(psi, gates, NoiseDraw(0, lab))
        final = apply_noisy_circuit(psi, gates + after, NoiseDraw(0, lab))
        assert abs(leak_probability(final) - leak_probability(right_after)) <= 1e-10


def test_symmetric_expected_leak_is_45_over_80(rng):
    for n in (2, 3):
        psi = random_logical_state(n, rng)
        leaks = [leak_probability(apply_two_site(psi, build_error_operator(lab), 0, 1)) for lab in error_labels()]
        assert abs(sum(leaks) / 80 - 45 / 80) <= 1e-12
