import numpy as np
import pytest

from pairdense.protein_graph import ComplexSample, ProteinGraph, synth_complex


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_complex():
    return synth_complex(3, 12, 14, d=4, k=3)


def tiny_graph(m, d=3, k=1, d_e=2, seed=0):
    r = np.random.default_rng(seed)
    nb = np.array([[(i + 1 + j) % m for j in range(k)] for i in range(m)])
    return ProteinGraph(r.normal(size=(m, d)), nb, r.uniform(size=(m, k, d_e)), r.permutation(m))


@pytest.fixture
def hand_complex():
    """Two 6-residue proteins with known positives, in-protein pairs on both sides."""
    lig = tiny_graph(6, seed=1)
    rec = tiny_graph(6, seed=2)
    return ComplexSample(
        "hand", lig, rec,
        cross_positives=np.array([[0, 0], [1, 2], [3, 5]]),
        inprotein_positives_ligand=np.array([[0, 2], [0, 3], [1, 4], [2, 5], [3, 5]]),
        inprotein_positives_receptor=np.array([[0, 3], [1, 3], [2, 4], [0, 5], [1, 5]]),
    )
