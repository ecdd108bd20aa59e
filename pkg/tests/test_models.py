import numpy as np
import pytest

from ponita.audit import corotation_check, fixed_grid_deviation, pnita_rotation_check, random_graph
from ponita.geometry import random_motion
from ponita.graph import GeomGraph, batch_graphs, transform_graph
from ponita.grids import repulsion_grid
from ponita.models import ModelConfig, Pnita, PnitaVectorBaseline, Ponita, energy_and_forces, parameter_count

GRID = repulsion_grid(3, 8, rng_seed=0)


def _cfg(**kw):
    base = dict(num_layers=2, channels=8, scalar_in=2, vector_in=1, basis_dim=16)
    base.update(kw)
    return ModelConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(dim=4)
    with pytest.raises(ValueError):
        ModelConfig(readout="tensor")
    with pytest.raises(ValueError):
        ModelConfig(length_scale=0)


def test_zero_layers_runs():
    model = Ponita(_cfg(num_layers=0))
    graph = random_graph(0, grid=GRID)
    params = model.init(0)
    assert model(params, graph).shape == (1, 1)
    assert not any(k.startswith("block") for k in params)


def test_input_mismatch_rejected():
    model = Ponita(_cfg())
    with pytest.raises(ValueError, match="do not match"):
        model(model.init(0), random_graph(0, scalars=3, grid=GRID))
    with pytest.raises(ValueError):
        model(model.init(0), random_graph(0))


def test_pnita_has_no_vector_readout():
    with pytest.raises(ValueError):
        Pnita(_cfg(readout="vector"))


def test_corotation_small():
    s, v = corotation_check(_cfg(), trials=10, rng_seed=3)
    assert s.passed and v.passed, (s.line(), v.line())


def test_pnita_rotation_small():
    assert pnita_rotation_check(trials=10, rng_seed=2).passed


def test_fixed_grid_deviation_shrinks_with_N():
    devs = fixed_grid_deviation((12, 60), trials=10, rng_seed=0, config=_cfg())
    assert devs[60] < devs[12]


def test_permutation_equivariance():
    rng = np.random.default_rng(0)
    model = Ponita(_cfg(readout="vector"))
    params = model.init(1)
    graph = random_graph(rng, particles=5, grid=GRID)
    perm = rng.permutation(5)
    inv = np.argsort(perm)
    permuted = GeomGraph(graph.positions[perm], inv[graph.edges], grid=GRID,
                         scalars=graph.scalars[perm], vectors=graph.vectors[perm])
    np.testing.assert_allclose(model(params, permuted).data, model(params, graph).data[perm],
                               atol=1e-12)


def test_batching_matches_single_graphs():
    model = Ponita(_cfg())
    params = model.init(0)
    graphs = [random_graph(s, particles=4, grid=GRID) for s in range(3)]
    batched = model(params, batch_graphs(graphs)).data
    single = np.concatenate([model(params, g).data for g in graphs])
    np.testing.assert_allclose(batched, single, atol=1e-12)


def test_vector_baseline_equivariant():
    rng = np.random.default_rng(4)
    model = PnitaVectorBaseline(_cfg(readout="vector"))
    params = model.init(0)
    graph = random_graph(rng)
    y = model(params, graph).data
    g = random_motion(3, rng, 2.0)
    moved = model(params, transform_graph(graph, g)).data
    np.testing.assert_allclose(moved, np.einsum("ab,pbo->pao", g.rotation, y), atol=1e-11)


@pytest.mark.parametrize("kind", ["ponita", "pnita"])
def test_forces_rotate_and_sum_to_zero(kind):
    rng = np.random.default_rng(7)
    if kind == "ponita":
        model, graph = Ponita(_cfg(vector_in=0)), random_graph(rng, vectors=0, grid=GRID)
    else:
        model, graph = Pnita(_cfg(vector_in=0)), random_graph(rng, vectors=0)
    params = model.init(0)
    e, F = energy_and_forces(model, params, graph)
    assert np.max(np.abs(F.data.sum(0))) < 1e-12
    g = random_motion(3, rng, 2.0)
    e2, F2 = energy_and_forces(model, params, transform_graph(graph, g))
    assert abs(e2.data[0] - e.data[0]) < 1e-10 * max(1, abs(e.data[0]))
    np.testing.assert_allclose(F2.data, F.data @ g.rotation.T, atol=1e-10)


def test_energy_and_forces_needs_single_output():
    model = Ponita(_cfg(vector_in=0, out_channels=2))
    with pytest.raises(ValueError):
        energy_and_forces(model, model.init(0), random_graph(0, vectors=0, grid=GRID))


def test_parameter_count_and_float32():
    model = Ponita(_cfg())
    params = model.init(0)
    assert parameter_count(params) == sum(v.size for v in params.values())
    p32 = {k: v.astype(np.float32) for k, v in params.items()}
    out = model(p32, random_graph(0, grid=GRID))
    assert out.dtype == np.float32
    np.testing.assert_allclose(out.data, model(params, random_graph(0, grid=GRID)).data, rtol=1e-4)
