import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ponita.geometry import random_motion
from ponita.graph import GeomGraph, batch_graphs, fully_connected_edges, radius_edges, transform_graph
from ponita.grids import repulsion_grid
from ponita.io import PointCloudFile, read_dataset, read_pointcloud, write_dataset, write_pointcloud


def test_fully_connected_edges():
    e = fully_connected_edges(3)
    assert e.shape == (6, 2)
    assert not np.any(e[:, 0] == e[:, 1])
    assert fully_connected_edges(3, self_loops=True).shape == (9, 2)


def test_radius_edges_respects_batch():
    p = np.array([[0, 0, 0], [0.5, 0, 0], [0.6, 0, 0]], dtype=float)
    e = radius_edges(p, 0.55)
    assert {tuple(x) for x in e} == {(0, 1), (1, 0), (1, 2), (2, 1)}
    e = radius_edges(p, 1.0, batch=[0, 0, 1])
    assert {tuple(x) for x in e} == {(0, 1), (1, 0)}


def test_graph_validation():
    with pytest.raises(ValueError):
        GeomGraph(np.zeros((3, 3)), [[0, 3]])
    with pytest.raises(ValueError):
        GeomGraph(np.zeros((3, 3)), [[0, 1]], grid=repulsion_grid(3, 4), orientations=np.eye(3))
    with pytest.raises(ValueError):
        GeomGraph(np.zeros((3, 3)), [[0, 1]], vectors=np.zeros((3, 2, 1)))
    g = GeomGraph(np.zeros((3, 3)), [[0, 1]], grid=repulsion_grid(3, 4))
    assert g.form == "bundle" and g.num_graphs == 1
    assert g.with_(grid=None).form == "rn"


def test_batch_graphs_offsets():
    a = GeomGraph(np.zeros((2, 3)), [[0, 1]])
    b = GeomGraph(np.ones((3, 3)), [[2, 0]])
    g = batch_graphs([a, b])
    np.testing.assert_array_equal(g.edges, [[0, 1], [4, 2]])
    np.testing.assert_array_equal(g.batch, [0, 0, 1, 1, 1])
    with pytest.raises(ValueError):
        batch_graphs([])
    with pytest.raises(ValueError):
        batch_graphs([a, GeomGraph(np.zeros((2, 3)), [[0, 1]], scalars=[1.0, 2.0])])


def test_transform_graph_composes_grid_rotation():
    grid = repulsion_grid(3, 6)
    g = GeomGraph(np.random.default_rng(0).standard_normal((4, 3)), fully_connected_edges(4), grid=grid)
    m1, m2 = random_motion(3, 1), random_motion(3, 2)
    twice = transform_graph(transform_graph(g, m1), m2)
    np.testing.assert_allclose(twice.grid_rotations[0], m2.rotation @ m1.rotation, atol=1e-14)
    fixed = transform_graph(g, m1, rotate_grid=False)
    assert fixed.grid_rotations is None


def _cloud(rng, P=4):
    return PointCloudFile(positions=rng.standard_normal((P, 3)),
                          scalars={"charge": rng.choice([-1.0, 1.0], P), "emb": rng.standard_normal((P, 2))},
                          vectors={"velocity": rng.standard_normal((P, 3))},
                          edges=fully_connected_edges(P),
                          targets={"final_positions": rng.standard_normal((P, 3))})


def test_pointcloud_round_trip(tmp_path):
    c = _cloud(np.random.default_rng(0))
    write_pointcloud(tmp_path / "c.json", c)
    assert read_pointcloud(tmp_path / "c.json").equals(c)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_pointcloud_round_trip_exact_bits(pos):
    c = PointCloudFile(positions=pos)
    back = PointCloudFile.from_dict(json.loads(json.dumps(c.to_dict())))
    assert back.positions.tobytes() == c.positions.tobytes()


def test_pointcloud_validation():
    with pytest.raises(ValueError):
        PointCloudFile(positions=np.zeros((3, 3)), vectors={"v": np.zeros((2, 3))})
    with pytest.raises(ValueError):
        PointCloudFile(positions=np.zeros((3, 3)), scalars={"q": np.zeros(4)})
    with pytest.raises(ValueError):
        PointCloudFile.from_dict({"scalars": {}})


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    samples = [_cloud(rng) for _ in range(3)]
    write_dataset(tmp_path / "d.json", samples, {"seed": 1})
    back, meta = read_dataset(tmp_path / "d.json")
    assert meta == {"seed": 1}
    assert all(a.equals(b) for a, b in zip(samples, back))
    (tmp_path / "bad.json").write_text("[]")
    with pytest.raises(ValueError):
        read_dataset(tmp_path / "bad.json")
