"""Smoke test for the `mdh` Python extension.

Build and install first, e.g. `pip install ./crates/py` or
`maturin develop -m crates/py/Cargo.toml`, then run this file directly.
"""

import json
import math

import mdh


def main():
    mixture = mdh.GaussianMixture(
        [0.5, 0.5],
        [[-6.0, 0.0, 0.0], [6.0, 0.0, 0.0]],
        [[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]] * 2,
    )
    phi0 = 1.0 / math.sqrt(2.0 * math.pi)
    assert abs(mixture.proj_density([0.0, 1.0, 0.0], 0.0) - phi0) < 1e-12
    hp = mdh.Hyperplane([1.0, 0.0, 0.0], 0.0)
    assert mixture.stationarity_residual(hp, 10.0, 0.3) == (0.0, 0.0)

    rows, truth = mixture.sample_labeled(5000, 1)
    assert rows == mixture.sample(5000, 1)

    config = mdh.LearnConfig(seed=3)
    config.validate()
    tree = mdh.TreeModel(4, 3, config)
    leaves = tree.observe_many(rows)
    assert tree.total_count == len(rows) and tree.is_count_consistent()
    assert all(8 <= leaf < 16 for leaf in leaves)
    assert mdh.TreeModel.from_json(tree.to_json()).node_ss() == tree.node_ss()

    seq = mdh.PruneSequence.from_tree(tree)
    assert len(seq.ss_curve) == 8
    assert seq.cut(2) == [2, 3] and seq.cut(8) == list(range(8, 16))

    model = mdh.ClusteringModel.from_tree(tree, k=2)
    pred = model.assign_many(rows)
    score = mdh.nmi(truth, pred)
    assert score > 0.95, score
    assert abs(mdh.ari(["a", "a", "b"], [1, 1, 2]) - 1.0) < 1e-12

    voted = mdh.fit(rows, depth=5, config=config)
    assert voted.method == "vote"
    loaded = mdh.ClusteringModel.from_json(voted.to_json())
    assert loaded.assign_many(rows[:50]) == voted.assign_many(rows[:50])
    assert json.loads(voted.to_json())["format_version"] == 1

    try:
        mdh.LearnConfig(q=0.05).validate()
    except ValueError as err:
        assert str(err).startswith("[config]")
    else:
        raise AssertionError("inadmissible schedule accepted")

    print(f"mdh smoke test passed: nmi={score:.4f}, voted K={voted.n_clusters}")


if __name__ == "__main__":
    main()
